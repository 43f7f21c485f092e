//! The report written by every command.

use std::io::Write;

use fehlab_core::report::Summary;
use fehlab_core::{ReportEntry, VerificationReport};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const REPORT_VERSION: u32 = 1;

/// A named number computed by a command (not a pass/fail check).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Min, max and norms of one field over all nodes and components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSummary {
    pub name: String,
    pub components: usize,
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
    /// Root mean square over nodes and components.
    pub rms: f64,
}

/// One row of the warped-example table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WarpedRow {
    pub beta: u32,
    pub alpha: Option<f64>,
    pub mu_at_r_min: Option<f64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub entries: Vec<ReportEntry>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<NamedValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warped_table: Vec<WarpedRow>,
    /// The only part of the report that changes between identical runs.
    pub timing: Timing,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig, mut verification: VerificationReport) -> Self {
        verification.sort();
        RunReport {
            report_version: REPORT_VERSION,
            command: command.to_string(),
            config: config.clone(),
            seed: config.directions.seed,
            summary: verification.summary(),
            entries: verification.entries,
            values: Vec::new(),
            fields: Vec::new(),
            warped_table: Vec::new(),
            timing: Timing { wall_seconds: 0.0 },
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn write<W: Write>(&self, w: W, format: Format) -> Result<(), CliError> {
        match format {
            Format::Json => self.write_json(w),
            Format::Csv => self.write_csv(w),
        }
    }

    fn write_json<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    /// One table: `section,name,direction,value,tolerance,order,min_order,status,note`.
    fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| CliError::Output(e.to_string());
        out.write_record(["section", "name", "direction", "value", "tolerance", "order", "min_order", "status", "note"])
            .map_err(csv_err)?;
        let num = |v: f64| format!("{v:e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        for e in &self.entries {
            let status = serde_json::to_value(e.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            out.write_record([
                e.suite.clone(),
                e.formula.clone(),
                e.direction.map(|d| d.to_string()).unwrap_or_default(),
                num(e.residual),
                num(e.tolerance),
                opt(e.order),
                opt(e.min_order),
                status,
                e.note.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        for v in &self.values {
            out.write_record(["value", &v.name, "", &num(v.value), "", "", "", "", ""]).map_err(csv_err)?;
        }
        for f in &self.fields {
            for (what, v) in [("min", f.min), ("max", f.max), ("max_abs", f.max_abs), ("rms", f.rms)] {
                out.write_record(["field", &format!("{} {what}", f.name), "", &num(v), "", "", "", "", ""])
                    .map_err(csv_err)?;
            }
        }
        for r in &self.warped_table {
            let name = format!("beta = {}", r.beta);
            out.write_record(["warped_alpha", &name, "", &opt(r.alpha), "", "", "", &r.status, r.reason.as_deref().unwrap_or("")])
                .map_err(csv_err)?;
            out.write_record(["warped_mu_at_r_min", &name, "", &opt(r.mu_at_r_min), "", "", "", &r.status, ""])
                .map_err(csv_err)?;
        }
        out.write_record(["timing", "wall_seconds", "", &num(self.timing.wall_seconds), "", "", "", "", ""])
            .map_err(csv_err)?;
        out.flush()?;
        Ok(())
    }
}
