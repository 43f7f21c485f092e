//! The subcommands. Each builds a [`RunReport`]; writing and exit codes are
//! handled by the caller.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use fehlab_core::einstein::{self, EinsteinForm};
use fehlab_core::field::{Field, Kind};
use fehlab_core::oracle::{run_formula_suite, Scenario, Suite};
use fehlab_core::warped::{self, WarpedParams};
use fehlab_core::{tensor, variation, Geometry, MetricSpec, VerificationReport};

use crate::config::{RunConfig, WarpedConfig};
use crate::error::CliError;
use crate::report::{FieldSummary, NamedValue, RunReport, WarpedRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Curvature,
    Verify,
    WarpedExample,
    FirstVariation,
    SecondVariation,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Verify => "verify",
            Command::WarpedExample => "warped-example",
            Command::FirstVariation => "first-variation",
            Command::SecondVariation => "second-variation",
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunReport, CliError> {
    match cmd {
        Command::Curvature => curvature(cfg),
        Command::Verify => {
            if cfg.suites.is_empty() {
                return Err(CliError::Config("verify needs a non-empty `suites` list".into()));
            }
            suites(cmd, cfg, &cfg.suites)
        }
        Command::WarpedExample => warped_example(cfg),
        Command::FirstVariation => first_variation(cfg),
        Command::SecondVariation => second_variation(cfg),
    }
}

fn scenario(cfg: &RunConfig) -> Result<Scenario, CliError> {
    let mut sc = Scenario::new(cfg.chart()?, cfg.metric.clone(), cfg.f.clone());
    sc.directions = cfg.directions.count;
    sc.seed = cfg.directions.seed;
    sc.max_wavenumber = cfg.directions.max_wavenumber;
    sc.tolerances = cfg.tolerances.clone();
    Ok(sc)
}

fn suites(cmd: Command, cfg: &RunConfig, list: &[Suite]) -> Result<RunReport, CliError> {
    let sc = scenario(cfg)?;
    let mut all = VerificationReport::default();
    for &suite in list {
        all.extend(run_formula_suite(&sc, suite)?);
    }
    Ok(RunReport::new(cmd.name(), cfg, all))
}

fn summarize<K: Kind>(name: &str, f: &Field<K>) -> FieldSummary {
    let v = f.values();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
    FieldSummary {
        name: name.to_string(),
        components: f.ncomp(),
        min,
        max,
        max_abs: f.max_abs(),
        rms,
    }
}

fn dump<K: Kind>(dir: &Path, stem: &str, f: &Field<K>) -> Result<(), CliError> {
    f.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
    f.write_binary(BufWriter::new(File::create(dir.join(format!("{stem}.bin")))?))?;
    Ok(())
}

fn curvature(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let chart = cfg.chart()?;
    let geo = Geometry::new(cfg.metric.build(&chart)?)?;
    let mut report = RunReport::new(Command::Curvature.name(), cfg, VerificationReport::default());
    report.fields = vec![
        summarize("christoffel", geo.christoffel()),
        summarize("ricci", geo.ricci()),
        summarize("scalar", geo.scalar()),
    ];
    if let MetricSpec::Warped { alpha } = cfg.metric {
        let r_min = chart.axis(0).origin;
        let edge = geo.scalar().at(0);
        report.values.push(NamedValue {
            name: "scalar curvature at r_min".into(),
            value: edge,
        });
        let p = WarpedParams::new(alpha, 2, r_min, r_min + chart.axis(0).extent)?;
        report.values.push(NamedValue {
            name: "scalar curvature at r_min (closed form)".into(),
            value: warped::closed_form_curvature(&p, r_min)?.scalar,
        });
    }
    if let Some(dir) = &cfg.output.fields_dir {
        fs::create_dir_all(dir)?;
        dump(dir, "christoffel", geo.christoffel())?;
        dump(dir, "ricci", geo.ricci())?;
        dump(dir, "scalar", geo.scalar())?;
    }
    Ok(report)
}

fn warped_example(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let (n_r, n_xy, r_min, r_max) = cfg
        .warped_chart()
        .ok_or_else(|| CliError::Config("warped-example needs a chart of kind \"warped\"".into()))?;
    let wc = cfg.warped.clone().unwrap_or_default();
    let WarpedConfig { betas, tolerances } = wc;
    let mut all = VerificationReport::default();
    let mut table = Vec::new();
    for beta in betas {
        let alpha = match warped::alpha_of_beta(beta) {
            Ok(a) => a,
            Err(e) => {
                table.push(WarpedRow {
                    beta,
                    alpha: None,
                    mu_at_r_min: None,
                    status: "rejected".into(),
                    reason: Some(e.to_string()),
                });
                continue;
            }
        };
        let p = WarpedParams::new(alpha, beta, r_min, r_max)?;
        let chart = p.chart(n_r, n_xy)?;
        let mut r = warped::cross_validate_numeric(&p, &chart, &tolerances)?;
        for e in &mut r.entries {
            e.formula = format!("beta = {beta}: {}", e.formula);
        }
        table.push(WarpedRow {
            beta,
            alpha: Some(alpha),
            mu_at_r_min: Some(warped::mu_of_r(beta, r_min)),
            status: if r.all_passed() { "pass" } else { "fail" }.into(),
            reason: None,
        });
        all.extend(r);
    }
    let mut report = RunReport::new(Command::WarpedExample.name(), cfg, all);
    report.warped_table = table;
    Ok(report)
}

fn first_variation(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let mut report = suites(Command::FirstVariation, cfg, &[Suite::FirstVariation])?;
    let sc = scenario(cfg)?;
    let geo = sc.geometry()?;
    let g = geo.metric.g().clone();
    let volume = geo.metric.volume()?;
    report.values.push(NamedValue {
        name: "first variation along h = g".into(),
        value: variation::first_variation_functional(&geo, &cfg.f, &g)?,
    });
    report.values.push(NamedValue {
        name: "(n/2) volume".into(),
        value: 0.5 * geo.dim() as f64 * volume,
    });
    for d in 0..sc.directions {
        report.values.push(NamedValue {
            name: format!("first variation along direction {d}"),
            value: variation::first_variation_functional(&geo, &cfg.f, &sc.direction(d))?,
        });
    }
    Ok(report)
}

fn second_variation(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let mut report = suites(Command::SecondVariation, cfg, &[Suite::SecondVariation])?;
    let sc = scenario(cfg)?;
    let geo = sc.geometry()?;
    let pkg = einstein::f_einstein_tensor(&geo, &cfg.f, EinsteinForm::Compact)?;
    if let Ok(lambda) = pkg.constant_lambda(cfg.tolerances.hypothesis) {
        report.values.push(NamedValue {
            name: "lambda".into(),
            value: lambda,
        });
        let trace = tensor::trace(&pkg.e_f, &geo.metric)?;
        report.values.push(NamedValue {
            name: "mean trace of E_F".into(),
            value: geo.metric.integrate(&trace)? / geo.metric.volume()?,
        });
    }
    Ok(report)
}
