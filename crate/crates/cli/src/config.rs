//! Run configuration, read from TOML. Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fehlab_core::oracle::{Suite, Tolerances};
use fehlab_core::warped::WarpedTolerances;
use fehlab_core::{Axis, ChartSpec, FScalarFunction, MetricSpec, WarpedParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest conformal amplitude accepted from a config file.
pub const MAX_AMPLITUDE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chart: ChartConfig,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    #[serde(default = "default_f")]
    pub f: FScalarFunction,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub directions: Directions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub warped: Option<WarpedConfig>,
    #[serde(default)]
    pub output: Output,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Flat
}

fn default_f() -> FScalarFunction {
    FScalarFunction::Linear
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartConfig {
    /// `[0, extent)^dim` with `resolution` nodes per axis.
    Torus {
        dim: usize,
        resolution: usize,
        #[serde(default = "unit")]
        extent: f64,
    },
    /// `[r_min, r_max]` (open) times two periodic unit axes.
    Warped {
        n_r: usize,
        #[serde(default = "default_n_xy")]
        n_xy: usize,
        #[serde(default = "unit")]
        r_min: f64,
        #[serde(default = "two")]
        r_max: f64,
    },
    /// Explicit axes.
    Axes { axes: Vec<Axis> },
}

fn unit() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_n_xy() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Directions {
    pub count: usize,
    pub seed: u64,
    pub max_wavenumber: i64,
}

impl Default for Directions {
    fn default() -> Self {
        Directions {
            count: 3,
            seed: 0,
            max_wavenumber: 2,
        }
    }
}

/// Settings of the `warped-example` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedConfig {
    #[serde(default = "default_betas")]
    pub betas: Vec<u32>,
    #[serde(default)]
    pub tolerances: WarpedTolerances,
}

impl Default for WarpedConfig {
    fn default() -> Self {
        WarpedConfig {
            betas: default_betas(),
            tolerances: WarpedTolerances::default(),
        }
    }
}

fn default_betas() -> Vec<u32> {
    vec![2, 3, 4, 5]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Report path; standard output when absent.
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Directory for full-field CSV and binary dumps (`curvature` only).
    pub fields_dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(s) = o.seed {
            self.directions.seed = s;
        }
        if let Some(n) = o.resolution {
            match &mut self.chart {
                ChartConfig::Torus { resolution, .. } => *resolution = n,
                ChartConfig::Warped { n_r, .. } => *n_r = n,
                ChartConfig::Axes { axes } => axes.iter_mut().for_each(|a| a.resolution = n),
            }
        }
        if let Some(x) = o.tolerance_scale {
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::Config(format!("tolerance scale must be positive, got {x}")));
            }
            self.tolerances = self.tolerances.scaled(x);
            if let Some(w) = &mut self.warped {
                w.tolerances = w.tolerances.scaled(x);
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let MetricSpec::ConformalPerturbed { amplitude, .. } = self.metric {
            if amplitude.is_nan() || amplitude.abs() >= MAX_AMPLITUDE {
                return Err(CliError::Config(format!(
                    "metric.amplitude must satisfy |a| < {MAX_AMPLITUDE}, got {amplitude}"
                )));
            }
        }
        self.metric.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.f.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.directions.count == 0 {
            return Err(CliError::Config("directions.count must be at least 1".into()));
        }
        if self.directions.max_wavenumber < 1 {
            return Err(CliError::Config("directions.max_wavenumber must be at least 1".into()));
        }
        self.chart()?;
        Ok(())
    }

    pub fn chart(&self) -> Result<Arc<ChartSpec>, CliError> {
        let chart = match &self.chart {
            ChartConfig::Torus { dim, resolution, extent } => ChartSpec::periodic(*dim, *extent, *resolution),
            ChartConfig::Warped { n_r, n_xy, r_min, r_max } => {
                let alpha = match self.metric {
                    MetricSpec::Warped { alpha } => alpha,
                    _ => -6.0,
                };
                WarpedParams::new(alpha, 2, *r_min, *r_max).and_then(|p| p.chart(*n_r, *n_xy))
            }
            ChartConfig::Axes { axes } => ChartSpec::new(axes.clone()),
        };
        chart.map_err(|e| CliError::Config(e.to_string()))
    }

    /// The warped-chart settings, when the chart is of that kind.
    pub fn warped_chart(&self) -> Option<(usize, usize, f64, f64)> {
        match self.chart {
            ChartConfig::Warped { n_r, n_xy, r_min, r_max } => Some((n_r, n_xy, r_min, r_max)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
suites = ["einstein_divergence", "trace_identity"]

[chart]
kind = "torus"
dim = 2
resolution = 32

[metric]
kind = "conformal_perturbed"
amplitude = 0.1
wavenumbers = 1
seed = 3

[f]
kind = "power"
beta = 2
"#;

    #[test]
    fn parses_and_applies_overrides() {
        let mut cfg = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.suites, vec![Suite::EinsteinDivergence, Suite::TraceIdentity]);
        assert_eq!(cfg.directions, Directions::default());
        cfg.apply(&Overrides {
            seed: Some(9),
            resolution: Some(16),
            tolerance_scale: Some(10.0),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.directions.seed, 9);
        assert_eq!(cfg.chart().unwrap().axis(0).resolution, 16);
        assert!((cfg.tolerances.fd_relative - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let err = RunConfig::from_toml(&format!("{BASIC}\nbogus = 1\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
        assert!(RunConfig::from_toml(&BASIC.replace("beta = 2", "beta = 2\nextra = 0")).is_err());
    }

    #[test]
    fn amplitude_guard() {
        let err = RunConfig::from_toml(&BASIC.replace("amplitude = 0.1", "amplitude = 0.6")).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn bad_chart_and_scale_are_config_errors() {
        assert!(RunConfig::from_toml(&BASIC.replace("resolution = 32", "resolution = 4")).is_err());
        let mut cfg = RunConfig::from_toml(BASIC).unwrap();
        assert!(cfg
            .apply(&Overrides {
                tolerance_scale: Some(-1.0),
                ..Default::default()
            })
            .is_err());
    }
}
