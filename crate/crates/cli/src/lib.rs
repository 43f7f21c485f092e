//! Command-line front end: reads a TOML run configuration, runs one
//! command and writes a JSON or CSV report.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::time::Instant;

pub use commands::Command;
pub use config::{Format, Overrides, RunConfig};
pub use error::CliError;
pub use report::RunReport;

/// Exit code when every check passed.
pub const EXIT_PASS: u8 = 0;
/// Exit code when at least one check failed.
pub const EXIT_FAIL: u8 = 1;

/// Runs `cmd` and writes the report where the config says. Returns the
/// report for inspection.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = commands::run(cmd, cfg)?;
    report.timing.wall_seconds = start.elapsed().as_secs_f64();
    match &cfg.output.path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?);
            report.write(&mut w, cfg.output.format)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            report.write(stdout.lock(), cfg.output.format)?;
        }
    }
    Ok(report)
}

/// The process exit code for a finished report.
pub fn exit_code(report: &RunReport) -> u8 {
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
