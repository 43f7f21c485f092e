use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fehlab_cli::{exit_code, execute, Command, Format, Overrides, RunConfig};

/// Numerical verification of the F-Einstein-Hilbert functional and its
/// variations on discretized charts.
#[derive(Debug, Parser)]
#[command(name = "fehlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report path (overrides `output.path`); standard output otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed of the random directions (overrides `directions.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per axis (the radial count for warped charts).
    #[arg(long)]
    resolution: Option<usize>,
    /// Multiplies every residual tolerance.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out: args.out,
        format: args.format,
        seed: args.seed,
        resolution: args.resolution,
        tolerance_scale: args.tolerance_scale,
    };
    let result = RunConfig::load(&args.config).and_then(|mut cfg| {
        cfg.apply(&overrides)?;
        execute(args.command, &cfg)
    });
    match result {
        Ok(report) => {
            let s = report.summary;
            eprintln!("{}: {} pass, {} fail, {} skipped", args.command.name(), s.pass, s.fail, s.skipped);
            ExitCode::from(exit_code(&report))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
