//! Command-line front end: JSON configuration, flag overrides, CSV and SVG
//! outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 mesh or parse error,
//! 4 solver failure.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use clap::Parser;

pub use args::{normalize_args, Cli, Command, RunArgs};
pub use config::RunConfig;
pub use error::CliError;

/// Parses flags, runs the requested command and writes the outputs. The CSV
/// goes to stdout when no path is configured.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (run, grid) = match &cli.command {
        Command::Run(run) => (run, None),
        Command::Oracle { run, grid } => (run, Some(*grid)),
    };
    let mut cfg = pipeline::load_config(&run.config)?;
    run.apply(&mut cfg)?;
    let records = match grid {
        None => pipeline::simulate(&cfg, run.multi)?,
        Some(grid) => pipeline::oracle(&cfg, grid)?,
    };
    match &cfg.output.csv {
        Some(path) => output::write_csv(&records, path)?,
        None => print!("{}", output::csv_string(&records)),
    }
    if let Some(path) = &cfg.output.svg {
        output::emit_svg(&records, path, cfg.output.log_y)?;
    }
    Ok(())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_from_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let cli = match Cli::try_parse_from(normalize_args(args)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
