//! Batch command-line runner: experiment configuration, model files and the
//! `synth`, `train`, `predict`, `cv`, `gridsearch` and `report` commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;

pub use error::{CliError, Result};

use args::{Cli, Command};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MSSVDD_THREADS";

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Gridsearch(a) => commands::gridsearch_cmd(a),
        Command::Report(a) => commands::report_cmd(a),
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    if n == 0 {
        return Err(CliError::Config(format!("{THREADS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}
