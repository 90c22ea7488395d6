//! Configuration, output and subcommand plumbing for the `polyfk` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod vtk;

pub use error::{CliError, Result};

/// Size the global thread pool from `POLYFK_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("POLYFK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("POLYFK_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}
