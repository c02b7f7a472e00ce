//! File formats and subcommands behind the `peaksharp` binary.

pub mod commands;
pub mod error;
pub mod scenario;
pub mod table;
pub mod weight;

pub use error::{CliError, Result};

/// Environment variable capping the worker threads; `0` or unset means one
/// per core.
pub const THREADS_ENV: &str = "PEAKSHARP_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{raw}`")))?;
    if n > 0 {
        // A pool built earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
