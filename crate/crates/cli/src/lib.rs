//! Batch experiments on top of `reslab-core`: every command reads a
//! [`RunConfig`], runs inside a thread pool of the configured size and
//! produces a CSV [`ResultEnvelope`] whose data rows do not depend on the
//! number of threads.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suite;

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::CliError;
pub use output::ResultEnvelope;

/// Run `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
