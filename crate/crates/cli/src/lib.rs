//! Library side of the `pipe` binary: configuration documents, world and
//! start resolution, the five subcommands and their on-disk outputs.

pub mod batch;
pub mod bench;
pub mod config;
pub mod genmap;
pub mod oracle;
pub mod output;
pub mod run;
pub mod world;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUN_FAILURE: i32 = 3;
pub const EXIT_ORACLE_FAILURE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, unresolvable world.
    #[error("usage: {0}")]
    Usage(String),
    /// A run (or some runs of a batch) failed.
    #[error("run failed: {0}")]
    Run(String),
    /// The geometry oracle check found a violation.
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(_) => EXIT_RUN_FAILURE,
            CliError::Oracle(_) => EXIT_ORACLE_FAILURE,
        }
    }

    pub(crate) fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub(crate) fn run(e: impl std::fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A pool of exactly `workers` threads. Batch runs and the per-frontier
/// fan-out inside each run share it, so nothing nests a second pool.
pub fn worker_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    if workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(CliError::run)
}
