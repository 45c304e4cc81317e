//! Thread-pool driver for Monte Carlo studies.

use rayon::prelude::*;
use state_lp_core::monte_carlo::{run_replication, McConfig, McResult};

use crate::error::{CliError, CliResult};

/// Builds a pool with `threads` workers, or rayon's default when `None`.
pub fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs replications across the pool. Each replication owns its random
/// streams and the reduction runs in replication order, so the result does
/// not depend on the thread count.
pub fn run_study_parallel(config: &McConfig, threads: Option<usize>) -> CliResult<McResult> {
    config.validate()?;
    let records = pool(threads)?.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|r| run_replication(config, r))
            .collect()
    });
    Ok(McResult::from_records(config, records)?)
}
