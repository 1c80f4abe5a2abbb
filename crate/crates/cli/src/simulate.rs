//! Parallel Monte Carlo runs for `simulate`.

use rayon::prelude::*;
use rdjoint_core::sim::{aggregate, run_replication, CoverageReport, ExperimentConfig};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct SimulationOutput {
    pub config: ExperimentConfig,
    pub report: CoverageReport,
}

/// Runs every replication on a pool of `jobs` threads. Outcomes are collected
/// in replication order, so the report does not depend on `jobs`.
pub fn simulate(cfg: &ExperimentConfig, jobs: usize) -> Result<SimulationOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage("thread_pool", e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(cfg, rep))
            .collect()
    });
    Ok(SimulationOutput {
        config: cfg.clone(),
        report: aggregate(cfg, &outcomes),
    })
}
