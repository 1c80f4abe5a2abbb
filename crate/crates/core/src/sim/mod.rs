//! Synthetic designs and Monte Carlo coverage experiments.

pub mod coverage;
pub mod dgp;

pub use coverage::{
    aggregate, coverage_experiment, run_replication, BandwidthRule, CoverageReport, ExperimentConfig, Rate,
    ReplicationHits, ReplicationOutcome, Targets,
};
pub use dgp::{generate_dgp, replication_rng, DgpSpec, FirstStage, Polynomial, RunningDist};
