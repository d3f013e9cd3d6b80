//! Experiment configuration, runs, and thread-count sweeps.

mod config;
mod run;
mod sweep;

pub use config::{
    CoarseConfig, DecompositionConfig, ExperimentConfig, OutputConfig, ProblemConfig, ProblemKind, SolverConfig,
    SolverKind,
};
pub use run::{
    build_discretization, build_problem, build_system, newton_options, run_experiment, run_with_pool,
    threads_from_env, ExperimentOutcome, TimingSummary, THREADS_ENV,
};
pub use sweep::{scaling_sweep, SweepRow, SweepTable};
