//! Config-driven experiment harness: seeded Monte Carlo trials over the
//! solvers, CSV outputs, and simple SVG plots.

mod config;
mod experiment;
mod plot;
mod seeding;

pub use config::{
    ExperimentConfig, ExperimentKind, GraphKind, HPolicy, KernelKind, SmoothingMethod, SolverKind,
    StatKind, StepPolicy,
};
pub use experiment::{
    build_instance, run_experiment, write_outputs, ExperimentOutcome, SolverOutcome, TrialInstance,
    TrialResult,
};
pub use plot::emit_plot;
pub use seeding::seed_fanout;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("plot format error: {0}")]
    PlotFormat(String),
    #[error("no data rows to plot")]
    EmptyData,
    #[error(transparent)]
    Score(#[from] crate::scoremodel::ScoreModelError),
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error(transparent)]
    Smoothing(#[from] crate::smoothing::SmoothingError),
    #[error(transparent)]
    Solver(#[from] crate::solvers::SolverError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
