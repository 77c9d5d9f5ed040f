//! Distributed solvers over a mixing topology: the smoothed primal-dual
//! method, a nonsmooth subgradient baseline, and the list-merging baseline.

mod bounds;
mod dgd;
mod extra;
mod minimizer;
mod stopk;

pub use bounds::{
    convergence_bounds, extra_default_steps, iteration_budget, r1_oracle, r1_surrogate,
    ComplexityInputs,
};
pub use dgd::{dgd_run, DgdConfig};
pub use extra::{extra_run, extra_step, ExtraConfig, SolverState};
pub use minimizer::smoothed_minimizer;
pub use stopk::{stopk_run, StopKMode, StopKResult};

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid topology: sigma2 = {0} must lie in [0, 1)")]
    InvalidTopology(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("state dimension {state} does not match agent count {agents}")]
    DimensionMismatch { state: usize, agents: usize },
    #[error("iterate diverged (non-finite or out of range) at iteration {0}")]
    Divergence(u64),
    #[error("stop rule requires ground-truth oracle data")]
    MissingOracle,
    #[error("stop rule not supported by this solver: {0}")]
    UnsupportedStopRule(&'static str),
    #[error("gradient has the same sign at both bracket ends")]
    BracketingFailure,
    #[error("smoothing error: {0}")]
    Smoothing(#[from] crate::smoothing::SmoothingError),
    #[error("topology error: {0}")]
    Topology(#[from] crate::topology::TopologyError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// When to stop the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Stop at the first iteration whose stopping statistic has every agent
    /// within half a gap of the true k-th largest score (requires the oracle).
    OracleInterval,
    /// Run exactly `max_iters` iterations.
    FixedBudget,
    /// Run exactly the worst-case `iteration_budget` (requires the oracle).
    WorstCaseBudget,
}

/// Which iterate the stopping statistic is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopStatistic {
    /// Running averages `w_bar^t = (1/t) sum_{tau<=t} w^tau`, matching the
    /// convergence certificate.
    #[default]
    RunningAverage,
    /// Raw iterates `w^t`, mirroring the plotted variable error.
    RawIterate,
}

/// One recorded iteration of a solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: u64,
    /// sup_i |stat_i - theta_k|; NaN when no oracle was provided.
    pub sup_err: f64,
    /// Smoothed (or raw, for the subgradient baseline) function error at the
    /// mean of the running averages; NaN when unavailable.
    pub fn_err: f64,
    /// Mean squared consensus spread of the running averages.
    pub consensus: f64,
    /// Scalars transmitted during this round.
    pub tx_scalars: u64,
}

/// Streaming comparison of measured errors against the analytic bounds,
/// evaluated at every iteration past the validity floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub validity_floor: u64,
    pub fn_violations: u64,
    pub consensus_violations: u64,
    pub max_fn_ratio: f64,
    pub max_consensus_ratio: f64,
}

/// Full run record of an iterative solver.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Per-iteration records, decimated by the configured stride (the final
    /// iteration is always recorded).
    pub records: Vec<IterRecord>,
    pub iterations: u64,
    /// Whether the stopping statistic entered the oracle interval.
    pub converged: bool,
    /// First iteration at which the statistic entered the interval.
    pub iters_to_interval: Option<u64>,
    /// Scalars exchanged per round: 2 |E|.
    pub tx_per_round: u64,
    pub total_tx: u64,
    /// Final raw iterates.
    pub final_iterates: Vec<f64>,
    /// Final running averages.
    pub final_running_avg: Vec<f64>,
    /// Present when the run was checked against the convergence bounds.
    pub bound_check: Option<BoundCheck>,
}

impl Trajectory {
    /// CSV export with columns `iter,sup_err,fn_err,consensus,tx_scalars`.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<(), SolverError> {
        writeln!(w, "iter,sup_err,fn_err,consensus,tx_scalars")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iter, r.sup_err, r.fn_err, r.consensus, r.tx_scalars
            )?;
        }
        Ok(())
    }
}

/// Anything with a scalar-transmission ledger.
pub trait TransmissionCost {
    fn scalars_transmitted(&self) -> u64;
}

impl TransmissionCost for Trajectory {
    fn scalars_transmitted(&self) -> u64 {
        self.total_tx
    }
}

impl TransmissionCost for StopKResult {
    fn scalars_transmitted(&self) -> u64 {
        self.scalars_transmitted
    }
}

/// Total scalars transmitted by a run.
pub fn comm_cost<T: TransmissionCost>(run: &T) -> u64 {
    run.scalars_transmitted()
}
