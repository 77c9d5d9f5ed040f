//! Distributed top-k selection over simulated peer-to-peer networks.
//!
//! A multiset of scores is partitioned across agents on a connected graph.
//! Selecting the k largest scores reduces to estimating a sample quantile,
//! i.e. minimizing an aggregate pinball loss. The solvers here run smoothed
//! first-order consensus iterations (a primal-dual method with constant
//! steps, plus subgradient and message-passing baselines) over a spectral
//! mixing matrix, and the experiment harness verifies convergence against
//! brute-force ground truth.
//!
//! Module map:
//! - [`scoremodel`]: scores, quantization, pinball loss, exact ground truth.
//! - [`topology`]: graphs, `W = I - rho*L`, and the connectivity constant.
//! - [`smoothing`]: conjugate and convolution smoothers with their constants.
//! - [`solvers`]: the primal-dual solver, baselines, and complexity bounds.
//! - [`harness`]: config-driven seeded experiments with CSV/SVG output.

pub mod harness;
pub mod scoremodel;
pub mod smoothing;
pub mod solvers;
pub mod topology;

pub use scoremodel::{
    aggregate_loss, brute_force_minimizer, declare_topk, ground_truth, pinball, quantize,
    sample_quantile, score_linear, score_quadratic, select_p, threshold_from_estimate,
    LocalDataset, QuantileSpec, ScoreModelError, ScoreMultiset, TopKGroundTruth,
};
pub use smoothing::{
    agent_gradient, agent_objective, conv_constants, conv_hmax, nesterov_constants, nesterov_hmax,
    ConvolutionSmoother, Kernel, NesterovSmoother, Smoother, SmoothingError, SmoothnessConstants,
};
pub use solvers::{
    comm_cost, convergence_bounds, dgd_run, extra_default_steps, extra_run, extra_step,
    iteration_budget, r1_oracle, r1_surrogate, smoothed_minimizer, stopk_run, ComplexityInputs,
    DgdConfig, ExtraConfig, IterRecord, SolverError, SolverState, StopKMode, StopKResult,
    StopRule, StopStatistic, Trajectory,
};
pub use topology::{gen_erdos_renyi, gen_ring, mixing_matrix, Graph, MixingTopology, TopologyError};

pub use harness::{
    build_instance, emit_plot, run_experiment, seed_fanout, write_outputs, ExperimentConfig,
    ExperimentKind, ExperimentOutcome, HarnessError, TrialResult,
};
