//! Experiment configuration: sectioned `key = value` files.

use serde::Deserialize;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-iteration error curves on a fixed instance family.
    Convergence,
    /// Iterations-to-interval as a function of k.
    VsK,
    /// Iterations-to-interval as a function of the quantization gap.
    VsDelta,
    /// Iterations-to-interval as a function of the agent count (ring graphs).
    VsN,
    /// Transmitted scalars: iterative solver against the list-merging baseline.
    CommCost,
}

impl ExperimentKind {
    pub fn sweep_column(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "k",
            ExperimentKind::VsK | ExperimentKind::CommCost => "k",
            ExperimentKind::VsDelta => "delta",
            ExperimentKind::VsN => "n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    ErdosRenyi,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMethod {
    Convolution,
    Nesterov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Uniform,
    Triangular,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HPolicy {
    /// Largest admissible h for the instance's gap and multiplicity.
    Hmax,
    /// Fixed h = h_value.
    Manual,
    /// h = h_value * delta, scaling with the quantization gap.
    DeltaScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Analytic constant steps derived from the smoothness constants.
    Default,
    /// alpha = h, beta = 1/h.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Extra,
    Dgd,
    Stopk,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Extra => "extra",
            SolverKind::Dgd => "dgd",
            SolverKind::Stopk => "stopk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    RunningAverage,
    Raw,
}

fn default_trials() -> usize {
    20
}
fn default_edge_multiplier() -> f64 {
    3.0
}
fn default_kernel_half_width() -> f64 {
    1.0
}
fn default_h_value() -> f64 {
    0.1
}
fn default_dgd_step() -> f64 {
    0.01
}
fn default_max_iters() -> u64 {
    200_000_000
}
fn default_record_stride() -> u64 {
    1
}
fn default_k_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub graph: GraphKind,
    pub n: usize,
    #[serde(default = "default_edge_multiplier")]
    pub edge_multiplier: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresSection {
    /// Total score count N (>= n; scores are spread round-robin when larger).
    pub total: usize,
    pub variance: f64,
    /// Quantization resolution.
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileSection {
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub k_sweep: Vec<usize>,
    #[serde(default)]
    pub delta_sweep: Vec<f64>,
    #[serde(default)]
    pub n_sweep: Vec<usize>,
    #[serde(default = "default_k_fraction")]
    pub k_fraction: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    pub method: SmoothingMethod,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_kernel_half_width")]
    pub kernel_half_width: f64,
    pub h_policy: HPolicy,
    #[serde(default = "default_h_value")]
    pub h_value: f64,
}

fn default_kernel() -> KernelKind {
    KernelKind::Uniform
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolversSection {
    pub run: Vec<SolverKind>,
    pub steps: StepPolicy,
    #[serde(default = "default_dgd_step")]
    pub dgd_step: f64,
    #[serde(default = "default_stat")]
    pub stop_stat: StatKind,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    #[serde(default = "default_record_stride")]
    pub record_stride: u64,
}

fn default_stat() -> StatKind {
    StatKind::RunningAverage
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: NetworkSection,
    pub scores: ScoresSection,
    pub quantile: QuantileSection,
    pub smoothing: SmoothingSection,
    pub solvers: SolversSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be rejected before any trial runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.experiment.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.network.n < 1 {
            return bad("network.n must be at least 1".into());
        }
        if self.scores.total < self.network.n {
            return bad(format!(
                "scores.total = {} must be at least network.n = {} so every agent holds a score",
                self.scores.total, self.network.n
            ));
        }
        if !(self.scores.variance > 0.0) || !(self.scores.delta > 0.0) {
            return bad("scores.variance and scores.delta must be positive".into());
        }
        if self.network.graph == GraphKind::ErdosRenyi {
            let m = (self.network.edge_multiplier * self.network.n as f64).round() as usize;
            let max = self.network.n * (self.network.n - 1) / 2;
            if m + 1 < self.network.n || m > max {
                return bad(format!(
                    "edge_multiplier {} gives {m} edges, outside [n-1, n(n-1)/2] = [{}, {max}]",
                    self.network.edge_multiplier,
                    self.network.n - 1
                ));
            }
        }
        if self.solvers.run.is_empty() {
            return bad("solvers.run must list at least one solver".into());
        }
        if !(self.solvers.dgd_step > 0.0) || !(self.smoothing.h_value > 0.0) {
            return bad("dgd_step and h_value must be positive".into());
        }
        if self.solvers.max_iters == 0 || self.solvers.record_stride == 0 {
            return bad("max_iters and record_stride must be at least 1".into());
        }
        match self.experiment.kind {
            ExperimentKind::Convergence => {
                self.check_k(self.quantile.k, self.scores.total)?;
            }
            ExperimentKind::VsK | ExperimentKind::CommCost => {
                if self.quantile.k_sweep.is_empty() {
                    return bad("k_sweep must be non-empty for this experiment kind".into());
                }
                for &k in &self.quantile.k_sweep {
                    self.check_k(k, self.scores.total)?;
                }
            }
            ExperimentKind::VsDelta => {
                if self.quantile.delta_sweep.is_empty() {
                    return bad("delta_sweep must be non-empty for this experiment kind".into());
                }
                if self.quantile.delta_sweep.iter().any(|&d| !(d > 0.0)) {
                    return bad("delta_sweep entries must be positive".into());
                }
                self.check_k(self.quantile.k, self.scores.total)?;
            }
            ExperimentKind::VsN => {
                if self.quantile.n_sweep.is_empty() {
                    return bad("n_sweep must be non-empty for this experiment kind".into());
                }
                if !(self.quantile.k_fraction > 0.0 && self.quantile.k_fraction < 1.0) {
                    return bad("k_fraction must lie in (0, 1)".into());
                }
                for &n in &self.quantile.n_sweep {
                    if n < 3 {
                        return bad("n_sweep entries must be at least 3".into());
                    }
                }
            }
        }
        Ok(())
    }

    fn check_k(&self, k: usize, total: usize) -> Result<(), HarnessError> {
        if k < 1 || k > total {
            return Err(HarnessError::Config(format!(
                "k = {k} out of range [1, {total}]"
            )));
        }
        Ok(())
    }
}
