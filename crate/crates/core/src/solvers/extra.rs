//! Primal-dual consensus optimization with constant steps.
//!
//! Each synchronous round, every agent takes a gradient step on its local
//! smoothed objective corrected by a dual variable and a weighted neighbor
//! disagreement, then updates the dual with the freshly mixed iterates:
//!
//! ```text
//! w_i+ = w_i - alpha * (grad_i(w_i) + v_i + beta/2 * (w_i - (W w)_i))
//! v_i+ = v_i + beta/2 * (w_i+ - (W w+)_i)
//! ```
//!
//! The neighbor sums use the full matrix product `W w` (the diagonal entry
//! is nonzero for `W = I - rho*L`, and the convergence analysis needs the
//! complete mixing). The mixed vector `W w+` computed for the dual update is
//! exactly what the next primal pass consumes, so one scalar crosses each
//! directed edge per round: 2 |E| transmissions.

use crate::scoremodel::{LocalDataset, TopKGroundTruth};
use crate::smoothing::{DynModel, Kernel, LocalModel, NesterovModel, Smoother, UniformConvModel};
use crate::topology::MixingTopology;

use super::bounds::{iteration_budget, r1_oracle, ComplexityInputs};
use super::minimizer::smoothed_minimizer;
use super::{BoundCheck, IterRecord, SolverError, StopRule, StopStatistic, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraConfig {
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: u64,
    pub stop_rule: StopRule,
    pub stop_stat: StopStatistic,
    /// Record every `record_stride`-th iteration (the last one always).
    pub record_stride: u64,
}

impl ExtraConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            max_iters: 1_000_000,
            stop_rule: StopRule::OracleInterval,
            stop_stat: StopStatistic::RunningAverage,
            record_stride: 1,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(SolverError::InvalidInput(format!(
                "steps must be positive: alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if self.max_iters == 0 || self.record_stride == 0 {
            return Err(SolverError::InvalidInput(
                "max_iters and record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-agent primal/dual iterates plus the running sum of primal iterates.
/// The running average after `t` completed rounds is `w_sum / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub w_sum: Vec<f64>,
    pub t: u64,
}

impl SolverState {
    /// Initialization: each agent starts from its own first local score,
    /// duals at zero.
    pub fn init(datasets: &[LocalDataset]) -> Self {
        let w: Vec<f64> = datasets.iter().map(|d| d.scores()[0]).collect();
        let n = w.len();
        Self {
            w,
            v: vec![0.0; n],
            w_sum: vec![0.0; n],
            t: 0,
        }
    }

    pub fn running_average(&self) -> Vec<f64> {
        if self.t == 0 {
            return self.w.clone();
        }
        self.w_sum.iter().map(|&s| s / self.t as f64).collect()
    }
}

fn check_dims(
    n: usize,
    datasets: &[LocalDataset],
    state_len: usize,
) -> Result<(), SolverError> {
    if datasets.len() != n || state_len != n {
        return Err(SolverError::DimensionMismatch {
            state: state_len,
            agents: datasets.len(),
        });
    }
    for (i, d) in datasets.iter().enumerate() {
        if d.agent_id() != i {
            return Err(SolverError::InvalidInput(format!(
                "dataset {i} carries agent id {}",
                d.agent_id()
            )));
        }
    }
    Ok(())
}

/// One synchronous round applied to an explicit state. The run loop below
/// keeps the mixed vector cached between rounds; this entry point recomputes
/// it and is meant for stepwise inspection and tests.
pub fn extra_step(
    state: &mut SolverState,
    topology: &MixingTopology,
    smoother: &Smoother,
    datasets: &[LocalDataset],
    alpha: f64,
    beta: f64,
) -> Result<(), SolverError> {
    let n = topology.node_count();
    check_dims(n, datasets, state.w.len())?;
    let mut mixed = vec![0.0; n];
    topology.apply(&state.w, &mut mixed);
    let mut w_next = vec![0.0; n];
    for i in 0..n {
        let grad = smoother.gradient(datasets[i].scores(), state.w[i]);
        w_next[i] =
            state.w[i] - alpha * (grad + state.v[i] + 0.5 * beta * (state.w[i] - mixed[i]));
    }
    topology.apply(&w_next, &mut mixed);
    for i in 0..n {
        state.v[i] += 0.5 * beta * (w_next[i] - mixed[i]);
        if !w_next[i].is_finite() {
            return Err(SolverError::Divergence(state.t + 1));
        }
    }
    state.w = w_next;
    state.t += 1;
    for i in 0..n {
        state.w_sum[i] += state.w[i];
    }
    Ok(())
}

/// Runs the primal-dual iteration to the configured stop rule.
///
/// With `StopRule::OracleInterval` the run stops at the first round whose
/// stopping statistic (running averages by default) places every agent
/// strictly within `delta/2` of the true k-th largest score; exhausting
/// `max_iters` first is reported as non-converged, not an error. With
/// `StopRule::WorstCaseBudget` exactly the analytic budget is executed.
///
/// When the oracle is provided, measured function error and consensus spread
/// are additionally checked against the analytic convergence bounds at every
/// iteration past the validity floor.
pub fn extra_run(
    topology: &MixingTopology,
    smoother: &Smoother,
    datasets: &[LocalDataset],
    config: &ExtraConfig,
    oracle: Option<&TopKGroundTruth>,
) -> Result<Trajectory, SolverError> {
    // dispatch once so the per-iteration gradient/loss sums monomorphize
    match smoother {
        Smoother::Nesterov(ns) => run_with_model(
            topology,
            smoother,
            &NesterovModel::new(ns),
            datasets,
            config,
            oracle,
        ),
        Smoother::Convolution(cs) => {
            if let Kernel::Uniform { half_width } = cs.kernel() {
                run_with_model(
                    topology,
                    smoother,
                    &UniformConvModel::new(cs, half_width),
                    datasets,
                    config,
                    oracle,
                )
            } else {
                run_with_model(
                    topology,
                    smoother,
                    &DynModel(smoother),
                    datasets,
                    config,
                    oracle,
                )
            }
        }
    }
}

fn run_with_model<M: LocalModel>(
    topology: &MixingTopology,
    smoother: &Smoother,
    model: &M,
    datasets: &[LocalDataset],
    config: &ExtraConfig,
    oracle: Option<&TopKGroundTruth>,
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    let n = topology.node_count();
    check_dims(n, datasets, n)?;

    let mut flat: Vec<f64> = Vec::new();
    let mut spans: Vec<(u32, u32)> = Vec::with_capacity(n);
    for d in datasets {
        let start = flat.len() as u32;
        flat.extend_from_slice(d.scores());
        spans.push((start, flat.len() as u32));
    }
    let theta_h = smoothed_minimizer(smoother, &flat)?;
    let f_theta_h = model.loss_sum(&flat, theta_h);

    let mut w: Vec<f64> = datasets.iter().map(|d| d.scores()[0]).collect();
    let mut v = vec![0.0f64; n];
    let mut w_sum = vec![0.0f64; n];
    let mut w_bar = vec![0.0f64; n];
    let mut w_next = vec![0.0f64; n];
    let mut mixed = vec![0.0f64; n];
    let mut mixed_next = vec![0.0f64; n];
    topology.apply(&w, &mut mixed);

    let smin = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let guard = 1e6 * (smax - smin).max(smax.abs()).max(smin.abs()).max(1.0);

    let inputs: Option<ComplexityInputs> = oracle.map(|gt| {
        let c = smoother.constants(flat.len());
        let p = smoother.p();
        ComplexityInputs {
            g_m: gt.g_m,
            delta: gt.delta,
            sigma2: topology.sigma2(),
            m_h: c.m_h,
            l_h: c.l_h,
            n,
            r1: r1_oracle(&w, theta_h),
            r2: (p * p).max((1.0 - p) * (1.0 - p)),
        }
    });

    let limit = match config.stop_rule {
        StopRule::OracleInterval | StopRule::FixedBudget => config.max_iters,
        StopRule::WorstCaseBudget => {
            let inp = inputs.as_ref().ok_or(SolverError::MissingOracle)?;
            iteration_budget(inp)?
        }
    };
    if config.stop_rule == StopRule::OracleInterval && oracle.is_none() {
        return Err(SolverError::MissingOracle);
    }

    // streaming bound check: fn_err * t <= kf, consensus * t^2 <= kc
    let mut bound_check = inputs.as_ref().map(|inp| {
        let nf = n as f64;
        let gap = 1.0 - inp.sigma2;
        (
            BoundCheck {
                validity_floor: inp.validity_floor(),
                fn_violations: 0,
                consensus_violations: 0,
                max_fn_ratio: 0.0,
                max_consensus_ratio: 0.0,
            },
            34.0 / gap.sqrt() * (inp.r1 * inp.m_h + inp.r2 * nf * nf / inp.m_h),
            16.0 / gap * (inp.r1 + inp.r2 * nf * nf / (inp.m_h * inp.m_h)),
        )
    });

    let tx_per_round = 2 * topology.graph().edge_count() as u64;
    let half_beta = 0.5 * config.beta;
    let alpha = config.alpha;
    let mut records = Vec::new();
    let mut total_tx = 0u64;
    let mut first_entry: Option<u64> = None;
    let mut last_recorded = 0u64;

    let mut t = 0u64;
    while t < limit {
        t += 1;
        // primal pass on round-t state
        for i in 0..n {
            let (s, e) = spans[i];
            let grad = model.grad_sum(&flat[s as usize..e as usize], w[i]);
            w_next[i] = w[i] - alpha * (grad + v[i] + half_beta * (w[i] - mixed[i]));
        }
        // mix the new iterates once; the dual pass and the next primal pass
        // both consume this same exchanged vector
        topology.apply(&w_next, &mut mixed_next);
        for i in 0..n {
            v[i] += half_beta * (w_next[i] - mixed_next[i]);
        }
        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut mixed, &mut mixed_next);
        total_tx += tx_per_round;

        let inv_t = 1.0 / t as f64;
        let mut bar_sum = 0.0;
        let mut diverged = false;
        for i in 0..n {
            w_sum[i] += w[i];
            let b = w_sum[i] * inv_t;
            w_bar[i] = b;
            bar_sum += b;
            diverged |= !(w[i].is_finite() && w[i].abs() <= guard);
        }
        if diverged {
            return Err(SolverError::Divergence(t));
        }
        let bar_mean = bar_sum / n as f64;
        let theta = oracle.map_or(f64::NAN, |gt| gt.theta_k);
        let raw_stat = config.stop_stat == StopStatistic::RawIterate;
        let mut consensus = 0.0;
        let mut sup_err: f64 = 0.0;
        for i in 0..n {
            let d = w_bar[i] - bar_mean;
            consensus += d * d;
            let stat = if raw_stat { w[i] } else { w_bar[i] };
            sup_err = sup_err.max((stat - theta).abs());
        }
        consensus /= n as f64;
        if oracle.is_none() {
            sup_err = f64::NAN;
        }
        let fn_err = model.loss_sum(&flat, bar_mean) - f_theta_h;

        if let Some((check, kf, kc)) = bound_check.as_mut() {
            if t >= check.validity_floor {
                let tf = t as f64;
                let fr = fn_err * tf / *kf;
                let cr = consensus * tf * tf / *kc;
                if fr > 1.0 {
                    check.fn_violations += 1;
                }
                if cr > 1.0 {
                    check.consensus_violations += 1;
                }
                check.max_fn_ratio = check.max_fn_ratio.max(fr);
                check.max_consensus_ratio = check.max_consensus_ratio.max(cr);
            }
        }

        let entered = oracle.is_some_and(|gt| sup_err < gt.delta / 2.0);
        if entered && first_entry.is_none() {
            first_entry = Some(t);
        }
        let stopping = match config.stop_rule {
            StopRule::OracleInterval => entered,
            _ => false,
        };

        if t.is_multiple_of(config.record_stride) || stopping || t == limit {
            records.push(IterRecord {
                iter: t,
                sup_err,
                fn_err,
                consensus,
                tx_scalars: tx_per_round,
            });
            last_recorded = t;
        }
        if stopping {
            break;
        }
    }
    debug_assert!(last_recorded == t || t == 0);

    Ok(Trajectory {
        records,
        iterations: t,
        converged: first_entry.is_some(),
        iters_to_interval: first_entry,
        tx_per_round,
        total_tx,
        final_iterates: w,
        final_running_avg: w_bar,
        bound_check: bound_check.map(|(c, _, _)| c),
    })
}
