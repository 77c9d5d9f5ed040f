//! Nonsmooth baseline: distributed subgradient descent with a constant step.
//!
//! `w^{t+1} = W w^t - step * g(w^t)` where `g_i` is a pinball subgradient of
//! agent i's local objective. At a kink the midpoint `1/2 - p` of the
//! subdifferential `[-p, 1-p]` is used.

use crate::scoremodel::{aggregate_loss, LocalDataset, ScoreMultiset, TopKGroundTruth};
use crate::topology::MixingTopology;

use super::{IterRecord, SolverError, StopRule, StopStatistic, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct DgdConfig {
    pub step: f64,
    pub max_iters: u64,
    pub stop_rule: StopRule,
    pub stop_stat: StopStatistic,
    pub record_stride: u64,
}

impl DgdConfig {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            max_iters: 1_000_000,
            stop_rule: StopRule::OracleInterval,
            stop_stat: StopStatistic::RunningAverage,
            record_stride: 1,
        }
    }
}

/// Subgradient in `x` of `rho_p(score - x)`; midpoint selection at the kink.
#[inline]
pub fn pinball_subgradient(score: f64, x: f64, p: f64) -> f64 {
    if score > x {
        -p
    } else if score < x {
        1.0 - p
    } else {
        0.5 - p
    }
}

/// Runs the subgradient baseline with the same stopping statistic and
/// trajectory schema as the primal-dual solver.
pub fn dgd_run(
    topology: &MixingTopology,
    datasets: &[LocalDataset],
    p: f64,
    config: &DgdConfig,
    oracle: Option<&TopKGroundTruth>,
) -> Result<Trajectory, SolverError> {
    if !(config.step > 0.0) {
        return Err(SolverError::InvalidInput(format!(
            "step must be positive, got {}",
            config.step
        )));
    }
    if config.max_iters == 0 || config.record_stride == 0 {
        return Err(SolverError::InvalidInput(
            "max_iters and record_stride must be at least 1".into(),
        ));
    }
    if config.stop_rule == StopRule::WorstCaseBudget {
        return Err(SolverError::UnsupportedStopRule(
            "the analytic budget applies to the smoothed primal-dual solver",
        ));
    }
    let n = topology.node_count();
    if datasets.len() != n {
        return Err(SolverError::DimensionMismatch {
            state: n,
            agents: datasets.len(),
        });
    }
    if config.stop_rule == StopRule::OracleInterval && oracle.is_none() {
        return Err(SolverError::MissingOracle);
    }

    let flat: Vec<f64> = datasets
        .iter()
        .flat_map(|d| d.scores().iter().copied())
        .collect();
    let ms = ScoreMultiset::new(flat.clone()).expect("datasets are non-empty");
    let f_min = oracle.map(|gt| aggregate_loss(&ms, p, gt.theta_k));

    let mut w: Vec<f64> = datasets.iter().map(|d| d.scores()[0]).collect();
    let mut w_sum = vec![0.0f64; n];
    let mut w_bar = vec![0.0f64; n];
    let mut mixed = vec![0.0f64; n];

    let smin = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let guard = 1e6 * (smax - smin).max(smax.abs()).max(smin.abs()).max(1.0);

    let tx_per_round = 2 * topology.graph().edge_count() as u64;
    let mut records = Vec::new();
    let mut total_tx = 0u64;
    let mut first_entry: Option<u64> = None;

    let mut t = 0u64;
    while t < config.max_iters {
        t += 1;
        topology.apply(&w, &mut mixed);
        let mut diverged = false;
        for i in 0..n {
            let g: f64 = datasets[i]
                .scores()
                .iter()
                .map(|&s| pinball_subgradient(s, w[i], p))
                .sum();
            w[i] = mixed[i] - config.step * g;
            diverged |= !(w[i].is_finite() && w[i].abs() <= guard);
        }
        if diverged {
            return Err(SolverError::Divergence(t));
        }
        total_tx += tx_per_round;

        let tf = t as f64;
        let mut bar_sum = 0.0;
        for i in 0..n {
            w_sum[i] += w[i];
            w_bar[i] = w_sum[i] / tf;
            bar_sum += w_bar[i];
        }
        let bar_mean = bar_sum / n as f64;
        let mut consensus = 0.0;
        for i in 0..n {
            let d = w_bar[i] - bar_mean;
            consensus += d * d;
        }
        consensus /= n as f64;
        let fn_err = match f_min {
            Some(m) => aggregate_loss(&ms, p, bar_mean) - m,
            None => f64::NAN,
        };

        let sup_err = match oracle {
            Some(gt) => {
                let stat: &[f64] = match config.stop_stat {
                    StopStatistic::RunningAverage => &w_bar,
                    StopStatistic::RawIterate => &w,
                };
                stat.iter()
                    .map(|&x| (x - gt.theta_k).abs())
                    .fold(0.0, f64::max)
            }
            None => f64::NAN,
        };
        let entered = oracle.is_some_and(|gt| sup_err < gt.delta / 2.0);
        if entered && first_entry.is_none() {
            first_entry = Some(t);
        }
        let stopping = config.stop_rule == StopRule::OracleInterval && entered;
        if t.is_multiple_of(config.record_stride) || stopping || t == config.max_iters {
            records.push(IterRecord {
                iter: t,
                sup_err,
                fn_err,
                consensus,
                tx_scalars: tx_per_round,
            });
        }
        if stopping {
            break;
        }
    }

    Ok(Trajectory {
        records,
        iterations: t,
        converged: first_entry.is_some(),
        iters_to_interval: first_entry,
        tx_per_round,
        total_tx,
        final_iterates: w,
        final_running_avg: w_bar,
        bound_check: None,
    })
}
