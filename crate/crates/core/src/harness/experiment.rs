//! Config-driven seeded experiment runner.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::scoremodel::{
    declare_topk, ground_truth, select_p, threshold_from_estimate, LocalDataset, ScoreMultiset,
    TopKGroundTruth,
};
use crate::smoothing::{conv_hmax, nesterov_hmax, Kernel, Smoother};
use crate::solvers::{
    comm_cost, dgd_run, extra_default_steps, extra_run, stopk_run, DgdConfig, ExtraConfig,
    StopRule, StopStatistic, Trajectory,
};
use crate::topology::{gen_erdos_renyi, gen_ring, mixing_matrix, MixingTopology};

use super::config::{
    ExperimentConfig, ExperimentKind, GraphKind, HPolicy, KernelKind, SmoothingMethod, SolverKind,
    StatKind, StepPolicy,
};
use super::seeding::seed_fanout;
use super::HarnessError;

/// Fully materialized instance for one trial.
pub struct TrialInstance {
    pub scores: ScoreMultiset,
    pub datasets: Vec<LocalDataset>,
    pub topology: MixingTopology,
    pub gt: TopKGroundTruth,
    pub p: f64,
    pub smoother: Smoother,
    pub k: usize,
}

/// Per-solver outcome of a trial.
#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub solver: SolverKind,
    /// Iterations (or rounds) to reach the solution interval; None if the
    /// budget ran out first.
    pub iterations: Option<u64>,
    pub converged: bool,
    pub comm_cost: u64,
    /// Number of scores declared top-k across all agents.
    pub declared_topk: usize,
    /// Agents declaring at least one of their scores.
    pub declared_holders: Vec<usize>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub sweep: f64,
    pub trial: usize,
    pub seed: u64,
    pub outcomes: Vec<SolverOutcome>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub sweep_points: Vec<f64>,
    pub trials: Vec<TrialResult>,
    pub trials_csv: String,
    pub summary_csv: String,
    /// Long-format per-iteration curves of trial 0 (convergence kind only).
    pub curves_csv: Option<String>,
    pub all_converged: bool,
}

/// Parameters of one sweep point, resolved from the config.
#[derive(Debug, Clone, Copy)]
struct PointParams {
    sweep: f64,
    n: usize,
    n_scores: usize,
    k: usize,
    delta: f64,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<PointParams> {
    let base = PointParams {
        sweep: cfg.quantile.k as f64,
        n: cfg.network.n,
        n_scores: cfg.scores.total,
        k: cfg.quantile.k,
        delta: cfg.scores.delta,
    };
    match cfg.experiment.kind {
        ExperimentKind::Convergence => vec![base],
        ExperimentKind::VsK | ExperimentKind::CommCost => cfg
            .quantile
            .k_sweep
            .iter()
            .map(|&k| PointParams {
                sweep: k as f64,
                k,
                ..base
            })
            .collect(),
        ExperimentKind::VsDelta => cfg
            .quantile
            .delta_sweep
            .iter()
            .map(|&d| PointParams {
                sweep: d,
                delta: d,
                ..base
            })
            .collect(),
        ExperimentKind::VsN => cfg
            .quantile
            .n_sweep
            .iter()
            .map(|&n| {
                let k = ((cfg.quantile.k_fraction * n as f64).round() as usize).clamp(1, n);
                PointParams {
                    sweep: n as f64,
                    n,
                    n_scores: n,
                    k,
                    delta: cfg.scores.delta,
                }
            })
            .collect(),
    }
}

fn build_kernel(cfg: &ExperimentConfig) -> Result<Kernel, HarnessError> {
    Ok(match cfg.smoothing.kernel {
        KernelKind::Uniform => Kernel::uniform(cfg.smoothing.kernel_half_width)?,
        KernelKind::Triangular => Kernel::Triangular,
        KernelKind::Epanechnikov => Kernel::Epanechnikov,
    })
}

/// Builds the deterministic instance for (config, sweep point, trial seed).
pub fn build_instance(
    cfg: &ExperimentConfig,
    point_k: usize,
    point_n: usize,
    point_n_scores: usize,
    point_delta: f64,
    trial_seed: u64,
) -> Result<TrialInstance, HarnessError> {
    let graph_seed = seed_fanout(trial_seed, 0);
    let score_seed = seed_fanout(trial_seed, 1);
    let partition_seed = seed_fanout(trial_seed, 2);

    // scores: centered Gaussians, quantized to the resolution
    let normal = Normal::new(0.0, cfg.scores.variance.sqrt())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(score_seed);
    let raw: Vec<f64> = (0..point_n_scores).map(|_| normal.sample(&mut rng)).collect();
    let scores = ScoreMultiset::new(raw)?.quantized(point_delta)?;
    let gt = ground_truth(&scores, point_k)?;
    let p = select_p(point_n_scores, point_k)?;

    // graph
    let graph = match cfg.network.graph {
        GraphKind::Ring => gen_ring(point_n)?,
        GraphKind::ErdosRenyi => {
            let m = (cfg.network.edge_multiplier * point_n as f64).round() as usize;
            gen_erdos_renyi(point_n, m, graph_seed)?
        }
    };
    let topology = mixing_matrix(&graph)?;

    // partition: identity when one score per agent, shuffled round-robin otherwise
    let datasets: Vec<LocalDataset> = if point_n_scores == point_n {
        scores
            .values()
            .iter()
            .enumerate()
            .map(|(i, &s)| LocalDataset::new(i, vec![s]))
            .collect::<Result<_, _>>()?
    } else {
        let mut idx: Vec<usize> = (0..point_n_scores).collect();
        let mut prng = ChaCha8Rng::seed_from_u64(partition_seed);
        idx.shuffle(&mut prng);
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); point_n];
        for (j, &i) in idx.iter().enumerate() {
            buckets[j % point_n].push(scores.values()[i]);
        }
        buckets
            .into_iter()
            .enumerate()
            .map(|(a, b)| LocalDataset::new(a, b))
            .collect::<Result<_, _>>()?
    };

    // smoothing parameter per policy
    let kernel = build_kernel(cfg)?;
    let h = match cfg.smoothing.h_policy {
        HPolicy::Hmax => match cfg.smoothing.method {
            SmoothingMethod::Nesterov => nesterov_hmax(point_n_scores, p, gt.g_m, gt.delta),
            SmoothingMethod::Convolution => {
                conv_hmax(point_n_scores, p, gt.g_m, gt.delta, &kernel)
            }
        },
        HPolicy::Manual => cfg.smoothing.h_value,
        HPolicy::DeltaScaled => cfg.smoothing.h_value * point_delta,
    };
    let smoother = match cfg.smoothing.method {
        SmoothingMethod::Nesterov => Smoother::nesterov(p, h)?,
        SmoothingMethod::Convolution => Smoother::convolution(p, h, kernel)?,
    };

    Ok(TrialInstance {
        scores,
        datasets,
        topology,
        gt,
        p,
        smoother,
        k: point_k,
    })
}

fn stop_stat(cfg: &ExperimentConfig) -> StopStatistic {
    match cfg.solvers.stop_stat {
        StatKind::RunningAverage => StopStatistic::RunningAverage,
        StatKind::Raw => StopStatistic::RawIterate,
    }
}

/// Declared top-k from per-agent thresholds off the converged statistic.
fn declaration(
    inst: &TrialInstance,
    estimates: &[f64],
) -> (usize, Vec<usize>) {
    let mut count = 0;
    let mut holders = Vec::new();
    for (i, d) in inst.datasets.iter().enumerate() {
        let t = threshold_from_estimate(estimates[i], inst.gt.delta);
        let flags = declare_topk(d, t);
        let c = flags.iter().filter(|&&f| f).count();
        if c > 0 {
            holders.push(i);
        }
        count += c;
    }
    (count, holders)
}

fn run_extra(cfg: &ExperimentConfig, inst: &TrialInstance) -> Result<Trajectory, HarnessError> {
    let (alpha, beta) = match cfg.solvers.steps {
        StepPolicy::Default => {
            let c = inst.smoother.constants(inst.scores.len());
            extra_default_steps(c.m_h, inst.topology.node_count(), inst.topology.sigma2())?
        }
        StepPolicy::Manual => (inst.smoother.h(), 1.0 / inst.smoother.h()),
    };
    let config = ExtraConfig {
        alpha,
        beta,
        max_iters: cfg.solvers.max_iters,
        stop_rule: StopRule::OracleInterval,
        stop_stat: stop_stat(cfg),
        record_stride: cfg.solvers.record_stride,
    };
    Ok(extra_run(
        &inst.topology,
        &inst.smoother,
        &inst.datasets,
        &config,
        Some(&inst.gt),
    )?)
}

fn run_dgd(cfg: &ExperimentConfig, inst: &TrialInstance) -> Result<Trajectory, HarnessError> {
    let config = DgdConfig {
        step: cfg.solvers.dgd_step,
        max_iters: cfg.solvers.max_iters,
        stop_rule: StopRule::OracleInterval,
        stop_stat: stop_stat(cfg),
        record_stride: cfg.solvers.record_stride,
    };
    Ok(dgd_run(
        &inst.topology,
        &inst.datasets,
        inst.p,
        &config,
        Some(&inst.gt),
    )?)
}

fn run_trial(
    cfg: &ExperimentConfig,
    point: PointParams,
    trial: usize,
    keep_curves: bool,
) -> Result<(TrialResult, Vec<(SolverKind, Trajectory)>), HarnessError> {
    let seed = seed_fanout(cfg.experiment.base_seed, trial as u64);
    let inst = build_instance(cfg, point.k, point.n, point.n_scores, point.delta, seed)?;
    let mut outcomes = Vec::new();
    let mut curves = Vec::new();
    for &solver in &cfg.solvers.run {
        let start = Instant::now();
        let outcome = match solver {
            SolverKind::Extra | SolverKind::Dgd => {
                let traj = if solver == SolverKind::Extra {
                    run_extra(cfg, &inst)?
                } else {
                    run_dgd(cfg, &inst)?
                };
                let estimates: &[f64] = match stop_stat(cfg) {
                    StopStatistic::RunningAverage => &traj.final_running_avg,
                    StopStatistic::RawIterate => &traj.final_iterates,
                };
                let (declared, holders) = if traj.converged {
                    declaration(&inst, estimates)
                } else {
                    (0, Vec::new())
                };
                let out = SolverOutcome {
                    solver,
                    iterations: traj.iters_to_interval,
                    converged: traj.converged,
                    comm_cost: comm_cost(&traj),
                    declared_topk: declared,
                    declared_holders: holders,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                };
                if keep_curves {
                    curves.push((solver, traj));
                }
                out
            }
            SolverKind::Stopk => {
                let res = stopk_run(inst.topology.graph(), &inst.datasets, inst.k)?;
                let mut holders = Vec::new();
                let mut declared = 0;
                for (i, d) in inst.datasets.iter().enumerate() {
                    let c = (0..d.scores().len())
                        .filter(|&j| res.is_declared_topk(i, j))
                        .count();
                    if c > 0 {
                        holders.push(i);
                    }
                    declared += c;
                }
                SolverOutcome {
                    solver,
                    iterations: Some(res.rounds),
                    converged: true,
                    comm_cost: comm_cost(&res),
                    declared_topk: declared,
                    declared_holders: holders,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok((
        TrialResult {
            sweep: point.sweep,
            trial,
            seed,
            outcomes,
        },
        curves,
    ))
}

fn timestamp_header() -> String {
    let ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    format!("# generated_at_unix_ms {ms}\n")
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs every trial of every sweep point in a worker pool; results are
/// collected in trial order so output is deterministic regardless of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let points = sweep_points(cfg);
    let keep_curves = cfg.experiment.kind == ExperimentKind::Convergence;

    let mut jobs: Vec<(PointParams, usize)> = Vec::new();
    for &pt in &points {
        for trial in 0..cfg.experiment.trials {
            jobs.push((pt, trial));
        }
    }
    let results: Vec<Result<_, HarnessError>> = jobs
        .par_iter()
        .map(|&(pt, trial)| run_trial(cfg, pt, trial, keep_curves && trial == 0))
        .collect();

    let mut trials = Vec::new();
    let mut curves_csv = None;
    for r in results {
        let (tr, curves) = r?;
        if !curves.is_empty() && curves_csv.is_none() {
            let mut s = timestamp_header();
            s.push_str("solver,iter,sup_err,fn_err,consensus,tx_scalars\n");
            for (solver, traj) in &curves {
                for rec in &traj.records {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        solver.name(),
                        rec.iter,
                        rec.sup_err,
                        rec.fn_err,
                        rec.consensus,
                        rec.tx_scalars
                    ));
                }
            }
            curves_csv = Some(s);
        }
        trials.push(tr);
    }

    // per-trial CSV
    // wall times stay in the in-memory results only, so re-runs of the same
    // config reproduce the files byte-for-byte
    let sweep_col = cfg.experiment.kind.sweep_column();
    let mut trials_csv = timestamp_header();
    trials_csv.push_str(&format!(
        "{sweep_col},trial,seed,solver,iterations,converged,comm_cost,declared_topk\n"
    ));
    for tr in &trials {
        for o in &tr.outcomes {
            trials_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                tr.sweep,
                tr.trial,
                tr.seed,
                o.solver.name(),
                fmt_opt(o.iterations),
                o.converged,
                o.comm_cost,
                o.declared_topk
            ));
        }
    }

    // aggregate CSV: mean/std over converged trials per sweep point
    let mut summary_csv = timestamp_header();
    summary_csv.push_str(&format!(
        "{sweep_col},solver,trials,converged,mean_iters,std_iters,mean_cost\n"
    ));
    for &pt in &points {
        for &solver in &cfg.solvers.run {
            let xs: Vec<&SolverOutcome> = trials
                .iter()
                .filter(|t| t.sweep == pt.sweep)
                .flat_map(|t| t.outcomes.iter().filter(|o| o.solver == solver))
                .collect();
            let conv: Vec<f64> = xs
                .iter()
                .filter(|o| o.converged)
                .filter_map(|o| o.iterations.map(|i| i as f64))
                .collect();
            let mean = if conv.is_empty() {
                f64::NAN
            } else {
                conv.iter().sum::<f64>() / conv.len() as f64
            };
            let std = if conv.len() >= 2 {
                let m = mean;
                (conv.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (conv.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            let mean_cost = if xs.is_empty() {
                f64::NAN
            } else {
                xs.iter().map(|o| o.comm_cost as f64).sum::<f64>() / xs.len() as f64
            };
            summary_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                pt.sweep,
                solver.name(),
                xs.len(),
                conv.len(),
                mean,
                std,
                mean_cost
            ));
        }
    }

    let all_converged = trials
        .iter()
        .all(|t| t.outcomes.iter().all(|o| o.converged));

    Ok(ExperimentOutcome {
        kind: cfg.experiment.kind,
        sweep_points: points.iter().map(|p| p.sweep).collect(),
        trials,
        trials_csv,
        summary_csv,
        curves_csv,
        all_converged,
    })
}

/// Writes the outcome CSVs into a directory: `trials.csv`, `summary.csv`,
/// and `curves.csv` for convergence runs.
pub fn write_outputs(
    outcome: &ExperimentOutcome,
    dir: &std::path::Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trials.csv"), &outcome.trials_csv)?;
    std::fs::write(dir.join("summary.csv"), &outcome.summary_csv)?;
    if let Some(c) = &outcome.curves_csv {
        std::fs::write(dir.join("curves.csv"), c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[experiment]
kind = "convergence"
trials = 3
base_seed = 9

[network]
graph = "erdos_renyi"
n = 12
edge_multiplier = 3.0

[scores]
total = 12
variance = 10.0
delta = 0.2

[quantile]
k = 3

[smoothing]
method = "convolution"
h_policy = "delta_scaled"
h_value = 0.5

[solvers]
run = ["extra", "dgd", "stopk"]
steps = "manual"
dgd_step = 0.02
max_iters = 400000
"#;

    fn strip_timestamp(s: &str) -> String {
        s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn runs_and_reproduces_byte_identical_csv() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(strip_timestamp(&a.trials_csv), strip_timestamp(&b.trials_csv));
        assert_eq!(strip_timestamp(&a.summary_csv), strip_timestamp(&b.summary_csv));
        assert_eq!(
            a.curves_csv.map(|s| strip_timestamp(&s)),
            b.curves_csv.map(|s| strip_timestamp(&s))
        );
        assert!(a.all_converged, "small manual-step instances should converge");
        assert_eq!(a.trials.len(), 3);
        assert_eq!(a.trials[0].outcomes.len(), 3);
    }

    #[test]
    fn declared_holders_cover_strict_winners() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let out = run_experiment(&cfg).unwrap();
        for tr in &out.trials {
            let inst = build_instance(&cfg, 3, 12, 12, 0.2, tr.seed).unwrap();
            let strict_holders: Vec<usize> = inst
                .datasets
                .iter()
                .enumerate()
                .filter(|(_, d)| d.scores().iter().any(|&s| s > inst.gt.theta_k))
                .map(|(i, _)| i)
                .collect();
            for o in &tr.outcomes {
                if o.converged {
                    assert!(o.declared_topk >= 3usize.min(inst.scores.len()));
                    for h in &strict_holders {
                        assert!(
                            o.declared_holders.contains(h),
                            "{:?} missed strict holder {h}",
                            o.solver
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn multi_score_partition_covers_everything() {
        let text = SMALL
            .replace("total = 12", "total = 40")
            .replace("run = [\"extra\", \"dgd\", \"stopk\"]", "run = [\"stopk\"]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let inst = build_instance(&cfg, 3, 12, 40, 0.2, 1234).unwrap();
        assert_eq!(inst.datasets.len(), 12);
        let mut all: Vec<f64> = inst
            .datasets
            .iter()
            .flat_map(|d| d.scores().to_vec())
            .collect();
        let mut orig = inst.scores.values().to_vec();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, orig);
        for d in &inst.datasets {
            assert!(!d.scores().is_empty());
        }
    }
}
