//! Benchmarks for the per-round solver cost, mixing-matrix construction,
//! and the smoothed-loss evaluators.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use topkq_core::harness::seed_fanout;
use topkq_core::scoremodel::{ground_truth, select_p, LocalDataset, ScoreMultiset};
use topkq_core::smoothing::{Kernel, Smoother};
use topkq_core::solvers::{extra_run, stopk_run, ExtraConfig, StopRule, StopStatistic};
use topkq_core::topology::{gen_erdos_renyi, mixing_matrix, MixingTopology};

fn instance(n: usize) -> (MixingTopology, Vec<LocalDataset>, ScoreMultiset) {
    let g = gen_erdos_renyi(n, 5 * n, seed_fanout(9, n as u64)).unwrap();
    let top = mixing_matrix(&g).unwrap();
    let values: Vec<f64> = (0..n)
        .map(|i| ((i * 37 + 11) % 101) as f64 / 10.0 - 5.0)
        .collect();
    let ds: Vec<LocalDataset> = values
        .iter()
        .enumerate()
        .map(|(i, &s)| LocalDataset::new(i, vec![s]).unwrap())
        .collect();
    (top, ds, ScoreMultiset::new(values).unwrap())
}

fn bench_rounds(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver_rounds");
    for &n in &[100usize, 400] {
        let (top, ds, ms) = instance(n);
        let k = n / 10;
        let gt = ground_truth(&ms, k).unwrap();
        let p = select_p(n, k).unwrap();
        let sm = Smoother::convolution(p, 0.05, Kernel::uniform(1.0).unwrap()).unwrap();
        let cfg = ExtraConfig {
            alpha: 0.05,
            beta: 20.0,
            max_iters: 200,
            stop_rule: StopRule::FixedBudget,
            stop_stat: StopStatistic::RunningAverage,
            record_stride: 200,
        };
        group.bench_with_input(BenchmarkId::new("primal_dual_200_rounds", n), &n, |b, _| {
            b.iter(|| extra_run(&top, &sm, &ds, &cfg, Some(&gt)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("list_merge_full", n), &n, |b, _| {
            b.iter(|| stopk_run(top.graph(), &ds, k).unwrap())
        });
    }
    group.finish();
}

fn bench_mixing(c: &mut Criterion) {
    let mut group = c.benchmark_group("mixing_matrix");
    for &n in &[100usize, 400] {
        let g = gen_erdos_renyi(n, 5 * n, 17).unwrap();
        group.bench_with_input(BenchmarkId::new("build", n), &n, |b, _| {
            b.iter(|| mixing_matrix(black_box(&g)).unwrap())
        });
    }
    group.finish();
}

fn bench_smoothers(c: &mut Criterion) {
    let scores: Vec<f64> = (0..1000).map(|i| (i % 97) as f64 / 7.0).collect();
    let p = 0.9;
    let nest = Smoother::nesterov(p, 0.05).unwrap();
    let conv = Smoother::convolution(p, 0.05, Kernel::uniform(1.0).unwrap()).unwrap();
    let mut group = c.benchmark_group("smoothed_objective_1000_scores");
    group.bench_function("conjugate", |b| {
        b.iter(|| nest.objective(black_box(&scores), black_box(3.3)))
    });
    group.bench_function("convolution_closed_form", |b| {
        b.iter(|| conv.objective(black_box(&scores), black_box(3.3)))
    });
    group.finish();
}

criterion_group!(benches, bench_rounds, bench_mixing, bench_smoothers);
criterion_main!(benches);
