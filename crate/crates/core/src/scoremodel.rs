//! Score generation, quantization, and the centralized top-k ground truth.
//!
//! Everything in this module is an oracle or a pure scoring rule: the k-th
//! largest score `theta_k`, the minimum gap `Delta`, the tie counts
//! (`m_bar`, `m_under`) and the multiplicity parameter `g_m` are all computed
//! by brute force from the full multiset. The distributed solvers never see
//! these quantities except through explicit oracle-mode stopping rules.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreModelError {
    #[error("score multiset must be non-empty")]
    Empty,
    #[error("score at index {0} is not finite")]
    NonFinite(usize),
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("k = {k} out of range [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("quantile p = {0} outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("p = {p} violates Lemma-1 admissibility for N = {n}, k = {k}")]
    InadmissibleQuantile { p: f64, n: usize, k: usize },
    #[error("N*p is an integer; the pinball minimizer is not unique")]
    AmbiguousMinimizer,
    #[error("all scores identical; minimum gap Delta is undefined")]
    GapUndefined,
    #[error("local dataset for agent {0} is empty")]
    EmptyDataset(usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScoreModelError>;

/// The networked collection of scores, before partitioning across agents.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMultiset {
    values: Vec<f64>,
}

impl ScoreMultiset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ScoreModelError::Empty);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ScoreModelError::NonFinite(i));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rounds every score to the nearest multiple of `delta`.
    pub fn quantized(&self, delta: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&z| quantize(z, delta))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    /// One decimal score per line.
    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t.parse().map_err(|e| ScoreModelError::Parse {
                line: i + 1,
                msg: format!("{e}"),
            })?;
            values.push(v);
        }
        Self::new(values)
    }
}

/// The scores held by one agent. Every agent holds at least one score.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    agent_id: usize,
    scores: Vec<f64>,
}

impl LocalDataset {
    pub fn new(agent_id: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(ScoreModelError::EmptyDataset(agent_id));
        }
        Ok(Self { agent_id, scores })
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Writes a partition as CSV rows `agent_id,score_index`.
pub fn write_partition<W: Write>(assignment: &[Vec<usize>], mut w: W) -> Result<()> {
    writeln!(w, "agent_id,score_index")?;
    for (agent, idxs) in assignment.iter().enumerate() {
        for &i in idxs {
            writeln!(w, "{agent},{i}")?;
        }
    }
    Ok(())
}

/// Reads an `agent_id,score_index` CSV and materializes per-agent datasets.
///
/// Every score index must be assigned exactly once and every agent id in
/// `0..=max_id` must hold at least one score.
pub fn read_partition<R: BufRead>(scores: &ScoreMultiset, r: R) -> Result<Vec<LocalDataset>> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t == "agent_id,score_index" {
            continue;
        }
        let mut it = t.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| ScoreModelError::Parse {
                line: lineno + 1,
                msg: "expected agent_id,score_index".into(),
            })?
            .trim()
            .parse()
            .map_err(|e| ScoreModelError::Parse {
                line: lineno + 1,
                msg: format!("{e}"),
            })
        };
        let agent = parse(it.next())?;
        let idx = parse(it.next())?;
        pairs.push((agent, idx));
    }
    if pairs.is_empty() {
        return Err(ScoreModelError::InvalidPartition("empty partition".into()));
    }
    let n_agents = pairs.iter().map(|&(a, _)| a).max().unwrap() + 1;
    let mut seen = vec![false; scores.len()];
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_agents];
    for (agent, idx) in pairs {
        if idx >= scores.len() {
            return Err(ScoreModelError::InvalidPartition(format!(
                "score index {idx} out of range"
            )));
        }
        if seen[idx] {
            return Err(ScoreModelError::InvalidPartition(format!(
                "score index {idx} assigned twice"
            )));
        }
        seen[idx] = true;
        buckets[agent].push(scores.values()[idx]);
    }
    if !seen.iter().all(|&s| s) {
        return Err(ScoreModelError::InvalidPartition(
            "not every score index assigned".into(),
        ));
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(a, b)| LocalDataset::new(a, b))
        .collect()
}

/// Admissible quantile level for recovering the k-th largest of N scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSpec {
    pub n_total: usize,
    pub k: usize,
    pub p: f64,
}

impl QuantileSpec {
    pub fn new(n_total: usize, k: usize, p: f64) -> Result<Self> {
        if k < 1 || k > n_total {
            return Err(ScoreModelError::KOutOfRange { k, n: n_total });
        }
        let lo = (n_total - k) as f64 / n_total as f64;
        let hi = (n_total - k + 1) as f64 / n_total as f64;
        if !(p > lo && p < hi) {
            return Err(ScoreModelError::InadmissibleQuantile { p, n: n_total, k });
        }
        let np = n_total as f64 * p;
        if (np - np.round()).abs() < 1e-9 {
            return Err(ScoreModelError::AmbiguousMinimizer);
        }
        Ok(Self { n_total, k, p })
    }

    /// The midpoint choice `p = (N - k)/N + 1/(2N)` from `select_p`.
    pub fn midpoint(n_total: usize, k: usize) -> Result<Self> {
        let p = select_p(n_total, k)?;
        Self::new(n_total, k, p)
    }
}

/// Centralized ground truth for the top-k selection instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopKGroundTruth {
    /// k-th largest score.
    pub theta_k: f64,
    /// Minimum gap: smallest |s_i - theta_k| over scores not equal to theta_k.
    pub delta: f64,
    /// Number of scores equal to theta_k.
    pub m: usize,
    /// Ties at rank <= k.
    pub m_bar: usize,
    /// Ties at rank > k.
    pub m_under: usize,
    /// min { m_bar - 1/2, m_under + 1/2 }.
    pub g_m: f64,
    /// Open interval (theta_k - delta/2, theta_k + delta/2); any point inside
    /// yields a correct threshold.
    pub solution_interval: (f64, f64),
    /// Open interval (theta_k - delta, theta_k); any threshold inside
    /// separates top-k holders from the rest.
    pub threshold_interval: (f64, f64),
}

impl TopKGroundTruth {
    pub fn contains_estimate(&self, x: f64) -> bool {
        x > self.solution_interval.0 && x < self.solution_interval.1
    }

    pub fn contains_threshold(&self, t: f64) -> bool {
        t > self.threshold_interval.0 && t < self.threshold_interval.1
    }
}

/// Linear-model informativeness score `||a||^2 / sigma^2`.
pub fn score_linear(a: &[f64], sigma: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(ScoreModelError::Empty);
    }
    if !(sigma > 0.0) {
        return Err(ScoreModelError::NonPositiveSigma(sigma));
    }
    let sq: f64 = a.iter().map(|x| x * x).sum();
    Ok(sq / (sigma * sigma))
}

/// Quadratic-model informativeness score `Tr(A P A^T) + ||b||^2`.
pub fn score_quadratic(a: &DMatrix<f64>, b: &DVector<f64>, p_cov: &DMatrix<f64>) -> Result<f64> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(ScoreModelError::DimensionMismatch(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if p_cov.nrows() != m || p_cov.ncols() != m {
        return Err(ScoreModelError::DimensionMismatch(format!(
            "P must be {m}x{m}, got {}x{}",
            p_cov.nrows(),
            p_cov.ncols()
        )));
    }
    if b.len() != m {
        return Err(ScoreModelError::DimensionMismatch(format!(
            "b must have length {m}, got {}",
            b.len()
        )));
    }
    let trace = (a * p_cov * a.transpose()).trace();
    Ok(trace + b.norm_squared())
}

/// Noise-weighted variant `(Tr(A P A^T) + ||b||^2) / sigma^2`.
pub fn score_quadratic_weighted(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    p_cov: &DMatrix<f64>,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(ScoreModelError::NonPositiveSigma(sigma));
    }
    Ok(score_quadratic(a, b, p_cov)? / (sigma * sigma))
}

/// Rounds `z` to the nearest multiple of `delta`, ties away from zero.
pub fn quantize(z: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(ScoreModelError::NonPositiveDelta(delta));
    }
    Ok((z / delta).round() * delta)
}

/// Quantile level `p = (N - k)/N + 1/(2N)`, the midpoint that makes the
/// one-sided derivatives at theta_k come out as half-integers.
pub fn select_p(n_total: usize, k: usize) -> Result<f64> {
    if k < 1 || k > n_total {
        return Err(ScoreModelError::KOutOfRange { k, n: n_total });
    }
    Ok(((n_total - k) as f64 + 0.5) / n_total as f64)
}

/// Exact ground truth by centralized sort.
pub fn ground_truth(scores: &ScoreMultiset, k: usize) -> Result<TopKGroundTruth> {
    let n = scores.len();
    if k < 1 || k > n {
        return Err(ScoreModelError::KOutOfRange { k, n });
    }
    let mut sorted = scores.values().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap()); // descending
    let theta_k = sorted[k - 1];
    let m_bar = sorted[..k].iter().filter(|&&v| v == theta_k).count();
    let m_under = sorted[k..].iter().filter(|&&v| v == theta_k).count();
    let m = m_bar + m_under;
    let delta = sorted
        .iter()
        .filter(|&&v| v != theta_k)
        .map(|&v| (v - theta_k).abs())
        .fold(f64::INFINITY, f64::min);
    if !delta.is_finite() {
        return Err(ScoreModelError::GapUndefined);
    }
    let g_m = (m_bar as f64 - 0.5).min(m_under as f64 + 0.5);
    Ok(TopKGroundTruth {
        theta_k,
        delta,
        m,
        m_bar,
        m_under,
        g_m,
        solution_interval: (theta_k - delta / 2.0, theta_k + delta / 2.0),
        threshold_interval: (theta_k - delta, theta_k),
    })
}

/// Pinball (check) loss `rho_p(x)`.
#[inline]
pub fn pinball(x: f64, p: f64) -> f64 {
    if x >= 0.0 {
        p * x
    } else {
        -(1.0 - p) * x
    }
}

/// Aggregate pinball objective `f(x) = sum_i rho_p(s_i - x)`.
pub fn aggregate_loss(scores: &ScoreMultiset, p: f64, x: f64) -> f64 {
    scores.values().iter().map(|&s| pinball(s - x, p)).sum()
}

/// Minimizer of the aggregate pinball loss, found by evaluating at every
/// distinct score. The objective is piecewise linear with kinks at the
/// scores, so the argmin is always a score value.
pub fn brute_force_minimizer(scores: &ScoreMultiset, p: f64) -> Result<f64> {
    let n = scores.len() as f64;
    let np = n * p;
    if (np - np.round()).abs() < 1e-9 {
        return Err(ScoreModelError::AmbiguousMinimizer);
    }
    let mut distinct = scores.values().to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut best = distinct[0];
    let mut best_val = aggregate_loss(scores, p, best);
    for &x in &distinct[1..] {
        let v = aggregate_loss(scores, p, x);
        if v < best_val {
            best_val = v;
            best = x;
        }
    }
    Ok(best)
}

/// Smallest score whose empirical CDF weight reaches `p`.
pub fn sample_quantile(scores: &ScoreMultiset, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ScoreModelError::QuantileOutOfRange(p));
    }
    let mut sorted = scores.values().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    for (i, &x) in sorted.iter().enumerate() {
        if (i + 1) as f64 / n >= p {
            return Ok(x);
        }
    }
    Ok(*sorted.last().unwrap())
}

/// Threshold `T = s_est - Delta/2`; lands in the threshold interval whenever
/// `s_est` lies in the solution interval.
#[inline]
pub fn threshold_from_estimate(s_est: f64, delta: f64) -> f64 {
    s_est - delta / 2.0
}

/// Per-score top-k declaration: strictly above the threshold.
pub fn declare_topk(local: &LocalDataset, threshold: f64) -> Vec<bool> {
    local.scores().iter().map(|&s| s > threshold).collect()
}
