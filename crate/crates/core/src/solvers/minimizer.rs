//! Oracle utility: the minimizer of the aggregate smoothed objective.

use crate::smoothing::Smoother;

use super::SolverError;

/// Root of the aggregate smoothed gradient by bisection, to absolute
/// tolerance 1e-12. The gradient is continuous and non-decreasing, strictly
/// negative below `min(s) - c*h` and strictly positive above `max(s) + c*h`,
/// so the root is bracketed and unique for admissible quantile levels.
pub fn smoothed_minimizer(smoother: &Smoother, scores: &[f64]) -> Result<f64, SolverError> {
    if scores.is_empty() {
        return Err(SolverError::InvalidInput("empty score set".into()));
    }
    let pad = smoother.bracket_halfwidth();
    let mut lo = scores.iter().cloned().fold(f64::INFINITY, f64::min) - pad;
    let mut hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad;
    let g_lo = smoother.gradient(scores, lo);
    let g_hi = smoother.gradient(scores, hi);
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(SolverError::BracketingFailure);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if smoother.gradient(scores, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
