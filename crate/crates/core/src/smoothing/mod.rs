//! Smooth approximations of the aggregate pinball objective.
//!
//! Two families: conjugate (max-form) smoothing, which approximates the raw
//! objective from below, and convolution smoothing against a kernel, which
//! approximates it from above. Both come with Lipschitz/smoothness constants
//! and an admissible upper bound on the smoothing parameter that keeps the
//! uniform approximation error within `g_m * delta / 8`.

mod convolution;
mod kernel;
mod nesterov;

pub use convolution::{conv_constants, conv_hmax, ConvolutionSmoother, QUADRATURE_TOL};
pub use kernel::{adaptive_simpson, integrate_piecewise, Kernel, Result, SmoothingError};
pub use nesterov::{nesterov_constants, nesterov_hmax, NesterovSmoother};

use crate::scoremodel::LocalDataset;

/// Lipschitz constant, gradient-Lipschitz constant, and uniform
/// approximation-error bound of an aggregate smoothed objective.
/// Per-agent smoothness is `m_h / n` when each agent holds one score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub l_h: f64,
    pub m_h: f64,
    pub u_h: f64,
}

/// A smoothed per-score pinball loss, dispatched by family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    Nesterov(NesterovSmoother),
    Convolution(ConvolutionSmoother),
}

impl Smoother {
    pub fn nesterov(p: f64, h: f64) -> Result<Self> {
        Ok(Smoother::Nesterov(NesterovSmoother::new(p, h)?))
    }

    pub fn convolution(p: f64, h: f64, kernel: Kernel) -> Result<Self> {
        Ok(Smoother::Convolution(ConvolutionSmoother::new(p, h, kernel)?))
    }

    pub fn p(&self) -> f64 {
        match self {
            Smoother::Nesterov(s) => s.p(),
            Smoother::Convolution(s) => s.p(),
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Smoother::Nesterov(s) => s.h(),
            Smoother::Convolution(s) => s.h(),
        }
    }

    /// Smoothed loss of a single score at residual `u = score - x`.
    #[inline]
    pub fn loss(&self, u: f64) -> f64 {
        match self {
            Smoother::Nesterov(s) => s.value(u),
            // closed form where available; the quadrature tolerance makes the
            // generic path unusable inside solver loops anyway
            Smoother::Convolution(s) => s
                .value(u)
                .expect("quadrature failure evaluating smoothed loss"),
        }
    }

    /// Gradient with respect to `x` of the smoothed loss of one `score`.
    #[inline]
    pub fn grad_x(&self, score: f64, x: f64) -> f64 {
        match self {
            Smoother::Nesterov(s) => -s.grad(score - x),
            Smoother::Convolution(s) => s.grad_x(score, x),
        }
    }

    /// Aggregate smoothed objective over a slice of scores.
    pub fn objective(&self, scores: &[f64], x: f64) -> f64 {
        scores.iter().map(|&s| self.loss(s - x)).sum()
    }

    /// Aggregate smoothed gradient (in `x`) over a slice of scores.
    pub fn gradient(&self, scores: &[f64], x: f64) -> f64 {
        scores.iter().map(|&s| self.grad_x(s, x)).sum()
    }

    /// Constants for the aggregate objective over `n` scores.
    pub fn constants(&self, n: usize) -> SmoothnessConstants {
        match self {
            Smoother::Nesterov(s) => nesterov_constants(n, s.p(), s.h()),
            Smoother::Convolution(s) => conv_constants(n, s.p(), s.h(), &s.kernel()),
        }
    }

    /// Half-width beyond the score range where the aggregate gradient is
    /// guaranteed saturated; used to bracket the smoothed minimizer.
    pub fn bracket_halfwidth(&self) -> f64 {
        match self {
            Smoother::Nesterov(s) => s.h(),
            Smoother::Convolution(s) => s.h() * s.kernel().effective_cutoff().max(1.0),
        }
    }
}

/// Monomorphizable view of a smoother for solver inner loops: per-agent
/// gradient and aggregate loss without enum dispatch per score.
pub trait LocalModel {
    fn grad_sum(&self, scores: &[f64], x: f64) -> f64;
    fn loss_sum(&self, scores: &[f64], x: f64) -> f64;
}

/// Conjugate smoothing with the branch constants hoisted.
#[derive(Clone, Copy)]
pub struct NesterovModel {
    p: f64,
    inv_h: f64,
    hi: f64,
    lo: f64,
    half_h_p2: f64,
    half_h_q2: f64,
}

impl NesterovModel {
    pub fn new(s: &NesterovSmoother) -> Self {
        let (p, h) = (s.p(), s.h());
        Self {
            p,
            inv_h: 1.0 / h,
            hi: h * p,
            lo: h * (p - 1.0),
            half_h_p2: 0.5 * h * p * p,
            half_h_q2: 0.5 * h * (p - 1.0) * (p - 1.0),
        }
    }
}

impl LocalModel for NesterovModel {
    #[inline]
    fn grad_sum(&self, scores: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for &s in scores {
            let u = s - x;
            acc -= if u > self.hi {
                self.p
            } else if u > self.lo {
                u * self.inv_h
            } else {
                self.p - 1.0
            };
        }
        acc
    }

    #[inline]
    fn loss_sum(&self, scores: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for &s in scores {
            let u = s - x;
            acc += if u > self.hi {
                self.p * u - self.half_h_p2
            } else if u > self.lo {
                0.5 * u * u * self.inv_h
            } else {
                (self.p - 1.0) * u - self.half_h_q2
            };
        }
        acc
    }
}

/// Uniform-kernel convolution smoothing in closed form, constants hoisted.
#[derive(Clone, Copy)]
pub struct UniformConvModel {
    p: f64,
    h_support: f64,
    inv_2h_support: f64,
    quarter_inv_h: f64,
}

impl UniformConvModel {
    /// Valid for any uniform half-width: scaling a width-w kernel by h is
    /// the unit kernel scaled by w*h.
    pub fn new(s: &ConvolutionSmoother, half_width: f64) -> Self {
        let hs = s.h() * half_width;
        Self {
            p: s.p(),
            h_support: hs,
            inv_2h_support: 1.0 / (2.0 * hs),
            quarter_inv_h: 1.0 / (4.0 * hs),
        }
    }
}

impl LocalModel for UniformConvModel {
    #[inline]
    fn grad_sum(&self, scores: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for &s in scores {
            let cdf = ((x - s + self.h_support) * self.inv_2h_support).clamp(0.0, 1.0);
            acc += cdf - self.p;
        }
        acc
    }

    #[inline]
    fn loss_sum(&self, scores: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for &s in scores {
            let u = s - x;
            acc += if u > self.h_support {
                self.p * u
            } else if u > -self.h_support {
                let d = u - self.h_support;
                d * d * self.quarter_inv_h + self.p * u
            } else {
                (self.p - 1.0) * u
            };
        }
        acc
    }
}

/// Fallback that dispatches through the smoother enum (quadrature kernels).
pub struct DynModel<'a>(pub &'a Smoother);

impl LocalModel for DynModel<'_> {
    fn grad_sum(&self, scores: &[f64], x: f64) -> f64 {
        self.0.gradient(scores, x)
    }

    fn loss_sum(&self, scores: &[f64], x: f64) -> f64 {
        self.0.objective(scores, x)
    }
}

/// Smoothed local objective of one agent: the sum over its scores.
pub fn agent_objective(smoother: &Smoother, local: &LocalDataset, x: f64) -> f64 {
    smoother.objective(local.scores(), x)
}

/// Gradient of the smoothed local objective; magnitude is at most
/// `n_i * max{p, 1-p}`.
pub fn agent_gradient(smoother: &Smoother, local: &LocalDataset, x: f64) -> f64 {
    smoother.gradient(local.scores(), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoremodel::{aggregate_loss, ScoreMultiset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agent_ops_reduce_and_scale() {
        let sm = Smoother::nesterov(0.65, 0.3).unwrap();
        let one = LocalDataset::new(0, vec![2.0]).unwrap();
        let x = 1.7;
        assert_eq!(agent_objective(&sm, &one, x), sm.loss(2.0 - x));
        assert_eq!(agent_gradient(&sm, &one, x), sm.grad_x(2.0, x));

        let two = LocalDataset::new(1, vec![2.0, 2.0]).unwrap();
        assert_eq!(agent_objective(&sm, &two, x), 2.0 * sm.loss(2.0 - x));
        assert_eq!(agent_gradient(&sm, &two, x), 2.0 * sm.grad_x(2.0, x));
    }

    #[test]
    fn agent_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let local = LocalDataset::new(0, scores).unwrap();
        for sm in [
            Smoother::nesterov(0.65, 0.4).unwrap(),
            Smoother::convolution(0.65, 0.4, Kernel::uniform(1.0).unwrap()).unwrap(),
        ] {
            for _ in 0..40 {
                let x = rng.gen_range(-4.0..4.0);
                let d = 1e-5;
                let fd =
                    (agent_objective(&sm, &local, x + d) - agent_objective(&sm, &local, x - d))
                        / (2.0 * d);
                let g = agent_gradient(&sm, &local, x);
                assert!((g - fd).abs() < 1e-6 * (1.0 + g.abs()), "x={x} g={g} fd={fd}");
                assert!(g.abs() <= 5.0 * 0.65 + 1e-12);
            }
        }
    }

    #[test]
    fn models_match_enum_dispatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..12).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let nest = NesterovSmoother::new(0.35, 0.6).unwrap();
        let sm = Smoother::Nesterov(nest);
        let m = NesterovModel::new(&nest);
        for _ in 0..200 {
            let x = rng.gen_range(-6.0..6.0);
            assert!((m.grad_sum(&scores, x) - sm.gradient(&scores, x)).abs() < 1e-12);
            assert!((m.loss_sum(&scores, x) - sm.objective(&scores, x)).abs() < 1e-12);
        }
        for w in [1.0, 0.5, 2.0] {
            let conv = ConvolutionSmoother::new(0.65, 0.4, Kernel::uniform(w).unwrap()).unwrap();
            let sm = Smoother::Convolution(conv);
            let m = UniformConvModel::new(&conv, w);
            for _ in 0..200 {
                let x = rng.gen_range(-6.0..6.0);
                assert!((m.grad_sum(&scores, x) - sm.gradient(&scores, x)).abs() < 1e-12);
                // enum path for non-unit widths goes through quadrature
                assert!((m.loss_sum(&scores, x) - sm.objective(&scores, x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sandwich_directions() {
        // below for the conjugate form, above for the convolution form
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(3..12);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let ms = ScoreMultiset::new(vals).unwrap();
            let p = 0.65;
            let h = rng.gen_range(0.05..1.5);
            let nest = Smoother::nesterov(p, h).unwrap();
            let conv = Smoother::convolution(p, h, Kernel::uniform(1.0).unwrap()).unwrap();
            let cn = nest.constants(n);
            let cc = conv.constants(n);
            let (lo, hi) = (ms.min() - 3.0 * h, ms.max() + 3.0 * h);
            for i in 0..=300 {
                let x = lo + (hi - lo) * i as f64 / 300.0;
                let f = aggregate_loss(&ms, p, x);
                let fn_ = nest.objective(ms.values(), x);
                let fc = conv.objective(ms.values(), x);
                assert!(f - fn_ >= -1e-10, "nesterov must lower-bound f");
                assert!(f - fn_ <= cn.u_h + 1e-10);
                assert!(fc - f >= -1e-10, "convolution must upper-bound f");
                assert!(fc - f <= cc.u_h + 1e-10);
            }
        }
    }

    #[test]
    fn convolution_gap_shrinks_with_h() {
        // sup-grid |f_conv - f| is non-increasing as h drops through 1, 0.5, 0.1
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n = rng.gen_range(4..12);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let ms = ScoreMultiset::new(vals).unwrap();
            let p = 0.65;
            let mut prev = f64::INFINITY;
            for h in [1.0, 0.5, 0.1] {
                let conv = Smoother::convolution(p, h, Kernel::uniform(1.0).unwrap()).unwrap();
                let (lo, hi) = (ms.min() - 3.0, ms.max() + 3.0);
                let mut sup: f64 = 0.0;
                for i in 0..=400 {
                    let x = lo + (hi - lo) * i as f64 / 400.0;
                    sup = sup.max((conv.objective(ms.values(), x) - aggregate_loss(&ms, p, x)).abs());
                }
                assert!(sup <= prev + 1e-12, "gap grew: {sup} > {prev} at h={h}");
                prev = sup;
            }
        }
    }

    #[test]
    fn lipschitz_and_smoothness_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let vals: Vec<f64> = (0..8).map(|_| rng.gen_range(-4.0..4.0)).collect();
        for sm in [
            Smoother::nesterov(0.3, 0.25).unwrap(),
            Smoother::convolution(0.3, 0.25, Kernel::Triangular).unwrap(),
        ] {
            let c = sm.constants(vals.len());
            for _ in 0..200 {
                let x = rng.gen_range(-6.0..6.0);
                let y = rng.gen_range(-6.0..6.0);
                let df = (sm.objective(&vals, x) - sm.objective(&vals, y)).abs();
                assert!(df <= c.l_h * (x - y).abs() + 1e-9);
                let dg = (sm.gradient(&vals, x) - sm.gradient(&vals, y)).abs();
                assert!(dg <= c.m_h * (x - y).abs() + 1e-9);
            }
        }
    }
}
