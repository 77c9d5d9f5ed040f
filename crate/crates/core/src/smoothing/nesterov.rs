//! Conjugate (max-form) smoothing of the pinball loss.
//!
//! The smoothed loss is `max_z { z*x - h/2 z^2 }` over `z` in `[p-1, p]`,
//! which collapses to three closed-form branches. It approximates the raw
//! pinball loss from below, with a uniform gap of at most `h/2 * max{p^2, (1-p)^2}`
//! per score.

use super::kernel::{Result, SmoothingError};
use super::SmoothnessConstants;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NesterovSmoother {
    p: f64,
    h: f64,
}

impl NesterovSmoother {
    pub fn new(p: f64, h: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SmoothingError::QuantileOutOfRange(p));
        }
        if !(h > 0.0) {
            return Err(SmoothingError::NonPositiveH(h));
        }
        Ok(Self { p, h })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Smoothed per-score loss. The breakpoint x = h*p belongs to the
    /// quadratic middle branch; both branches agree there in value and slope.
    pub fn value(&self, x: f64) -> f64 {
        let (p, h) = (self.p, self.h);
        if x > h * p {
            p * x - 0.5 * h * p * p
        } else if x > h * (p - 1.0) {
            x * x / (2.0 * h)
        } else {
            (p - 1.0) * x - 0.5 * h * (p - 1.0) * (p - 1.0)
        }
    }

    /// Derivative of `value` in its own argument; bounded in [p-1, p].
    pub fn grad(&self, x: f64) -> f64 {
        let (p, h) = (self.p, self.h);
        if x > h * p {
            p
        } else if x > h * (p - 1.0) {
            x / h
        } else {
            p - 1.0
        }
    }
}

/// Constants under which the aggregate Nesterov approximation of `n` scores
/// is Lipschitz, smooth, and uniformly close to the raw objective.
pub fn nesterov_constants(n: usize, p: f64, h: f64) -> SmoothnessConstants {
    let nf = n as f64;
    let r2 = (p * p).max((1.0 - p) * (1.0 - p));
    SmoothnessConstants {
        l_h: nf * p.max(1.0 - p),
        m_h: nf / h,
        u_h: 0.5 * nf * h * r2,
    }
}

/// Largest admissible smoothing parameter: at this `h` the uniform
/// approximation error equals `g_m * delta / 8` exactly.
pub fn nesterov_hmax(n: usize, p: f64, g_m: f64, delta: f64) -> f64 {
    let r2 = (p * p).max((1.0 - p) * (1.0 - p));
    g_m * delta / (4.0 * n as f64 * r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_cases() {
        let s = NesterovSmoother::new(0.65, 1.0).unwrap();
        assert_eq!(s.value(0.0), 0.0);
        // dense z-grid oracle for max_z { z*x - h/2 z^2 } on [p-1, p]
        let oracle = |x: f64, p: f64, h: f64| {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=200_000 {
                let z = (p - 1.0) + i as f64 / 200_000.0;
                best = best.max(z * x - 0.5 * h * z * z);
            }
            best
        };
        let v = s.value(2.0);
        assert!((v - 1.08875).abs() < 1e-12);
        assert!((v - oracle(2.0, 0.65, 1.0)).abs() < 1e-9);
        // boundary x = h*p from both branches
        let hp: f64 = 1.0 * 0.65;
        let first: f64 = 0.65 * hp - 0.5 * 0.65 * 0.65;
        let middle: f64 = hp * hp / 2.0;
        assert!((first - middle).abs() < 1e-15);
        assert!((s.value(hp) - middle).abs() < 1e-15);
    }

    #[test]
    fn grad_cases() {
        let s = NesterovSmoother::new(0.65, 0.5).unwrap();
        assert_eq!(s.grad(0.0), 0.0);
        assert_eq!(s.grad(1.0), 0.65); // x > h*p = 0.325
        // central finite difference oracle
        let fd = (s.value(1.0 + 1e-6) - s.value(1.0 - 1e-6)) / 2e-6;
        assert!((fd - 0.65).abs() < 1e-9);
        // continuity at the lower breakpoint
        let xb = 0.5 * (0.65 - 1.0);
        assert!((s.grad(xb) - (0.65 - 1.0)).abs() < 1e-15);
        assert!((s.grad(xb - 1e-12) - (0.65 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constants_cases() {
        let c = nesterov_constants(1, 0.5, 1.0);
        assert_eq!(c.l_h, 0.5);
        assert_eq!(c.m_h, 1.0);
        assert_eq!(c.u_h, 0.125);
        assert_eq!(nesterov_constants(10, 0.65, 0.2).m_h, 50.0);
        // U_h is linear in h
        let u1 = nesterov_constants(3, 0.3, 0.4).u_h;
        let u2 = nesterov_constants(3, 0.3, 0.8).u_h;
        assert!((u2 - 2.0 * u1).abs() < 1e-15);
    }

    #[test]
    fn hmax_cases() {
        // g_m * delta = 8, n = 1, p = 0.5: 8 / (4 * 0.25) = 8
        assert_eq!(nesterov_hmax(1, 0.5, 2.0, 4.0), 8.0);
        // at hmax, U_h equals g_m*delta/8
        for &(n, p, gm, d) in &[(1usize, 0.5, 2.0, 4.0), (7, 0.65, 0.5, 0.1), (40, 0.9, 1.5, 0.05)]
        {
            let h = nesterov_hmax(n, p, gm, d);
            let u = nesterov_constants(n, p, h).u_h;
            assert!((u - gm * d / 8.0).abs() < 1e-12 * (1.0 + u.abs()));
        }
        // doubling n halves hmax
        let a = nesterov_hmax(5, 0.3, 1.0, 1.0);
        let b = nesterov_hmax(10, 0.3, 1.0, 1.0);
        assert!((a - 2.0 * b).abs() < 1e-15);
    }
}
