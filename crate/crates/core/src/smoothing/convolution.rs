//! Convolution (mollifier) smoothing of the pinball loss.
//!
//! The smoothed per-score loss is `(rho_p * K_h)(x)` with `K_h = K(./h)/h`.
//! It approximates the raw loss from above. The uniform kernel of half-width
//! one has a closed form; every other kernel goes through adaptive quadrature
//! confined to the kernel's effective support.

use crate::scoremodel::pinball;

use super::kernel::{integrate_piecewise, Kernel, Result, SmoothingError};
use super::SmoothnessConstants;

/// Absolute tolerance for the quadrature evaluation path.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionSmoother {
    p: f64,
    h: f64,
    kernel: Kernel,
}

impl ConvolutionSmoother {
    pub fn new(p: f64, h: f64, kernel: Kernel) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SmoothingError::QuantileOutOfRange(p));
        }
        if !(h > 0.0) {
            return Err(SmoothingError::NonPositiveH(h));
        }
        Ok(Self { p, h, kernel })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Smoothed per-score loss `(rho_p * K_h)(x)`.
    ///
    /// Closed form for the unit uniform kernel; quadrature otherwise.
    pub fn value(&self, x: f64) -> Result<f64> {
        if self.kernel == (Kernel::Uniform { half_width: 1.0 }) {
            Ok(self.value_uniform_closed(x))
        } else {
            self.value_quadrature(x)
        }
    }

    /// Closed form for K = 1/2 on |x| <= 1.
    #[inline]
    pub fn value_uniform_closed(&self, x: f64) -> f64 {
        let (p, h) = (self.p, self.h);
        if x > h {
            p * x
        } else if x > -h {
            (x - h) * (x - h) / (4.0 * h) + p * x
        } else {
            (p - 1.0) * x
        }
    }

    /// Generic evaluation of the convolution integral in the rescaled
    /// variable: `int rho_p(x + h u) K(u) du` over the effective support,
    /// split at the kernel kinks and the pinball kink.
    pub fn value_quadrature(&self, x: f64) -> Result<f64> {
        let (p, h) = (self.p, self.h);
        let c = self.kernel.effective_cutoff();
        let mut splits = self.kernel.breakpoints();
        splits.push(-x / h); // pinball kink at x + h*u = 0
        integrate_piecewise(
            &|u| pinball(x + h * u, p) * self.kernel.point_value(u),
            -c,
            c,
            &splits,
            QUADRATURE_TOL,
        )
    }

    /// Gradient with respect to the estimate `x` of the smoothed loss of a
    /// single `score`: `Kcdf((x - score)/h) - p`, bounded in [-p, 1-p].
    #[inline]
    pub fn grad_x(&self, score: f64, x: f64) -> f64 {
        self.kernel.cdf((x - score) / self.h) - self.p
    }
}

/// Constants under which the aggregate convolution approximation of `n`
/// scores satisfies the Lipschitz/smoothness/uniform-error requirements.
pub fn conv_constants(n: usize, p: f64, h: f64, kernel: &Kernel) -> SmoothnessConstants {
    let nf = n as f64;
    let pm = p.max(1.0 - p);
    SmoothnessConstants {
        l_h: nf * pm,
        m_h: nf * kernel.sup_value() / h,
        u_h: nf * h * pm * kernel.abs_moment(),
    }
}

/// Largest admissible smoothing parameter; at this `h` the uniform
/// approximation error equals `g_m * delta / 8`.
pub fn conv_hmax(n: usize, p: f64, g_m: f64, delta: f64, kernel: &Kernel) -> f64 {
    g_m * delta / (8.0 * n as f64 * p.max(1.0 - p) * kernel.abs_moment())
}
