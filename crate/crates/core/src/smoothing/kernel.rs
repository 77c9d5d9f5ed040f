//! Convolution kernels: symmetric, nonnegative, bounded, unit mass.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmoothingError {
    #[error("smoothing parameter h must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("quantile p = {0} outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("adaptive quadrature failed to converge (depth {0})")]
    NumericalFailure(usize),
    #[error("argument must be positive: {0}")]
    NonPositiveArgument(&'static str),
}

pub type Result<T> = std::result::Result<T, SmoothingError>;

/// Where the cdf is considered to have left [0, 1] numerically.
const CDF_TAIL: f64 = 1e-12;

/// Built-in convolution kernels. The uniform kernel admits a closed-form
/// smoothed loss; the others exercise the generic quadrature path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// K(x) = 1/(2w) on |x| <= w.
    Uniform { half_width: f64 },
    /// K(x) = 1 - |x| on |x| <= 1.
    Triangular,
    /// K(x) = 3/4 (1 - x^2) on |x| <= 1.
    Epanechnikov,
}

impl Kernel {
    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(SmoothingError::NonPositiveArgument("half_width"));
        }
        Ok(Kernel::Uniform { half_width })
    }

    /// The complexity-optimal kernel: all mass at height `sup` around zero,
    /// i.e. the uniform kernel with half-width `1/(2*sup)`.
    pub fn optimal_for_sup(sup: f64) -> Result<Self> {
        if !(sup > 0.0) {
            return Err(SmoothingError::NonPositiveArgument("sup"));
        }
        Kernel::uniform(1.0 / (2.0 * sup))
    }

    pub fn point_value(&self, x: f64) -> f64 {
        match *self {
            Kernel::Uniform { half_width: w } => {
                if x.abs() <= w {
                    1.0 / (2.0 * w)
                } else {
                    0.0
                }
            }
            Kernel::Triangular => {
                let a = x.abs();
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => {
                if x.abs() <= 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Cumulative kernel mass up to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Kernel::Uniform { half_width: w } => ((x + w) / (2.0 * w)).clamp(0.0, 1.0),
            Kernel::Triangular => {
                if x <= -1.0 {
                    0.0
                } else if x <= 0.0 {
                    (1.0 + x) * (1.0 + x) / 2.0
                } else if x <= 1.0 {
                    1.0 - (1.0 - x) * (1.0 - x) / 2.0
                } else {
                    1.0
                }
            }
            Kernel::Epanechnikov => {
                if x <= -1.0 {
                    0.0
                } else if x <= 1.0 {
                    0.5 + 0.75 * x - 0.25 * x * x * x
                } else {
                    1.0
                }
            }
        }
    }

    /// K-bar, the supremum of the kernel.
    pub fn sup_value(&self) -> f64 {
        match *self {
            Kernel::Uniform { half_width: w } => 1.0 / (2.0 * w),
            Kernel::Triangular => 1.0,
            Kernel::Epanechnikov => 0.75,
        }
    }

    /// First absolute moment, the kernel factor in the approximation bound.
    pub fn abs_moment(&self) -> f64 {
        match *self {
            Kernel::Uniform { half_width: w } => w / 2.0,
            Kernel::Triangular => 1.0 / 3.0,
            Kernel::Epanechnikov => 3.0 / 8.0,
        }
    }

    /// Interior kinks of K, used to split the quadrature intervals.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Kernel::Uniform { half_width: w } => vec![-w, w],
            Kernel::Triangular => vec![-1.0, 0.0, 1.0],
            Kernel::Epanechnikov => vec![-1.0, 1.0],
        }
    }

    /// Effective support radius: smallest c with cdf(-c) <= 1e-12 and
    /// cdf(c) >= 1 - 1e-12, found from the cdf itself.
    pub fn effective_cutoff(&self) -> f64 {
        let outside = |c: f64| self.cdf(-c) <= CDF_TAIL && self.cdf(c) >= 1.0 - CDF_TAIL;
        let mut hi = 1.0;
        while !outside(hi) {
            hi *= 2.0;
            if hi > 1e9 {
                return hi; // unbounded-support kernels are out of scope
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Adaptive Simpson quadrature with absolute tolerance; errors out instead
/// of silently returning when the recursion depth is exhausted.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: usize = 48;
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(SmoothingError::NumericalFailure(MAX_DEPTH));
        }
        Ok(recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)?
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)?)
    }
    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, MAX_DEPTH)
}

/// Integrates `f` over `[a, b]` splitting at the given interior points.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    splits: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(splits.iter().copied().filter(|&s| s > a && s < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut total = 0.0;
    let per = tol / pts.len().max(1) as f64;
    for w in pts.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], per)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<Kernel> {
        vec![
            Kernel::uniform(1.0).unwrap(),
            Kernel::uniform(0.25).unwrap(),
            Kernel::uniform(2.0).unwrap(),
            Kernel::Triangular,
            Kernel::Epanechnikov,
        ]
    }

    #[test]
    fn uniform_kernel_fields() {
        let k = Kernel::uniform(1.0).unwrap();
        assert_eq!(k.sup_value(), 0.5);
        // closed-form integral of |t| K: 2 * int_0^1 t/2 dt = 1/2
        assert_eq!(k.abs_moment(), 0.5);
        assert_eq!(k.cdf(0.0), 0.5);
        assert!(Kernel::uniform(0.0).is_err());
    }

    #[test]
    fn optimal_kernel_is_uniform() {
        let k = Kernel::optimal_for_sup(0.5).unwrap();
        assert_eq!(k, Kernel::Uniform { half_width: 1.0 });
        let k = Kernel::optimal_for_sup(2.0).unwrap();
        assert_eq!(k, Kernel::Uniform { half_width: 0.25 });
        assert_eq!(k.sup_value(), 2.0);
    }

    #[test]
    fn kernels_are_valid() {
        for k in builtins() {
            let c = k.effective_cutoff();
            // symmetry and nonnegativity on a grid
            for i in 0..=200 {
                let x = -c + 2.0 * c * i as f64 / 200.0;
                assert!(k.point_value(x) >= 0.0);
                assert!((k.point_value(x) - k.point_value(-x)).abs() < 1e-14);
                assert!(k.point_value(x) <= k.sup_value() + 1e-14);
            }
            // unit mass by quadrature
            let mass =
                integrate_piecewise(&|x| k.point_value(x), -c, c, &k.breakpoints(), 1e-12).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "mass {mass} for {k:?}");
            // abs moment matches quadrature
            let am = integrate_piecewise(
                &|x| x.abs() * k.point_value(x),
                -c,
                c,
                &k.breakpoints(),
                1e-12,
            )
            .unwrap();
            assert!((am - k.abs_moment()).abs() < 1e-8);
            // cdf endpoints and monotonicity
            assert!(k.cdf(-c - 1.0) == 0.0 || k.cdf(-c - 1.0) <= 1e-12);
            assert!(k.cdf(c + 1.0) >= 1.0 - 1e-12);
            let mut prev = -1.0;
            for i in 0..=400 {
                let x = -c - 0.5 + (2.0 * c + 1.0) * i as f64 / 400.0;
                let v = k.cdf(x);
                assert!(v >= prev - 1e-14);
                prev = v;
            }
        }
    }

    #[test]
    fn cutoff_matches_support() {
        assert!((Kernel::uniform(1.0).unwrap().effective_cutoff() - 1.0).abs() < 1e-9);
        assert!((Kernel::uniform(2.5).unwrap().effective_cutoff() - 2.5).abs() < 1e-9);
        assert!((Kernel::Triangular.effective_cutoff() - 1.0).abs() < 1e-3);
        assert!((Kernel::Epanechnikov.effective_cutoff() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn simpson_handles_polynomials() {
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        // exact: x^4/4 - x^2 + x over [-1, 3] = (81/4 - 9 + 3) - (1/4 - 1 - 1)
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 2.0);
        assert!((v - exact).abs() < 1e-10);
    }
}
