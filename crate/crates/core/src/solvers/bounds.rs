//! Worst-case iteration budgets and per-iteration convergence bounds for the
//! primal-dual solver with the default constant steps.

use super::SolverError;

/// Inputs to the complexity bound: problem constants plus the initialization
/// radius `r1` (a bound on both `|w_i^0 - theta_h|^2` and `|theta_h|^2`) and
/// `r2 = max{p^2, (1-p)^2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityInputs {
    pub g_m: f64,
    pub delta: f64,
    pub sigma2: f64,
    pub m_h: f64,
    pub l_h: f64,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
}

impl ComplexityInputs {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.sigma2 >= 0.0 && self.sigma2 < 1.0) {
            return Err(SolverError::InvalidTopology(self.sigma2));
        }
        for (name, v) in [
            ("g_m", self.g_m),
            ("delta", self.delta),
            ("m_h", self.m_h),
            ("l_h", self.l_h),
            ("r1", self.r1),
            ("r2", self.r2),
        ] {
            if !(v > 0.0) {
                return Err(SolverError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Smallest iteration count at which the convergence bounds are valid.
    pub fn validity_floor(&self) -> u64 {
        (1.0 / (1.0 - self.sigma2).sqrt()).ceil() as u64
    }
}

/// Exact initialization radius, available in oracle mode.
pub fn r1_oracle(init_w: &[f64], theta_h: f64) -> f64 {
    let t2 = theta_h * theta_h;
    init_w
        .iter()
        .map(|&w| {
            let d = w - theta_h;
            (d * d).max(t2)
        })
        .fold(0.0, f64::max)
}

/// Conservative radius without the oracle: the smoothed minimizer lies in
/// `[min_s - h, max_s + h]` and iterates start at local scores.
pub fn r1_surrogate(min_score: f64, max_score: f64, h: f64) -> f64 {
    let b = max_score.abs() + min_score.abs() + h;
    b * b
}

/// Number of iterations guaranteeing that every agent's running average has
/// entered the optimal solution interval, floored at the validity threshold
/// of the convergence bounds.
pub fn iteration_budget(inp: &ComplexityInputs) -> Result<u64, SolverError> {
    inp.validate()?;
    let n = inp.n as f64;
    let term1 = 272.0 * (inp.r1 * inp.m_h + inp.r2 * n * n / inp.m_h);
    let term2 = 32.0
        * inp.l_h
        * n.sqrt()
        * (inp.r1.sqrt() + inp.r2.sqrt() * n / inp.m_h);
    let t = term1.max(term2) / (inp.g_m * inp.delta * (1.0 - inp.sigma2).sqrt());
    let t = t.ceil().max(0.0);
    let t = if t >= u64::MAX as f64 { u64::MAX } else { t as u64 };
    Ok(t.max(inp.validity_floor()))
}

/// Upper bounds, valid from the validity floor onward, on
/// (a) the smoothed function error at the mean of the running averages and
/// (b) the mean squared consensus spread of the running averages.
pub fn convergence_bounds(t: u64, inp: &ComplexityInputs) -> Result<(f64, f64), SolverError> {
    inp.validate()?;
    if t < inp.validity_floor() {
        return Err(SolverError::InvalidInput(format!(
            "t = {t} below the bound validity floor {}",
            inp.validity_floor()
        )));
    }
    let n = inp.n as f64;
    let tf = t as f64;
    let gap = 1.0 - inp.sigma2;
    let fn_bound = 34.0 / (tf * gap.sqrt()) * (inp.r1 * inp.m_h + inp.r2 * n * n / inp.m_h);
    let consensus_bound =
        16.0 / (tf * tf * gap) * (inp.r1 + inp.r2 * n * n / (inp.m_h * inp.m_h));
    Ok((fn_bound, consensus_bound))
}

/// Default constant steps: `beta = m_h / (n * sqrt(1 - sigma2))` and
/// `alpha = 1 / (2 (m_h/n + beta))`.
pub fn extra_default_steps(m_h: f64, n: usize, sigma2: f64) -> Result<(f64, f64), SolverError> {
    if !(0.0..1.0).contains(&sigma2) {
        return Err(SolverError::InvalidTopology(sigma2));
    }
    let nf = n as f64;
    let beta = m_h / (nf * (1.0 - sigma2).sqrt());
    let alpha = 1.0 / (2.0 * (m_h / nf + beta));
    Ok((alpha, beta))
}
