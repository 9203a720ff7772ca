//! Least-squares interpolation of a step cost table by a power law
//! `g(x) = mu * x^beta`, done in log space.
//!
//! Taking logs turns the power law into a line `mu' + beta * w` with
//! `mu' = ln(mu)` and `w = ln(x)`. The fit minimizes the integral of the
//! squared vertical distance between that line and the log of the step
//! function over `w in [0, ln(R_max)]`, rather than matching sampled or
//! midpoint values, so steps contribute in proportion to their (log)
//! width. The minimizer solves a 2x2 linear system that this module
//! integrates in closed form; the piecewise-quadratic objective itself is
//! never evaluated numerically on the production path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PowerFit, StepCost};

/// Log-domain breakpoints of a step cost table: `v[i] = ln(cost_i)` and
/// `w` the `ln(rate)` boundaries prefixed with `w[0] = 0`.
///
/// `w` is strictly increasing except when the smallest rate is exactly 1,
/// which makes the first integration interval empty.
#[derive(Debug, Clone)]
pub struct LogBreakpoints {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl LogBreakpoints {
    pub fn from_cost(cost: &StepCost) -> Result<Self> {
        let top = cost.max_rate();
        if top.is_nan() || top <= 1.0 {
            return Err(Error::DegenerateDomain);
        }
        let v = cost.costs.iter().map(|c| c.ln()).collect();
        let mut w = Vec::with_capacity(cost.states() + 1);
        w.push(0.0);
        w.extend(cost.rates.iter().map(|r| r.ln()));
        Ok(LogBreakpoints { v, w })
    }

    pub fn domain_width(&self) -> f64 {
        *self.w.last().unwrap()
    }
}

/// Fits `g(x) = mu * x^beta` to the step table and measures the fit
/// quality statistics (gap, step ratio, phi).
pub fn fit_power_law(cost: &StepCost) -> Result<PowerFit> {
    let lb = LogBreakpoints::from_cost(cost)?;
    let (mu_prime, beta) = solve_normal_equations(&lb);
    build_fit(cost, mu_prime.exp(), beta)
}

fn build_fit(cost: &StepCost, mu: f64, beta: f64) -> Result<PowerFit> {
    if !mu.is_finite() || !beta.is_finite() {
        return Err(Error::Domain(
            "power-law fit produced a non-finite parameter".into(),
        ));
    }
    let sigma = cost.step_ratio();
    let phi = sigma.max(cost.costs[0] / mu);
    let gap = endpoint_gap(cost, mu, beta);
    Ok(PowerFit {
        mu,
        beta,
        gap,
        sigma,
        phi,
    })
}

/// Solves the first-order conditions of the integral least-squares
/// objective. With `W = ln(R_max)` the system is
///
/// ```text
/// mu' * W     + beta * W^2/2 = sum_i v_i (w_i - w_{i-1})
/// mu' * W^2/2 + beta * W^3/3 = sum_i v_i (w_i^2 - w_{i-1}^2)/2
/// ```
///
/// whose determinant `W^4/12` is positive whenever `W > 0`.
fn solve_normal_equations(lb: &LogBreakpoints) -> (f64, f64) {
    let w_m = lb.domain_width();
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for (i, &vi) in lb.v.iter().enumerate() {
        let (a, b) = (lb.w[i], lb.w[i + 1]);
        r1 += vi * (b - a);
        r2 += vi * (b * b - a * a) / 2.0;
    }
    let a11 = w_m;
    let a12 = w_m * w_m / 2.0;
    let a22 = w_m * w_m * w_m / 3.0;
    let det = a11 * a22 - a12 * a12;
    let mu_prime = (r1 * a22 - a12 * r2) / det;
    let beta = (a11 * r2 - a12 * r1) / det;
    (mu_prime, beta)
}

/// Largest relative residual of the two first-order conditions at the
/// given parameters. Near zero for an exact solve.
pub fn normal_equation_residual(cost: &StepCost, mu_prime: f64, beta: f64) -> Result<f64> {
    let lb = LogBreakpoints::from_cost(cost)?;
    let w_m = lb.domain_width();
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for (i, &vi) in lb.v.iter().enumerate() {
        let (a, b) = (lb.w[i], lb.w[i + 1]);
        r1 += vi * (b - a);
        r2 += vi * (b * b - a * a) / 2.0;
    }
    let lhs1 = mu_prime * w_m + beta * w_m * w_m / 2.0;
    let lhs2 = mu_prime * w_m * w_m / 2.0 + beta * w_m * w_m * w_m / 3.0;
    let res1 = (lhs1 - r1).abs() / r1.abs().max(1.0);
    let res2 = (lhs2 - r2).abs() / r2.abs().max(1.0);
    Ok(res1.max(res2))
}

fn ratio_pair(f: f64, g: f64) -> f64 {
    (f / g).max(g / f)
}

/// Exact gap on [1, R_max] by endpoint evaluation. The fitted curve is
/// monotone and the step function constant per step, so per-step extrema
/// of f/g and g/f sit at step boundaries; both one-sided step values are
/// taken at every breakpoint.
fn endpoint_gap(cost: &StepCost, mu: f64, beta: f64) -> f64 {
    let g = |x: f64| mu * x.powf(beta);
    let m = cost.states();
    let mut gap = ratio_pair(cost.costs[0], g(1.0));
    for i in 0..m {
        let r = cost.rates[i];
        gap = gap.max(ratio_pair(cost.costs[i], g(r)));
        if i + 1 < m {
            gap = gap.max(ratio_pair(cost.costs[i + 1], g(r)));
        }
    }
    gap
}

/// Measures the interpolation gap `max{f/g, g/f}` over `[1, R_max]`.
///
/// The returned value comes from exact endpoint evaluation;
/// `samples_per_step` interior points per step are folded in as a numeric
/// cross-check of the endpoint argument and can never exceed it.
pub fn measure_gap(cost: &StepCost, fit: &PowerFit, samples_per_step: usize) -> f64 {
    assert!(samples_per_step >= 2, "need at least two samples per step");
    let mut gap = endpoint_gap(cost, fit.mu, fit.beta);
    for i in 0..cost.states() {
        let lo = if i == 0 { 1.0 } else { cost.rates[i - 1] };
        let hi = cost.rates[i];
        if hi <= lo {
            continue;
        }
        for s in 0..samples_per_step {
            let x = lo + (hi - lo) * (s as f64 + 1.0) / (samples_per_step as f64 + 1.0);
            gap = gap.max(ratio_pair(cost.costs[i], fit.eval(x)));
        }
    }
    gap
}

/// Outcome of checking the measured gap against its analytic envelope
/// `[2*sigma/(sigma+1), phi]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapBounds {
    /// Whether the fitted curve crosses the step value inside every step,
    /// the hypothesis under which the envelope is valid.
    pub intersects_each_step: bool,
    pub lower: f64,
    pub upper: f64,
    /// `None` when the check is vacuous (single state) or the hypothesis
    /// fails; otherwise whether the measured gap sits in the envelope.
    pub holds: Option<bool>,
}

/// Checks whether the measured gap lies within the analytic bounds.
pub fn check_gap_bounds(cost: &StepCost, fit: &PowerFit) -> GapBounds {
    const REL_TOL: f64 = 1e-12;
    let m = cost.states();
    let intersects = (0..m).all(|i| {
        let lo = if i == 0 { 1.0 } else { cost.rates[i - 1] };
        let hi = cost.rates[i];
        let (a, b) = (fit.eval(lo), fit.eval(hi));
        let (gmin, gmax) = if a <= b { (a, b) } else { (b, a) };
        let y = cost.costs[i];
        gmin <= y * (1.0 + REL_TOL) && y <= gmax * (1.0 + REL_TOL)
    });
    let lower = 2.0 * fit.sigma / (fit.sigma + 1.0);
    let upper = fit.phi;
    let holds = if m >= 2 && intersects {
        Some(fit.gap >= lower * (1.0 - REL_TOL) && fit.gap <= upper * (1.0 + REL_TOL))
    } else {
        None
    };
    GapBounds {
        intersects_each_step: intersects,
        lower,
        upper,
        holds,
    }
}

/// Replaces a sub-linear fit with the best line of slope exactly 1 in log
/// space, so the downstream convex solver gets a convex objective. The
/// gap statistics are re-measured against the clamped curve. Fits with
/// `beta >= 1` are returned unchanged.
pub fn clamp_to_convex(cost: &StepCost, fit: &PowerFit) -> Result<PowerFit> {
    if fit.beta >= 1.0 {
        return Ok(*fit);
    }
    let lb = LogBreakpoints::from_cost(cost)?;
    let w_m = lb.domain_width();
    let mut r1 = 0.0;
    for (i, &vi) in lb.v.iter().enumerate() {
        r1 += vi * (lb.w[i + 1] - lb.w[i]);
    }
    // First-order condition in mu' with beta fixed at 1.
    let mu_prime = (r1 - w_m * w_m / 2.0) / w_m;
    build_fit(cost, mu_prime.exp(), 1.0)
}
