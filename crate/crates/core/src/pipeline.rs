//! End-to-end solve: fit the cost table, solve the fractional relaxation,
//! round to one path per demand.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::{check_gap_bounds, clamp_to_convex, fit_power_law, GapBounds};
use crate::model::{FractionalSolution, Instance, IntegralSolution, PowerFit};
use crate::relaxation::{fractional_lower_bound, solve_fractional, SolverConfig};
use crate::rounding::{round, TrialStats};

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub trials: usize,
    pub seed: u64,
    /// Accept sub-linear fits by clamping the exponent to 1 instead of
    /// failing.
    pub clamp_beta: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            trials: 200,
            seed: 0,
            clamp_beta: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub fit: PowerFit,
    pub bounds: GapBounds,
    pub fractional: FractionalSolution,
    pub integral: IntegralSolution,
    pub trial_stats: TrialStats,
    /// Certified lower bound on the optimal discrete cost.
    pub lower_bound: f64,
    /// Best rounded cost over the lower bound.
    pub empirical_ratio: f64,
}

/// Summary statistics of a [`PipelineResult`], shaped for reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PipelineSummary {
    pub total_cost: f64,
    pub fractional_objective: f64,
    pub lower_bound: f64,
    pub empirical_ratio: f64,
}

pub fn run_pipeline(instance: &Instance, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let report = instance.validate();
    if !report.ok() {
        return Err(Error::InvalidInstance(report.to_message()));
    }
    let mut fit = fit_power_law(&instance.cost)?;
    if fit.beta < 1.0 {
        if cfg.clamp_beta {
            fit = clamp_to_convex(&instance.cost, &fit)?;
        } else {
            return Err(Error::NonConvexObjective { beta: fit.beta });
        }
    }
    let bounds = check_gap_bounds(&instance.cost, &fit);
    let fractional = solve_fractional(&instance.network, &instance.demands, &fit, &cfg.solver)?;
    let (integral, trial_stats) = round(
        &instance.network,
        &instance.demands,
        &instance.cost,
        &fractional,
        cfg.solver.epsilon_flow,
        cfg.trials,
        cfg.seed,
    )?;
    let lower_bound = fractional_lower_bound(&fractional, &fit);
    let empirical_ratio = integral.total_cost / lower_bound;
    Ok(PipelineResult {
        fit,
        bounds,
        fractional,
        integral,
        trial_stats,
        lower_bound,
        empirical_ratio,
    })
}

impl PipelineResult {
    pub fn summary(&self) -> PipelineSummary {
        PipelineSummary {
            total_cost: self.integral.total_cost,
            fractional_objective: self.fractional.objective,
            lower_bound: self.lower_bound,
            empirical_ratio: self.empirical_ratio,
        }
    }
}
