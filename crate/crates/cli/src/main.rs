//! Command-line front end: fit, relax, solve, oracle, gen and bench
//! subcommands around the solver library. All I/O is files or stdio;
//! errors leave as machine-readable JSON on stderr with a nonzero exit.

mod bench;

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use rateroute_core::fitting::{check_gap_bounds, clamp_to_convex, fit_power_law, GapBounds};
use rateroute_core::generator::{gen_random, RateTableSpec};
use rateroute_core::oracle::{solve_exact_with, Objective, OracleBudget};
use rateroute_core::pipeline::{run_pipeline, PipelineConfig};
use rateroute_core::relaxation::{solve_fractional, SolverConfig};
use rateroute_core::rounding::TrialStats;
use rateroute_core::{EdgeId, Instance, PowerFit, StepCost};

#[derive(Parser)]
#[command(
    name = "rateroute",
    version,
    about = "Route demands over links with discrete rate states, minimizing total power"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base RNG seed for rounding, generation and benchmarks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Relative duality-gap tolerance for the fractional solver.
    #[arg(long, global = true, default_value_t = 1e-4)]
    tol: f64,

    /// Rounding trials per solve.
    #[arg(long, global = true, default_value_t = 200)]
    trials: usize,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the power-law cost to an instance's rate table.
    Fit {
        /// Instance JSON file, or "-" for stdin.
        #[arg(default_value = "-")]
        input: String,
    },
    /// Solve the fractional relaxation and emit flows and loads.
    Relax {
        #[arg(default_value = "-")]
        input: String,
        /// Clamp a sub-linear fitted exponent to 1 instead of failing.
        #[arg(long)]
        clamp_beta: bool,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
    },
    /// Full pipeline: fit, relax, round to one path per demand.
    Solve {
        #[arg(default_value = "-")]
        input: String,
        #[arg(long)]
        clamp_beta: bool,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
    },
    /// Exact optimum by exhaustive path enumeration (small instances).
    Oracle {
        #[arg(default_value = "-")]
        input: String,
        #[arg(long, default_value_t = 64)]
        max_paths: usize,
        #[arg(long, default_value_t = 1_000_000)]
        max_combinations: u64,
        /// Minimize the fitted power-law cost instead of the step cost.
        #[arg(long)]
        fitted_objective: bool,
    },
    /// Generate a random instance as JSON.
    Gen {
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
        #[arg(long, default_value_t = 3)]
        demands: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 2.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 1)]
        max_amount: u64,
    },
    /// Generate N instances, solve each and compare to the oracle; emits CSV.
    Bench {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
        #[arg(long, default_value_t = 2)]
        demands: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 2.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 1)]
        max_amount: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        let payload = serde_json::json!({ "error": err.to_string() });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<String> {
    let output = dispatch(&cli)?;
    match &cli.out {
        Some(path) => {
            fs::write(path, &output).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{output}"),
    }
    Ok(output)
}

fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Fit { input } => cmd_fit(&read_step_cost(input)?),
        Command::Relax {
            input,
            clamp_beta,
            max_iters,
        } => cmd_relax(&read_instance(input)?, cli, *clamp_beta, *max_iters),
        Command::Solve {
            input,
            clamp_beta,
            max_iters,
        } => cmd_solve(&read_instance(input)?, cli, *clamp_beta, *max_iters),
        Command::Oracle {
            input,
            max_paths,
            max_combinations,
            fitted_objective,
        } => cmd_oracle(
            &read_instance(input)?,
            *max_paths,
            *max_combinations,
            *fitted_objective,
        ),
        Command::Gen {
            nodes,
            edge_prob,
            demands,
            states,
            sigma_max,
            max_amount,
        } => {
            let spec = RateTableSpec {
                states: *states,
                sigma_max: *sigma_max,
                max_amount: *max_amount,
            };
            let instance = gen_random(*nodes, *edge_prob, *demands, &spec, cli.seed)?;
            Ok(instance.to_json_string())
        }
        Command::Bench {
            count,
            nodes,
            edge_prob,
            demands,
            states,
            sigma_max,
            max_amount,
        } => {
            let spec = RateTableSpec {
                states: *states,
                sigma_max: *sigma_max,
                max_amount: *max_amount,
            };
            bench::run_bench(&bench::BenchParams {
                count: *count,
                nodes: *nodes,
                edge_prob: *edge_prob,
                demands: *demands,
                table: spec,
                seed: cli.seed,
                tol: cli.tol,
                trials: cli.trials,
            })
        }
    }
}

fn read_input(input: &str) -> Result<String> {
    if input == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading stdin")?;
        Ok(buf)
    } else {
        fs::read_to_string(input).with_context(|| format!("reading {input}"))
    }
}

fn read_instance(input: &str) -> Result<Instance> {
    Ok(Instance::from_json_str(&read_input(input)?)?)
}

/// For `fit` only the rate table matters, so any JSON carrying a valid
/// `rates` array is accepted, full instances included.
fn read_step_cost(input: &str) -> Result<StepCost> {
    #[derive(serde::Deserialize)]
    struct RatesOnly {
        rates: Vec<RateEntry>,
    }
    #[derive(serde::Deserialize)]
    struct RateEntry {
        speed: f64,
        cost: f64,
    }
    let parsed: RatesOnly = serde_json::from_str(&read_input(input)?)?;
    let cost = StepCost::new(
        parsed.rates.iter().map(|r| r.speed).collect(),
        parsed.rates.iter().map(|r| r.cost).collect(),
    );
    let violations = cost.violations();
    if !violations.is_empty() {
        let message = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        anyhow::bail!("invalid rate table: {message}");
    }
    Ok(cost)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: PowerFit,
    bounds: GapBounds,
}

fn cmd_fit(cost: &StepCost) -> Result<String> {
    let fit = fit_power_law(cost)?;
    let bounds = check_gap_bounds(cost, &fit);
    to_json(&FitOutput { fit, bounds })
}

#[derive(Serialize)]
struct RelaxOutput {
    flows: Vec<BTreeMap<EdgeId, f64>>,
    loads: Vec<f64>,
    objective: f64,
    duality_gap: f64,
    iterations: usize,
    converged: bool,
}

fn solver_config(cli: &Cli, max_iters: usize) -> SolverConfig {
    SolverConfig {
        max_iterations: max_iters,
        rel_gap_tol: cli.tol,
        ..SolverConfig::default()
    }
}

fn cmd_relax(instance: &Instance, cli: &Cli, clamp_beta: bool, max_iters: usize) -> Result<String> {
    let mut fit = fit_power_law(&instance.cost)?;
    if fit.beta < 1.0 && clamp_beta {
        fit = clamp_to_convex(&instance.cost, &fit)?;
    }
    let cfg = solver_config(cli, max_iters);
    let sol = solve_fractional(&instance.network, &instance.demands, &fit, &cfg)?;
    let flows = (0..instance.demands.len())
        .map(|i| sol.flow_map(i, cfg.epsilon_flow))
        .collect();
    to_json(&RelaxOutput {
        flows,
        loads: sol.loads.clone(),
        objective: sol.objective,
        duality_gap: sol.duality_gap,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

#[derive(Serialize)]
struct SolveOutput {
    paths: Vec<Vec<String>>,
    path_edges: Vec<Vec<EdgeId>>,
    rates: BTreeMap<EdgeId, f64>,
    loads: BTreeMap<EdgeId, u64>,
    total_cost: f64,
    fractional_objective: f64,
    lower_bound: f64,
    empirical_ratio: f64,
    trials: TrialStats,
    fit: PowerFit,
}

fn cmd_solve(instance: &Instance, cli: &Cli, clamp_beta: bool, max_iters: usize) -> Result<String> {
    let cfg = PipelineConfig {
        solver: solver_config(cli, max_iters),
        trials: cli.trials,
        seed: cli.seed,
        clamp_beta,
    };
    let out = run_pipeline(instance, &cfg)?;
    let net = &instance.network;
    let paths = out
        .integral
        .paths
        .iter()
        .map(|p| p.nodes.iter().map(|&n| net.name(n).to_string()).collect())
        .collect();
    let path_edges = out.integral.paths.iter().map(|p| p.edges.clone()).collect();
    let rates = out
        .integral
        .rates
        .iter()
        .enumerate()
        .filter_map(|(e, r)| r.map(|r| (e, r)))
        .collect();
    let loads = out
        .integral
        .loads
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0)
        .map(|(e, &l)| (e, l))
        .collect();
    to_json(&SolveOutput {
        paths,
        path_edges,
        rates,
        loads,
        total_cost: out.integral.total_cost,
        fractional_objective: out.fractional.objective,
        lower_bound: out.lower_bound,
        empirical_ratio: out.empirical_ratio,
        trials: out.trial_stats,
        fit: out.fit,
    })
}

#[derive(Serialize)]
struct OracleOutput {
    optimal_cost: f64,
    certified: bool,
    argmin_paths: Vec<Vec<String>>,
    argmin_edges: Vec<Vec<EdgeId>>,
}

fn cmd_oracle(
    instance: &Instance,
    max_paths: usize,
    max_combinations: u64,
    fitted_objective: bool,
) -> Result<String> {
    let budget = OracleBudget {
        max_paths_per_demand: max_paths,
        max_combinations,
    };
    let fit;
    let objective = if fitted_objective {
        fit = fit_power_law(&instance.cost)?;
        Objective::Power(&fit)
    } else {
        Objective::Step
    };
    let exact = solve_exact_with(
        &instance.network,
        &instance.demands,
        &instance.cost,
        objective,
        &budget,
    )?;
    let net = &instance.network;
    to_json(&OracleOutput {
        optimal_cost: exact.objective,
        certified: exact.certified,
        argmin_paths: exact
            .solution
            .paths
            .iter()
            .map(|p| p.nodes.iter().map(|&n| net.name(n).to_string()).collect())
            .collect(),
        argmin_edges: exact
            .solution
            .paths
            .iter()
            .map(|p| p.edges.clone())
            .collect(),
    })
}
