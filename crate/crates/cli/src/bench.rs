//! Benchmark harness: generates seeded instances, runs the full pipeline
//! and the exact oracle on each, and emits one CSV row per instance.
//! Rows are computed in a worker pool but written in instance order, and
//! all columns except the runtimes are deterministic for a fixed seed.

use std::time::Instant;

use anyhow::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rateroute_core::generator::{gen_random, RateTableSpec};
use rateroute_core::oracle::{solve_exact, OracleBudget};
use rateroute_core::pipeline::{run_pipeline, PipelineConfig};
use rateroute_core::relaxation::SolverConfig;

pub struct BenchParams {
    pub count: usize,
    pub nodes: usize,
    pub edge_prob: f64,
    pub demands: usize,
    pub table: RateTableSpec,
    pub seed: u64,
    pub tol: f64,
    pub trials: usize,
}

const SCHEMA_HEADER: &str =
    "# rateroute bench schema v1; runtime columns (solve_ms, oracle_ms) are non-deterministic";
const COLUMNS: &str =
    "index,seed,nodes,edges,demands,sigma,phi,gap,oracle_cost,best_cost,mean_trial_cost,lower_bound,empirical_ratio,solve_ms,oracle_ms";

struct Row {
    index: usize,
    seed: u64,
    nodes: usize,
    edges: usize,
    demands: usize,
    sigma: f64,
    phi: f64,
    gap: f64,
    oracle_cost: Option<f64>,
    best_cost: f64,
    mean_trial_cost: f64,
    lower_bound: f64,
    empirical_ratio: Option<f64>,
    solve_ms: f64,
    oracle_ms: f64,
}

impl Row {
    fn to_csv(&self) -> String {
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3}",
            self.index,
            self.seed,
            self.nodes,
            self.edges,
            self.demands,
            self.sigma,
            self.phi,
            self.gap,
            opt(&self.oracle_cost),
            self.best_cost,
            self.mean_trial_cost,
            self.lower_bound,
            opt(&self.empirical_ratio),
            self.solve_ms,
            self.oracle_ms,
        )
    }
}

pub fn run_bench(params: &BenchParams) -> Result<String> {
    // Instance seeds come off one master stream so the row set depends
    // only on the base seed, not on scheduling.
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.count).map(|_| master.next_u64()).collect();

    let rows: Vec<Row> = seeds
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| bench_one(params, index, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str(COLUMNS);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    Ok(out)
}

fn bench_one(params: &BenchParams, index: usize, seed: u64) -> Result<Row> {
    let instance = gen_random(
        params.nodes,
        params.edge_prob,
        params.demands,
        &params.table,
        seed,
    )?;
    let cfg = PipelineConfig {
        solver: SolverConfig {
            rel_gap_tol: params.tol,
            ..SolverConfig::default()
        },
        trials: params.trials,
        seed,
        clamp_beta: true,
    };

    let solve_start = Instant::now();
    let out = run_pipeline(&instance, &cfg)?;
    let solve_ms = solve_start.elapsed().as_secs_f64() * 1e3;

    let oracle_start = Instant::now();
    let exact = solve_exact(
        &instance.network,
        &instance.demands,
        &instance.cost,
        &OracleBudget::default(),
    )
    .ok()
    .filter(|o| o.certified);
    let oracle_ms = oracle_start.elapsed().as_secs_f64() * 1e3;

    let oracle_cost = exact.as_ref().map(|o| o.objective);
    Ok(Row {
        index,
        seed,
        nodes: instance.network.node_count(),
        edges: instance.network.edge_count(),
        demands: instance.demands.len(),
        sigma: out.fit.sigma,
        phi: out.fit.phi,
        gap: out.fit.gap,
        oracle_cost,
        best_cost: out.integral.total_cost,
        mean_trial_cost: out.trial_stats.mean_cost,
        lower_bound: out.lower_bound,
        empirical_ratio: oracle_cost.map(|c| out.integral.total_cost / c),
        solve_ms,
        oracle_ms,
    })
}
