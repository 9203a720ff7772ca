//! Conversion of a fractional flow into one path per demand.
//!
//! Each demand's flow is first decomposed into weighted simple paths by
//! repeated bottleneck extraction on the flow's support. One path per
//! demand is then drawn at random with probability proportional to its
//! weight, and every used link gets the minimal rate state that covers
//! its resulting load. A repeated-trial wrapper keeps the cheapest
//! feasible draw.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    Demand, EdgeId, FractionalSolution, IntegralSolution, Network, NodeId, RoutedPath, StepCost,
};

/// One extracted path and its bottleneck weight.
#[derive(Debug, Clone)]
pub struct DecomposedPath {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub weight: f64,
}

impl From<&DecomposedPath> for RoutedPath {
    fn from(p: &DecomposedPath) -> RoutedPath {
        RoutedPath {
            nodes: p.nodes.clone(),
            edges: p.edges.clone(),
        }
    }
}

/// Weighted path decomposition of one demand's fractional flow.
#[derive(Debug, Clone)]
pub struct PathDecomposition {
    pub demand: usize,
    pub paths: Vec<DecomposedPath>,
    /// Flow mass left on the support when no source-sink path remained,
    /// typically solver tolerance debris on cycles.
    pub residual: f64,
}

impl PathDecomposition {
    pub fn total_weight(&self) -> f64 {
        self.paths.iter().map(|p| p.weight).sum()
    }

    /// Selection probabilities, normalized to sum to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.paths.iter().map(|p| p.weight / total).collect()
    }
}

/// Decomposes one demand's flow into weighted simple paths.
///
/// Paths are extracted depth-first from the source following the flow's
/// direction, preferring the highest-flow edge and breaking ties by edge
/// id. Each extraction subtracts its bottleneck from the path, dropping
/// edges that fall below `epsilon`, so at most one extraction per support
/// edge can occur. Flow left when no source-sink path remains is reported
/// as `residual`.
pub fn decompose_flow(
    net: &Network,
    demands: &[Demand],
    sol: &FractionalSolution,
    demand_index: usize,
    epsilon: f64,
) -> Result<PathDecomposition> {
    let demand = &demands[demand_index];
    if sol.conservation_residual_for(net, demands, demand_index) > epsilon {
        return Err(Error::MalformedFlow(format!(
            "demand {demand_index} violates flow conservation beyond {epsilon}"
        )));
    }

    let mut flow = sol.signed_flows[demand_index].clone();
    for f in &mut flow {
        if f.abs() <= epsilon {
            *f = 0.0;
        }
    }

    let adj = net.adjacency();
    let mut paths = Vec::new();
    while let Some((nodes, edges)) = extract_path(net, &adj, &flow, demand.source, demand.sink) {
        let bottleneck = edges
            .iter()
            .map(|&e| flow[e].abs())
            .fold(f64::INFINITY, f64::min);
        for &e in &edges {
            let sign = flow[e].signum();
            let next = flow[e].abs() - bottleneck;
            flow[e] = if next < epsilon { 0.0 } else { sign * next };
        }
        paths.push(DecomposedPath {
            nodes,
            edges,
            weight: bottleneck,
        });
    }

    let residual = flow.iter().map(|f| f.abs()).sum();
    Ok(PathDecomposition {
        demand: demand_index,
        paths,
        residual,
    })
}

pub fn decompose_all(
    net: &Network,
    demands: &[Demand],
    sol: &FractionalSolution,
    epsilon: f64,
) -> Result<Vec<PathDecomposition>> {
    (0..demands.len())
        .map(|i| decompose_flow(net, demands, sol, i, epsilon))
        .collect()
}

/// Depth-first search for a simple source-sink path inside the directed
/// support of the remaining flow.
fn extract_path(
    net: &Network,
    adj: &[Vec<(EdgeId, NodeId)>],
    flow: &[f64],
    source: NodeId,
    sink: NodeId,
) -> Option<(Vec<NodeId>, Vec<EdgeId>)> {
    let mut visited = vec![false; net.node_count()];
    let mut nodes = vec![source];
    let mut edges = Vec::new();
    visited[source] = true;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        net: &Network,
        adj: &[Vec<(EdgeId, NodeId)>],
        flow: &[f64],
        at: NodeId,
        sink: NodeId,
        visited: &mut [bool],
        nodes: &mut Vec<NodeId>,
        edges: &mut Vec<EdgeId>,
    ) -> bool {
        if at == sink {
            return true;
        }
        // Outgoing support edges, largest flow first, then lowest id.
        let mut candidates: Vec<(EdgeId, NodeId)> = adj[at]
            .iter()
            .filter(|&&(e, _)| {
                flow[e] != 0.0 && {
                    let l = net.link(e);
                    (flow[e] > 0.0 && l.u == at) || (flow[e] < 0.0 && l.v == at)
                }
            })
            .copied()
            .collect();
        candidates.sort_by(|a, b| {
            flow[b.0]
                .abs()
                .partial_cmp(&flow[a.0].abs())
                .unwrap()
                .then(a.0.cmp(&b.0))
        });
        for (e, next) in candidates {
            if visited[next] {
                continue;
            }
            visited[next] = true;
            nodes.push(next);
            edges.push(e);
            if dfs(net, adj, flow, next, sink, visited, nodes, edges) {
                return true;
            }
            nodes.pop();
            edges.pop();
            visited[next] = false;
        }
        false
    }

    if dfs(
        net,
        adj,
        flow,
        source,
        sink,
        &mut visited,
        &mut nodes,
        &mut edges,
    ) {
        Some((nodes, edges))
    } else {
        None
    }
}

/// Draws one path per demand, with probability proportional to the path
/// weights. Deterministic for a given seed.
pub fn sample_paths(decompositions: &[PathDecomposition], seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(decompositions.len());
    for d in decompositions {
        if d.paths.is_empty() {
            return Err(Error::EmptyDecomposition(d.demand));
        }
        let probs = d.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = j;
                break;
            }
        }
        chosen.push(pick);
    }
    Ok(chosen)
}

/// Computes per-edge loads for the chosen paths and powers every used
/// edge at the minimal rate state covering its load.
pub fn assign_rates(
    net: &Network,
    demands: &[Demand],
    paths: &[RoutedPath],
    cost: &StepCost,
) -> Result<IntegralSolution> {
    let mut loads = vec![0u64; net.edge_count()];
    for (demand, path) in demands.iter().zip(paths) {
        for &e in &path.edges {
            loads[e] += demand.amount;
        }
    }
    let mut rates = vec![None; net.edge_count()];
    let mut total_cost = 0.0;
    for (e, &load) in loads.iter().enumerate() {
        if load == 0 {
            continue;
        }
        let idx = cost
            .rate_index_for(load as f64)
            .map_err(|_| Error::RateOverflow {
                edge: e,
                load,
                max: cost.max_rate(),
            })?;
        rates[e] = Some(cost.rates[idx]);
        total_cost += cost.costs[idx];
    }
    Ok(IntegralSolution {
        paths: paths.to_vec(),
        loads,
        rates,
        total_cost,
    })
}

/// Aggregate statistics over the feasible trials of [`round`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialStats {
    pub trials: usize,
    pub feasible: usize,
    pub overflow: usize,
    pub mean_cost: f64,
    pub min_cost: f64,
    pub max_cost: f64,
}

/// Runs `trials` independent rounding passes with seeds derived from
/// `seed`, discards draws that overflow the top rate state, and returns
/// the cheapest feasible solution plus trial statistics.
pub fn round(
    net: &Network,
    demands: &[Demand],
    cost: &StepCost,
    sol: &FractionalSolution,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<(IntegralSolution, TrialStats)> {
    assert!(trials >= 1, "need at least one trial");
    let decompositions = decompose_all(net, demands, sol, epsilon)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let trial_seeds: Vec<u64> = (0..trials).map(|_| master.next_u64()).collect();

    let mut best: Option<IntegralSolution> = None;
    let mut feasible = 0usize;
    let mut overflow = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for trial_seed in trial_seeds {
        let chosen = sample_paths(&decompositions, trial_seed)?;
        let paths: Vec<RoutedPath> = decompositions
            .iter()
            .zip(&chosen)
            .map(|(d, &j)| RoutedPath::from(&d.paths[j]))
            .collect();
        match assign_rates(net, demands, &paths, cost) {
            Ok(solution) => {
                feasible += 1;
                sum += solution.total_cost;
                min = min.min(solution.total_cost);
                max = max.max(solution.total_cost);
                let better = best
                    .as_ref()
                    .map(|b| solution.total_cost < b.total_cost)
                    .unwrap_or(true);
                if better {
                    best = Some(solution);
                }
            }
            Err(Error::RateOverflow { .. }) => overflow += 1,
            Err(e) => return Err(e),
        }
    }

    let best = best.ok_or(Error::NoFeasibleRounding { trials })?;
    Ok((
        best,
        TrialStats {
            trials,
            feasible,
            overflow,
            mean_cost: sum / feasible as f64,
            min_cost: min,
            max_cost: max,
        },
    ))
}
