//! Exact solver for small instances by exhaustive routing enumeration.
//!
//! Enumerates every simple source-sink path per demand (parallel links
//! count as distinct hops), then scans the cross product of path choices,
//! keeping the cheapest combination whose loads all fit the rate table.
//! Useful as ground truth for approximation-ratio measurements.

use crate::error::{Error, Result};
use crate::model::{
    Demand, EdgeId, IntegralSolution, Network, NodeId, PowerFit, RoutedPath, StepCost,
};
use crate::rounding::assign_rates;

/// Search limits; exceeding the path budget degrades the result to
/// "not certified", exceeding the combination budget aborts.
#[derive(Debug, Clone, Copy)]
pub struct OracleBudget {
    pub max_paths_per_demand: usize,
    pub max_combinations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_paths_per_demand: 64,
            max_combinations: 1_000_000,
        }
    }
}

/// All simple paths of one demand, possibly truncated at the budget.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    pub paths: Vec<RoutedPath>,
    pub truncated: bool,
}

/// Enumerates simple source-sink paths in lexicographic order of the node
/// sequence, parallel edges ascending by id within the same sequence.
pub fn enumerate_paths(net: &Network, demand: &Demand, budget: &OracleBudget) -> PathEnumeration {
    let mut adj = net.adjacency();
    for list in &mut adj {
        list.sort_by_key(|&(e, v)| (v, e));
    }
    let mut paths = Vec::new();
    let mut truncated = false;
    let mut visited = vec![false; net.node_count()];
    let mut nodes = vec![demand.source];
    let mut edges = Vec::new();
    visited[demand.source] = true;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        adj: &[Vec<(EdgeId, NodeId)>],
        sink: NodeId,
        budget: usize,
        visited: &mut [bool],
        nodes: &mut Vec<NodeId>,
        edges: &mut Vec<EdgeId>,
        paths: &mut Vec<RoutedPath>,
        truncated: &mut bool,
    ) {
        if *truncated {
            return;
        }
        let at = *nodes.last().unwrap();
        if at == sink {
            if paths.len() == budget {
                *truncated = true;
                return;
            }
            paths.push(RoutedPath {
                nodes: nodes.clone(),
                edges: edges.clone(),
            });
            return;
        }
        for &(e, v) in &adj[at] {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            nodes.push(v);
            edges.push(e);
            dfs(adj, sink, budget, visited, nodes, edges, paths, truncated);
            nodes.pop();
            edges.pop();
            visited[v] = false;
            if *truncated {
                return;
            }
        }
    }

    dfs(
        &adj,
        demand.sink,
        budget.max_paths_per_demand,
        &mut visited,
        &mut nodes,
        &mut edges,
        &mut paths,
        &mut truncated,
    );
    PathEnumeration { paths, truncated }
}

/// Which objective the exhaustive scan minimizes.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// The discrete step cost of the chosen rate states.
    Step,
    /// The fitted power-law cost of the loads; used to validate the
    /// fractional relaxation's lower-bound property independently.
    Power(&'a PowerFit),
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub solution: IntegralSolution,
    /// Optimal value under the requested objective.
    pub objective: f64,
    /// False when some path list was truncated, in which case the optimum
    /// is only over the enumerated routings.
    pub certified: bool,
}

/// Minimizes the step cost over all routings; see [`solve_exact_with`].
pub fn solve_exact(
    net: &Network,
    demands: &[Demand],
    cost: &StepCost,
    budget: &OracleBudget,
) -> Result<OracleSolution> {
    solve_exact_with(net, demands, cost, Objective::Step, budget)
}

/// Scans the cross product of per-demand simple paths in lexicographic
/// order of choice indices and keeps the strictly cheapest feasible
/// combination, so ties resolve to the lexicographically smallest choice
/// vector. Routings that overload every rate state on some edge are
/// infeasible and skipped.
pub fn solve_exact_with(
    net: &Network,
    demands: &[Demand],
    cost: &StepCost,
    objective: Objective,
    budget: &OracleBudget,
) -> Result<OracleSolution> {
    if demands.is_empty() {
        return Ok(OracleSolution {
            solution: IntegralSolution {
                paths: Vec::new(),
                loads: vec![0; net.edge_count()],
                rates: vec![None; net.edge_count()],
                total_cost: 0.0,
            },
            objective: 0.0,
            certified: true,
        });
    }
    let enumerations: Vec<PathEnumeration> = demands
        .iter()
        .map(|d| enumerate_paths(net, d, budget))
        .collect();
    let certified = enumerations.iter().all(|e| !e.truncated);
    if enumerations.iter().any(|e| e.paths.is_empty()) {
        return Err(Error::Infeasible);
    }
    let combinations = enumerations
        .iter()
        .map(|e| e.paths.len() as u128)
        .product::<u128>();
    if combinations > budget.max_combinations as u128 {
        return Err(Error::OracleBudget(format!(
            "{combinations} path combinations exceed the budget of {}",
            budget.max_combinations
        )));
    }

    let max_rate = cost.max_rate();
    let mut choice = vec![0usize; demands.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut loads = vec![0u64; net.edge_count()];
    loop {
        loads.iter_mut().for_each(|l| *l = 0);
        for (i, &c) in choice.iter().enumerate() {
            for &e in &enumerations[i].paths[c].edges {
                loads[e] += demands[i].amount;
            }
        }
        let feasible = loads.iter().all(|&l| l as f64 <= max_rate);
        if feasible {
            let value = match objective {
                Objective::Step => loads
                    .iter()
                    .filter(|&&l| l > 0)
                    .map(|&l| cost.eval(l as f64).unwrap())
                    .sum(),
                Objective::Power(fit) => loads.iter().map(|&l| fit.eval(l as f64)).sum(),
            };
            if best.as_ref().map(|(b, _)| value < *b).unwrap_or(true) {
                best = Some((value, choice.clone()));
            }
        }

        // Odometer over choice indices, last demand fastest.
        let mut pos = demands.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < enumerations[pos].paths.len() {
                break;
            }
            choice[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    let (objective_value, choice) = best.ok_or(Error::Infeasible)?;
    let paths: Vec<RoutedPath> = choice
        .iter()
        .enumerate()
        .map(|(i, &c)| enumerations[i].paths[c].clone())
        .collect();
    let solution = assign_rates(net, demands, &paths, cost)?;
    Ok(OracleSolution {
        solution,
        objective: objective_value,
        certified,
    })
}
