//! Fractional multicommodity flow under the fitted convex cost.
//!
//! Minimizes the total fitted cost of the aggregate loads subject to
//! per-demand flow conservation, with each demand's flow a convex
//! combination of simple source-sink paths. The solver is a conditional
//! gradient scheme: every iteration linearizes the objective at the
//! current loads, routes each demand along a shortest path under the
//! marginal edge costs, derives a lower bound from that linearization,
//! and steps toward the shortest-path assignment. Under the line-search
//! rule the step length is chosen exactly, followed by a mass rebalance
//! between each demand's cheapest and most expensive active paths, which
//! removes the slow zig-zag of the plain method near optimal faces.

use crate::error::{Error, Result};
use crate::model::{Demand, EdgeId, FractionalSolution, Network, NodeId, PowerFit};

/// Step-length rule for the conditional-gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Fixed 2/(t+2) schedule.
    Diminishing,
    /// Exact one-dimensional minimization plus per-demand rebalancing.
    LineSearch,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the certified relative duality gap drops below this.
    pub rel_gap_tol: f64,
    pub step_rule: StepRule,
    /// Flows below this are treated as zero downstream.
    pub epsilon_flow: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            rel_gap_tol: 1e-4,
            step_rule: StepRule::LineSearch,
            epsilon_flow: 1e-6,
        }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        let tol_ok = self.rel_gap_tol > 0.0 && self.rel_gap_tol < 1.0;
        if !tol_ok {
            return Err(Error::Config("rel_gap_tol must lie in (0, 1)".into()));
        }
        if self.epsilon_flow.is_nan() || self.epsilon_flow <= 0.0 {
            return Err(Error::Config("epsilon_flow must be positive".into()));
        }
        Ok(())
    }
}

/// One active path of a demand: edge sequence, traversal direction per
/// edge against the link's (u, v) order, and its convex weight.
#[derive(Debug, Clone)]
struct ActivePath {
    edges: Vec<EdgeId>,
    dirs: Vec<f64>,
    weight: f64,
}

struct Workspace<'a> {
    net: &'a Network,
    demands: &'a [Demand],
    fit: &'a PowerFit,
    adj: Vec<Vec<(EdgeId, NodeId)>>,
    active: Vec<Vec<ActivePath>>,
}

impl Workspace<'_> {
    fn signed_flows(&self) -> Vec<Vec<f64>> {
        let e = self.net.edge_count();
        let mut flows = vec![vec![0.0; e]; self.demands.len()];
        for (i, paths) in self.active.iter().enumerate() {
            let amount = self.demands[i].amount as f64;
            for p in paths {
                for (edge, dir) in p.edges.iter().zip(&p.dirs) {
                    flows[i][*edge] += amount * p.weight * dir;
                }
            }
        }
        flows
    }

    fn loads_of(&self, flows: &[Vec<f64>]) -> Vec<f64> {
        let mut loads = vec![0.0; self.net.edge_count()];
        for per_demand in flows {
            for (e, f) in per_demand.iter().enumerate() {
                loads[e] += f.abs();
            }
        }
        loads
    }

    fn objective_of(&self, loads: &[f64]) -> f64 {
        loads.iter().map(|&x| self.fit.eval(x)).sum()
    }
}

/// Solves the relaxed routing problem. Requires a convex fitted cost
/// (`beta >= 1`) and every demand pair connected.
///
/// An exactly linear cost is handled separately: every minimum-hop
/// assignment ties, and the conditional-gradient iteration would settle
/// on an arbitrary vertex, starving the rounding stage of alternatives.
/// [`solve_linear_spread`] returns the exact optimum with ties spread.
pub fn solve_fractional(
    net: &Network,
    demands: &[Demand],
    fit: &PowerFit,
    cfg: &SolverConfig,
) -> Result<FractionalSolution> {
    cfg.check()?;
    if fit.beta < 1.0 {
        return Err(Error::NonConvexObjective { beta: fit.beta });
    }

    let adj = net.adjacency();
    for (i, d) in demands.iter().enumerate() {
        if shortest_path(&adj, &vec![0.0; net.edge_count()], d.source, d.sink).is_none() {
            return Err(Error::NoPath {
                demand: i,
                src: net.name(d.source).to_string(),
                dst: net.name(d.sink).to_string(),
            });
        }
    }

    if demands.is_empty() {
        return Ok(FractionalSolution {
            signed_flows: Vec::new(),
            loads: vec![0.0; net.edge_count()],
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        });
    }
    if fit.beta == 1.0 {
        return Ok(solve_linear_spread(net, demands, fit, &adj));
    }

    let mut ws = Workspace {
        net,
        demands,
        fit,
        adj,
        active: Vec::new(),
    };

    // Cold start: route everything along the shortest paths at zero load.
    let zero_weights = marginal_weights(fit, &vec![0.0; net.edge_count()]);
    for d in demands {
        let (_, path) = shortest_path(&ws.adj, &zero_weights, d.source, d.sink).unwrap();
        ws.active.push(vec![path_with_weight(net, path, 1.0)]);
    }

    let mut trace = Vec::new();
    let mut best_lower = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut rel_gap = f64::INFINITY;

    for t in 1..=cfg.max_iterations {
        iterations = t;
        let flows = ws.signed_flows();
        let loads = ws.loads_of(&flows);
        let objective = ws.objective_of(&loads);
        trace.push(objective);

        let weights = marginal_weights(fit, &loads);
        let mut fw_paths = Vec::with_capacity(demands.len());
        let mut lmo_cost = 0.0;
        for d in demands {
            let (dist, path) = shortest_path(&ws.adj, &weights, d.source, d.sink).unwrap();
            lmo_cost += d.amount as f64 * dist;
            fw_paths.push(path);
        }
        let potential: f64 = loads.iter().zip(&weights).map(|(x, w)| x * w).sum();
        let fw_gap = (potential - lmo_cost).max(0.0);
        best_lower = best_lower.max(objective - fw_gap);
        rel_gap = ((objective - best_lower) / objective.max(f64::MIN_POSITIVE)).max(0.0);
        if rel_gap <= cfg.rel_gap_tol {
            converged = true;
            break;
        }
        if t == cfg.max_iterations {
            break;
        }

        match cfg.step_rule {
            StepRule::Diminishing => {
                let gamma = 2.0 / (t as f64 + 2.0);
                blend_toward(&mut ws, net, &fw_paths, gamma);
            }
            StepRule::LineSearch => {
                let target: Vec<Vec<ActivePath>> = fw_paths
                    .iter()
                    .map(|p| vec![path_with_weight(net, p.clone(), 1.0)])
                    .collect();
                let gamma = line_search_blend(&ws, &flows, &target);
                blend_toward(&mut ws, net, &fw_paths, gamma);
                rebalance_sweep(&mut ws);
            }
        }
        prune(&mut ws);
    }

    let signed_flows = ws.signed_flows();
    let loads = ws.loads_of(&signed_flows);
    let objective = ws.objective_of(&loads);
    Ok(FractionalSolution {
        signed_flows,
        loads,
        objective,
        duality_gap: rel_gap,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Exact optimum for a linear cost: each demand pays `mu` per unit per
/// hop, so minimum-hop routing is optimal and the only freedom is how
/// ties split. Flow is pushed through the shortest-path DAG with an even
/// split over each node's outgoing DAG edges, which keeps every tied
/// route in the support for the rounding stage.
fn solve_linear_spread(
    net: &Network,
    demands: &[Demand],
    fit: &PowerFit,
    adj: &[Vec<(EdgeId, NodeId)>],
) -> FractionalSolution {
    let n = net.node_count();
    let mut signed_flows = vec![vec![0.0; net.edge_count()]; demands.len()];
    for (i, d) in demands.iter().enumerate() {
        let from_source = hop_distances(adj, d.source);
        let to_sink = hop_distances(adj, d.sink);
        let total = from_source[d.sink];
        let mut order: Vec<NodeId> = (0..n)
            .filter(|&u| {
                from_source[u] != usize::MAX
                    && to_sink[u] != usize::MAX
                    && from_source[u] + to_sink[u] == total
            })
            .collect();
        order.sort_by_key(|&u| from_source[u]);

        let mut inflow = vec![0.0; n];
        inflow[d.source] = d.amount as f64;
        for &u in &order {
            if u == d.sink || inflow[u] == 0.0 {
                continue;
            }
            let outgoing: Vec<(EdgeId, NodeId)> = adj[u]
                .iter()
                .filter(|&&(_, v)| {
                    to_sink[v] != usize::MAX
                        && from_source[v] == from_source[u] + 1
                        && from_source[v] + to_sink[v] == total
                })
                .copied()
                .collect();
            let share = inflow[u] / outgoing.len() as f64;
            for (e, v) in outgoing {
                inflow[v] += share;
                let sign = if net.link(e).u == u { 1.0 } else { -1.0 };
                signed_flows[i][e] += sign * share;
            }
        }
    }

    let mut loads = vec![0.0; net.edge_count()];
    for per_demand in &signed_flows {
        for (e, f) in per_demand.iter().enumerate() {
            loads[e] += f.abs();
        }
    }
    let objective = loads.iter().map(|&x| fit.eval(x)).sum();
    FractionalSolution {
        signed_flows,
        loads,
        objective,
        duality_gap: 0.0,
        iterations: 1,
        converged: true,
        objective_trace: vec![objective],
    }
}

fn hop_distances(adj: &[Vec<(EdgeId, NodeId)>], from: NodeId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(_, v) in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Certified lower bound on the optimal discrete routing cost, obtained
/// by deflating the fractional objective by the fit's worst-case ratio.
pub fn fractional_lower_bound(sol: &FractionalSolution, fit: &PowerFit) -> f64 {
    sol.objective / fit.phi
}

fn marginal_weights(fit: &PowerFit, loads: &[f64]) -> Vec<f64> {
    loads.iter().map(|&x| fit.marginal(x)).collect()
}

fn path_with_weight(net: &Network, path: PathEdges, weight: f64) -> ActivePath {
    let mut dirs = Vec::with_capacity(path.edges.len());
    for (edge, from) in path.edges.iter().zip(&path.nodes) {
        dirs.push(if net.link(*edge).u == *from {
            1.0
        } else {
            -1.0
        });
    }
    ActivePath {
        edges: path.edges,
        dirs,
        weight,
    }
}

fn blend_toward(ws: &mut Workspace, net: &Network, fw_paths: &[PathEdges], gamma: f64) {
    if gamma <= 0.0 {
        return;
    }
    for (i, path) in fw_paths.iter().enumerate() {
        for p in &mut ws.active[i] {
            p.weight *= 1.0 - gamma;
        }
        if let Some(existing) = ws.active[i].iter_mut().find(|p| p.edges == path.edges) {
            existing.weight += gamma;
        } else {
            ws.active[i].push(path_with_weight(net, path.clone(), gamma));
        }
    }
}

/// Exact minimization of the blended objective over gamma in [0, 1]; the
/// blend of two feasible flows is feasible and the objective along it is
/// convex, so a ternary search converges to the global minimizer.
fn line_search_blend(ws: &Workspace, current: &[Vec<f64>], target: &[Vec<ActivePath>]) -> f64 {
    let e = ws.net.edge_count();
    let mut target_flows = vec![vec![0.0; e]; ws.demands.len()];
    for (i, paths) in target.iter().enumerate() {
        let amount = ws.demands[i].amount as f64;
        for p in paths {
            for (edge, dir) in p.edges.iter().zip(&p.dirs) {
                target_flows[i][*edge] += amount * p.weight * dir;
            }
        }
    }
    let eval = |gamma: f64| -> f64 {
        let mut obj = 0.0;
        for edge in 0..e {
            let mut load = 0.0;
            for i in 0..ws.demands.len() {
                load += ((1.0 - gamma) * current[i][edge] + gamma * target_flows[i][edge]).abs();
            }
            obj += ws.fit.eval(load);
        }
        obj
    };
    let gamma = ternary_min(&eval, 0.0, 1.0);
    if eval(gamma) <= eval(0.0) {
        gamma
    } else {
        0.0
    }
}

/// Moves mass within each demand from its most expensive active path to
/// its cheapest one, with an exact step. Marginal costs are refreshed
/// after every demand so each move is a descent step on its own.
fn rebalance_sweep(ws: &mut Workspace) {
    let e = ws.net.edge_count();
    for i in 0..ws.demands.len() {
        if ws.active[i].len() < 2 {
            continue;
        }
        let flows = ws.signed_flows();
        let loads = ws.loads_of(&flows);
        let weights = marginal_weights(ws.fit, &loads);

        let path_cost = |p: &ActivePath| -> f64 { p.edges.iter().map(|&e| weights[e]).sum() };
        let mut hi = 0;
        let mut lo = 0;
        for (j, p) in ws.active[i].iter().enumerate() {
            if p.weight > 0.0 && path_cost(p) > path_cost(&ws.active[i][hi]) {
                hi = j;
            }
            if path_cost(p) < path_cost(&ws.active[i][lo]) {
                lo = j;
            }
        }
        if hi == lo || ws.active[i][hi].weight <= 0.0 {
            continue;
        }
        if path_cost(&ws.active[i][hi]) - path_cost(&ws.active[i][lo]) <= 1e-15 {
            continue;
        }

        // Load contributed by every other demand stays fixed during the move.
        let mut base = vec![0.0; e];
        for (j, per_demand) in flows.iter().enumerate() {
            if j != i {
                for (edge, f) in per_demand.iter().enumerate() {
                    base[edge] += f.abs();
                }
            }
        }
        let amount = ws.demands[i].amount as f64;
        let mut delta = vec![0.0; e];
        for (edge, dir) in ws.active[i][lo].edges.iter().zip(&ws.active[i][lo].dirs) {
            delta[*edge] += amount * dir;
        }
        for (edge, dir) in ws.active[i][hi].edges.iter().zip(&ws.active[i][hi].dirs) {
            delta[*edge] -= amount * dir;
        }
        let own = &flows[i];
        let eval = |shift: f64| -> f64 {
            let mut obj = 0.0;
            for edge in 0..e {
                let load = base[edge] + (own[edge] + shift * delta[edge]).abs();
                obj += ws.fit.eval(load);
            }
            obj
        };
        let max_shift = ws.active[i][hi].weight;
        let shift = ternary_min(&eval, 0.0, max_shift);
        if shift > 0.0 && eval(shift) <= eval(0.0) {
            ws.active[i][hi].weight -= shift;
            ws.active[i][lo].weight += shift;
        }
    }
}

fn prune(ws: &mut Workspace) {
    for paths in &mut ws.active {
        paths.retain(|p| p.weight > 1e-15);
        let total: f64 = paths.iter().map(|p| p.weight).sum();
        for p in paths.iter_mut() {
            p.weight /= total;
        }
    }
}

fn ternary_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo + hi) / 2.0
}

#[derive(Debug, Clone)]
struct PathEdges {
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

impl PartialEq for PathEdges {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
    }
}

/// Deterministic Dijkstra over the multigraph. Distances compare first by
/// weight sum and then by hop count, so zero-weight regions resolve to
/// minimum-hop routes; remaining ties keep the lowest-id edge.
fn shortest_path(
    adj: &[Vec<(EdgeId, NodeId)>],
    weights: &[f64],
    src: NodeId,
    dst: NodeId,
) -> Option<(f64, PathEdges)> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![u32::MAX; n];
    let mut pred: Vec<Option<(EdgeId, NodeId)>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    hops[src] = 0;

    loop {
        let mut u = usize::MAX;
        for v in 0..n {
            if done[v] || dist[v].is_infinite() {
                continue;
            }
            if u == usize::MAX || dist[v] < dist[u] || (dist[v] == dist[u] && hops[v] < hops[u]) {
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for &(e, v) in &adj[u] {
            if done[v] {
                continue;
            }
            let nd = dist[u] + weights[e];
            let nh = hops[u] + 1;
            if nd < dist[v] || (nd == dist[v] && nh < hops[v]) {
                dist[v] = nd;
                hops[v] = nh;
                pred[v] = Some((e, u));
            }
        }
    }

    if dist[dst].is_infinite() {
        return None;
    }
    let mut nodes = vec![dst];
    let mut edges = Vec::new();
    let mut at = dst;
    while at != src {
        let (e, prev) = pred[at].expect("predecessor chain");
        edges.push(e);
        nodes.push(prev);
        at = prev;
    }
    nodes.reverse();
    edges.reverse();
    Some((dist[dst], PathEdges { nodes, edges }))
}
