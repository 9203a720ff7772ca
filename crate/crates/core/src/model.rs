//! Core domain types: networks, demands, rate tables and the two solution
//! forms, plus instance validation and the canonical JSON format.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// An undirected link between two nodes. Parallel links are distinct
/// resources: each has its own id and is rated independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub id: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
}

/// An undirected multigraph with stable, dense edge ids.
#[derive(Debug, Clone)]
pub struct Network {
    names: Vec<String>,
    links: Vec<Link>,
}

impl Network {
    /// Builds a network from node names and endpoint pairs; edge ids are
    /// assigned in order of appearance.
    pub fn new<S: Into<String>>(names: Vec<S>, endpoints: &[(NodeId, NodeId)]) -> Self {
        let links = endpoints
            .iter()
            .enumerate()
            .map(|(id, &(u, v))| Link { id, u, v })
            .collect();
        Network {
            names: names.into_iter().map(Into::into).collect(),
            links,
        }
    }

    pub fn with_links(names: Vec<String>, links: Vec<Link>) -> Self {
        Network { names, links }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, edge: EdgeId) -> Link {
        self.links[edge]
    }

    /// The endpoint of `edge` opposite to `node`.
    pub fn other_end(&self, edge: EdgeId, node: NodeId) -> NodeId {
        let l = self.links[edge];
        if l.u == node {
            l.v
        } else {
            l.u
        }
    }

    /// Per-node incidence lists with entries ascending by edge id.
    /// Links with out-of-range endpoints or self-loops are skipped; run
    /// [`validate_instance`] first to surface those.
    pub fn adjacency(&self) -> Vec<Vec<(EdgeId, NodeId)>> {
        let n = self.names.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.links {
            if l.u < n && l.v < n && l.u != l.v {
                adj[l.u].push((l.id, l.v));
                adj[l.v].push((l.id, l.u));
            }
        }
        adj
    }

    /// Whether `a` and `b` are in the same connected component.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        if a == b {
            return true;
        }
        let adj = self.adjacency();
        if a >= adj.len() || b >= adj.len() {
            return false;
        }
        let mut seen = vec![false; adj.len()];
        let mut queue = VecDeque::from([a]);
        seen[a] = true;
        while let Some(u) = queue.pop_front() {
            for &(_, v) in &adj[u] {
                if v == b {
                    return true;
                }
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        false
    }
}

/// A point-to-point traffic demand of a whole number of units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Demand {
    pub source: NodeId,
    pub sink: NodeId,
    pub amount: u64,
}

/// The discrete rate/cost table shared by all links: a link carrying load
/// `x` must run at the smallest rate state that covers `x`, and pays that
/// state's fixed cost.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCost {
    /// Ascending rate states.
    pub rates: Vec<f64>,
    /// Cost of each state, non-decreasing and strictly positive.
    pub costs: Vec<f64>,
}

impl StepCost {
    pub fn new(rates: Vec<f64>, costs: Vec<f64>) -> Self {
        StepCost { rates, costs }
    }

    /// Number of rate states.
    pub fn states(&self) -> usize {
        self.rates.len()
    }

    pub fn max_rate(&self) -> f64 {
        *self.rates.last().expect("empty rate table")
    }

    /// Index of the minimal rate state supporting `load`.
    pub fn rate_index_for(&self, load: f64) -> Result<usize> {
        if load.is_nan() || load <= 0.0 {
            return Err(Error::Domain(format!(
                "step cost undefined for load {load}"
            )));
        }
        let idx = self.rates.partition_point(|&r| r < load);
        if idx == self.rates.len() {
            return Err(Error::ExceedsMaxRate {
                load,
                max: self.max_rate(),
            });
        }
        Ok(idx)
    }

    /// Step-function evaluation: the cost of the minimal rate state
    /// covering `x`. Undefined above the largest rate and at or below 0.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.costs[self.rate_index_for(x)?])
    }

    /// Largest ratio between adjacent state costs, 1 for a single state.
    pub fn step_ratio(&self) -> f64 {
        self.costs
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(1.0, f64::max)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.rates.is_empty() {
            out.push(Violation::EmptyRateTable);
            return out;
        }
        if self.rates.len() != self.costs.len() {
            out.push(Violation::RateTableLengthMismatch);
        }
        if self.rates.windows(2).any(|w| w[1] <= w[0]) {
            out.push(Violation::RatesNotAscending);
        }
        if self.rates[0] < 1.0 {
            out.push(Violation::MinRateBelowOne);
        }
        if self.costs.windows(2).any(|w| w[1] < w[0]) {
            out.push(Violation::CostsNotNonDecreasing);
        }
        if self.costs.iter().any(|&c| c.is_nan() || c <= 0.0) {
            out.push(Violation::CostsNotPositive);
        }
        out
    }
}

/// Fitted continuous stand-in for a [`StepCost`]: `g(x) = mu * x^beta`,
/// together with the measured worst-case ratio between the two functions
/// and the step-ratio statistics the quality bounds are phrased in.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerFit {
    pub mu: f64,
    pub beta: f64,
    /// max over [1, R_max] of max{f/g, g/f}.
    pub gap: f64,
    /// Largest adjacent cost ratio of the fitted table (1 for one state).
    pub sigma: f64,
    /// max{sigma, f(1)/mu}.
    pub phi: f64,
}

impl PowerFit {
    /// `g(x)`, with `g(0) = 0` so idle edges cost nothing.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.mu * x.powf(self.beta)
        }
    }

    /// `g'(x)`, the marginal cost of extra load on an edge.
    pub fn marginal(&self, x: f64) -> f64 {
        if x == 0.0 && self.beta > 1.0 {
            0.0
        } else {
            self.mu * self.beta * x.powf(self.beta - 1.0)
        }
    }
}

/// A fractional multicommodity flow. Per-demand flows are stored signed
/// against each link's (u, v) orientation; the aggregate load on a link is
/// the sum of per-demand magnitudes, so opposite demands do not cancel.
#[derive(Debug, Clone)]
pub struct FractionalSolution {
    /// `signed_flows[demand][edge]`, positive along the link's (u, v) order.
    pub signed_flows: Vec<Vec<f64>>,
    /// Aggregate load per edge.
    pub loads: Vec<f64>,
    /// Total fitted cost of the loads.
    pub objective: f64,
    /// Relative optimality certificate at termination.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration, for diagnostics.
    pub objective_trace: Vec<f64>,
}

impl FractionalSolution {
    /// Magnitude of demand `i`'s flow on `edge`.
    pub fn fraction(&self, demand: usize, edge: EdgeId) -> f64 {
        self.signed_flows[demand][edge].abs()
    }

    /// Nonzero flow magnitudes of one demand, keyed by edge id.
    pub fn flow_map(&self, demand: usize, min_flow: f64) -> BTreeMap<EdgeId, f64> {
        self.signed_flows[demand]
            .iter()
            .enumerate()
            .filter(|(_, f)| f.abs() >= min_flow)
            .map(|(e, f)| (e, f.abs()))
            .collect()
    }

    /// Worst node-balance violation of one demand's flow, relative to the
    /// demand's amount.
    pub fn conservation_residual_for(
        &self,
        net: &Network,
        demands: &[Demand],
        demand: usize,
    ) -> f64 {
        let d = &demands[demand];
        let mut balance = vec![0.0; net.node_count()];
        for l in net.links() {
            let f = self.signed_flows[demand][l.id];
            balance[l.u] -= f;
            balance[l.v] += f;
        }
        balance[d.source] += d.amount as f64;
        balance[d.sink] -= d.amount as f64;
        balance
            .into_iter()
            .fold(0.0f64, |w, b| w.max(b.abs() / d.amount as f64))
    }

    /// Worst node-balance violation across all demands.
    pub fn conservation_residual(&self, net: &Network, demands: &[Demand]) -> f64 {
        (0..demands.len())
            .map(|i| self.conservation_residual_for(net, demands, i))
            .fold(0.0, f64::max)
    }
}

/// A routed demand: the node sequence and, because parallel links exist,
/// the exact edge taken at every hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutedPath {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl RoutedPath {
    pub fn is_simple(&self) -> bool {
        let mut seen = self.nodes.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

/// One path per demand plus the per-link rate choice it forces.
#[derive(Debug, Clone)]
pub struct IntegralSolution {
    pub paths: Vec<RoutedPath>,
    /// Carried traffic per edge; 0 means the edge is off.
    pub loads: Vec<u64>,
    /// Chosen rate state per edge, `None` for idle edges.
    pub rates: Vec<Option<f64>>,
    /// Sum of step costs over powered edges.
    pub total_cost: f64,
}

/// A single structural problem found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { edge: EdgeId },
    UndeclaredEndpoint { edge: EdgeId },
    EdgeIdsNotDense,
    DegenerateDemand { demand: usize },
    UndeclaredDemandNode { demand: usize },
    ZeroAmount { demand: usize },
    DisconnectedDemand { demand: usize },
    EmptyRateTable,
    RateTableLengthMismatch,
    RatesNotAscending,
    MinRateBelowOne,
    CostsNotNonDecreasing,
    CostsNotPositive,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { edge } => write!(f, "self-loop on edge {edge}"),
            Violation::UndeclaredEndpoint { edge } => {
                write!(f, "edge {edge} references an undeclared node")
            }
            Violation::EdgeIdsNotDense => write!(f, "edge ids are not unique and dense"),
            Violation::DegenerateDemand { demand } => {
                write!(f, "degenerate demand {demand}: source equals sink")
            }
            Violation::UndeclaredDemandNode { demand } => {
                write!(f, "demand {demand} references an undeclared node")
            }
            Violation::ZeroAmount { demand } => write!(f, "demand {demand} has zero amount"),
            Violation::DisconnectedDemand { demand } => {
                write!(f, "disconnected demand pair {demand}")
            }
            Violation::EmptyRateTable => write!(f, "rate table is empty"),
            Violation::RateTableLengthMismatch => {
                write!(f, "rates and costs have different lengths")
            }
            Violation::RatesNotAscending => write!(f, "rates not strictly ascending"),
            Violation::MinRateBelowOne => write!(f, "minimum rate below 1"),
            Violation::CostsNotNonDecreasing => write!(f, "costs not non-decreasing"),
            Violation::CostsNotPositive => write!(f, "costs not strictly positive"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_message(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Static structural validation of an instance. Load-dependent feasibility
/// (whether some routing overflows the top rate) is a solver concern and is
/// not checked here.
pub fn validate_instance(net: &Network, demands: &[Demand], cost: &StepCost) -> ValidationReport {
    let mut violations = Vec::new();
    let n = net.node_count();

    let mut ids: Vec<EdgeId> = net.links().iter().map(|l| l.id).collect();
    ids.sort_unstable();
    if ids.iter().enumerate().any(|(i, &id)| i != id) {
        violations.push(Violation::EdgeIdsNotDense);
    }
    for l in net.links() {
        if l.u >= n || l.v >= n {
            violations.push(Violation::UndeclaredEndpoint { edge: l.id });
        } else if l.u == l.v {
            violations.push(Violation::SelfLoop { edge: l.id });
        }
    }

    for (i, d) in demands.iter().enumerate() {
        if d.source >= n || d.sink >= n {
            violations.push(Violation::UndeclaredDemandNode { demand: i });
            continue;
        }
        if d.source == d.sink {
            violations.push(Violation::DegenerateDemand { demand: i });
        }
        if d.amount == 0 {
            violations.push(Violation::ZeroAmount { demand: i });
        }
        if d.source != d.sink && !net.connected(d.source, d.sink) {
            violations.push(Violation::DisconnectedDemand { demand: i });
        }
    }

    violations.extend(cost.violations());
    ValidationReport { violations }
}

/// A complete problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub demands: Vec<Demand>,
    pub cost: StepCost,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    nodes: Vec<String>,
    edges: Vec<EdgeFile>,
    demands: Vec<DemandFile>,
    rates: Vec<RateFile>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    id: usize,
    u: String,
    v: String,
}

#[derive(Serialize, Deserialize)]
struct DemandFile {
    src: String,
    dst: String,
    amount: u64,
}

#[derive(Serialize, Deserialize)]
struct RateFile {
    speed: f64,
    cost: f64,
}

impl Instance {
    pub fn new(network: Network, demands: Vec<Demand>, cost: StepCost) -> Self {
        Instance {
            network,
            demands,
            cost,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_instance(&self.network, &self.demands, &self.cost)
    }

    /// Parses the canonical instance JSON and validates it.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let names = file.nodes;
        {
            let mut sorted = names.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInstance("duplicate node name".into()));
            }
        }
        let lookup = |name: &str| -> Result<NodeId> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidInstance(format!("unknown node {name:?}")))
        };

        let mut links = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            links.push(Link {
                id: e.id,
                u: lookup(&e.u)?,
                v: lookup(&e.v)?,
            });
        }
        links.sort_by_key(|l| l.id);

        let mut demands = Vec::with_capacity(file.demands.len());
        for d in &file.demands {
            demands.push(Demand {
                source: lookup(&d.src)?,
                sink: lookup(&d.dst)?,
                amount: d.amount,
            });
        }

        let cost = StepCost::new(
            file.rates.iter().map(|r| r.speed).collect(),
            file.rates.iter().map(|r| r.cost).collect(),
        );

        let instance = Instance::new(Network::with_links(names, links), demands, cost);
        let report = instance.validate();
        if !report.ok() {
            return Err(Error::InvalidInstance(report.to_message()));
        }
        Ok(instance)
    }

    /// Serializes to the canonical instance JSON (pretty, trailing newline).
    pub fn to_json_string(&self) -> String {
        let net = &self.network;
        let file = InstanceFile {
            nodes: net.names().to_vec(),
            edges: net
                .links()
                .iter()
                .map(|l| EdgeFile {
                    id: l.id,
                    u: net.name(l.u).to_string(),
                    v: net.name(l.v).to_string(),
                })
                .collect(),
            demands: self
                .demands
                .iter()
                .map(|d| DemandFile {
                    src: net.name(d.source).to_string(),
                    dst: net.name(d.sink).to_string(),
                    amount: d.amount,
                })
                .collect(),
            rates: self
                .cost
                .rates
                .iter()
                .zip(&self.cost.costs)
                .map(|(&speed, &cost)| RateFile { speed, cost })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("instance serialization");
        text.push('\n');
        text
    }
}
