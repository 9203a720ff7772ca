//! Seeded instance generators for tests and benchmarks: random graphs
//! with random demands and rate tables, plus the two-rate family whose
//! optimal cost reveals whether edge-disjoint routings exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Demand, Instance, Network, NodeId, StepCost};

/// Shape of the generated rate table.
#[derive(Debug, Clone, Copy)]
pub struct RateTableSpec {
    /// Number of rate states.
    pub states: usize,
    /// Cap on the ratio between adjacent state costs.
    pub sigma_max: f64,
    /// Demand amounts are drawn uniformly from 1..=max_amount.
    pub max_amount: u64,
}

impl Default for RateTableSpec {
    fn default() -> Self {
        RateTableSpec {
            states: 3,
            sigma_max: 2.0,
            max_amount: 1,
        }
    }
}

const MAX_GRAPH_ATTEMPTS: usize = 100;

/// Generates a connected-enough random instance: an Erdos-Renyi style
/// undirected graph, demands over distinct connected node pairs, and a
/// rate table whose top rate covers the sum of all demands so that no
/// routing can overflow it. Deterministic per seed.
pub fn gen_random(
    nodes: usize,
    edge_prob: f64,
    demand_count: usize,
    table: &RateTableSpec,
    seed: u64,
) -> Result<Instance> {
    if nodes < 2 || demand_count < 1 || table.states < 1 || table.max_amount < 1 {
        return Err(Error::Config(
            "generator parameters must be positive".into(),
        ));
    }
    let prob_ok = edge_prob > 0.0 && edge_prob < 1.0;
    if !prob_ok {
        return Err(Error::Config("edge probability must lie in (0, 1)".into()));
    }
    if table.sigma_max.is_nan() || table.sigma_max < 1.0 {
        return Err(Error::Config("sigma_max must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..MAX_GRAPH_ATTEMPTS {
        let mut endpoints = Vec::new();
        for u in 0..nodes {
            for v in (u + 1)..nodes {
                if rng.random::<f64>() < edge_prob {
                    endpoints.push((u, v));
                }
            }
        }
        let names: Vec<String> = (0..nodes).map(|i| format!("v{i}")).collect();
        let net = Network::new(names, &endpoints);

        let Some(demands) = sample_demands(&net, demand_count, table.max_amount, &mut rng) else {
            continue;
        };

        let total: u64 = demand_count as u64 * demands.iter().map(|d| d.amount).max().unwrap();
        let cost = sample_rate_table(table, total as f64, &mut rng);

        let instance = Instance::new(net, demands, cost);
        debug_assert!(instance.validate().ok());
        return Ok(instance);
    }
    Err(Error::GeneratorRetries(MAX_GRAPH_ATTEMPTS))
}

fn sample_demands(
    net: &Network,
    count: usize,
    max_amount: u64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Demand>> {
    let nodes = net.node_count();
    let mut used: Vec<(NodeId, NodeId)> = Vec::new();
    let mut demands = Vec::with_capacity(count);
    let mut attempts = 0;
    while demands.len() < count {
        attempts += 1;
        if attempts > 50 * count + 200 {
            return None;
        }
        let s = rng.random_range(0..nodes);
        let t = rng.random_range(0..nodes);
        if s == t {
            continue;
        }
        let key = (s.min(t), s.max(t));
        if used.contains(&key) || !net.connected(s, t) {
            continue;
        }
        used.push(key);
        let amount = rng.random_range(1..=max_amount);
        demands.push(Demand {
            source: s,
            sink: t,
            amount,
        });
    }
    Some(demands)
}

fn sample_rate_table(
    table: &RateTableSpec,
    needed_top_rate: f64,
    rng: &mut ChaCha8Rng,
) -> StepCost {
    let mut rates = Vec::with_capacity(table.states);
    let mut r = 1.0 + rng.random::<f64>();
    for _ in 0..table.states {
        rates.push(r);
        r *= 1.3 + 1.2 * rng.random::<f64>();
    }
    let top = *rates.last().unwrap();
    if top < needed_top_rate {
        let scale = needed_top_rate / top;
        for r in &mut rates {
            *r *= scale;
        }
    }
    let mut costs = Vec::with_capacity(table.states);
    let mut c = 0.5 + 1.5 * rng.random::<f64>();
    for _ in 0..table.states {
        costs.push(c);
        c *= 1.0 + (table.sigma_max - 1.0) * rng.random::<f64>();
    }
    StepCost::new(rates, costs)
}

/// Strictness margin on the expensive rate's cost, so the classification
/// threshold is numerically unambiguous.
const GADGET_MARGIN: f64 = 0.01;

/// Builds a two-rate instance over `net` whose exact optimum lands at or
/// below `rho * |E| * f(R1)` precisely when the given pairs admit
/// edge-disjoint paths: the cheap rate carries exactly one demand, and
/// the expensive rate costs more than routing everything over cheap
/// links could ever cost.
pub fn gen_edp_gadget(net: &Network, pairs: &[(NodeId, NodeId)], rho: f64) -> Result<Instance> {
    if pairs.is_empty() {
        return Err(Error::Config(
            "gadget needs at least one demand pair".into(),
        ));
    }
    if rho.is_nan() || rho < 1.0 {
        return Err(Error::Config("rho must be at least 1".into()));
    }
    let k = pairs.len() as u64;
    let edge_count = net.edge_count() as f64;
    // Integer base rate so demand amounts stay integral; the expensive
    // rate must cover all demands sharing one link and still exceed the
    // base rate when there is a single pair.
    let base_rate = 1u64;
    let top_rate = base_rate * k.max(2);
    let base_cost = 1.0;
    let top_cost = rho * edge_count * base_cost * (1.0 + GADGET_MARGIN);
    let cost = StepCost::new(
        vec![base_rate as f64, top_rate as f64],
        vec![base_cost, top_cost],
    );
    let demands = pairs
        .iter()
        .map(|&(source, sink)| Demand {
            source,
            sink,
            amount: base_rate,
        })
        .collect();
    let instance = Instance::new(net.clone(), demands, cost);
    let report = instance.validate();
    if !report.ok() {
        return Err(Error::InvalidInstance(report.to_message()));
    }
    Ok(instance)
}

/// The classification threshold for a gadget instance.
pub fn gadget_threshold(net: &Network, rho: f64) -> f64 {
    rho * net.edge_count() as f64
}
