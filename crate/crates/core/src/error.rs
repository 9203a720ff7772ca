use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exceeds maximum rate: load {load} > R_max {max}")]
    ExceedsMaxRate { load: f64, max: f64 },

    #[error("degenerate domain: the largest rate must exceed 1")]
    DegenerateDomain,

    #[error("infeasible: no path for demand {demand} ({src} -> {dst})")]
    NoPath {
        demand: usize,
        src: String,
        dst: String,
    },

    #[error("non-convex objective: fitted exponent {beta} < 1 (enable clamping to force 1)")]
    NonConvexObjective { beta: f64 },

    #[error("malformed fractional flow: {0}")]
    MalformedFlow(String),

    #[error("no path to sample for demand {0}")]
    EmptyDecomposition(usize),

    #[error("rate overflow on edge {edge}: load {load} > R_max {max}")]
    RateOverflow { edge: usize, load: u64, max: f64 },

    #[error("no feasible rounding found in {trials} trials")]
    NoFeasibleRounding { trials: usize },

    #[error("instance too large for oracle: {0}")]
    OracleBudget(String),

    #[error("infeasible: no routing fits the rate table")]
    Infeasible,

    #[error("could not generate connected instance after {0} attempts")]
    GeneratorRetries(usize),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
