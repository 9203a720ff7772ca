//! Unsplittable demand routing over networks whose links run at one of a
//! discrete set of rates, each with a fixed power cost.
//!
//! Routing a demand set then means picking one path per demand so that
//! the total cost of the rate states forced by the resulting loads is
//! small. The solve happens in three stages:
//!
//! 1. [`fitting`] replaces the discrete cost table with a power law
//!    `g(x) = mu * x^beta` fitted by integral least squares in log space,
//!    and measures the worst-case ratio between the two.
//! 2. [`relaxation`] solves the induced convex fractional multicommodity
//!    flow with a conditional-gradient scheme, certifying a duality gap.
//! 3. [`rounding`] decomposes each demand's flow into weighted paths,
//!    samples one per demand, and powers each used link at the minimal
//!    rate state covering its load.
//!
//! [`oracle`] solves desk-size instances exactly for ground truth,
//! [`generator`] produces seeded random instances and the two-rate
//! gadget family, and [`pipeline`] wires the stages together.
//!
//! ```
//! use rateroute_core::{
//!     generator::{gen_random, RateTableSpec},
//!     pipeline::{run_pipeline, PipelineConfig},
//! };
//!
//! let instance = gen_random(6, 0.5, 2, &RateTableSpec::default(), 7).unwrap();
//! let cfg = PipelineConfig { clamp_beta: true, ..PipelineConfig::default() };
//! let out = run_pipeline(&instance, &cfg).unwrap();
//! assert!(out.integral.total_cost >= out.lower_bound);
//! ```

pub mod error;
pub mod fitting;
pub mod generator;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod relaxation;
pub mod rounding;

pub use error::{Error, Result};
pub use model::{
    Demand, EdgeId, FractionalSolution, Instance, IntegralSolution, Link, Network, NodeId,
    PowerFit, RoutedPath, StepCost, ValidationReport, Violation,
};
