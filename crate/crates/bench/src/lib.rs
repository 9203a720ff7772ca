//! Shared fixtures for the benchmark targets.

use rateroute_core::generator::{gen_random, RateTableSpec};
use rateroute_core::Instance;

/// Desk-scale instance the exact oracle can still certify.
pub fn small_instance(seed: u64) -> Instance {
    let spec = RateTableSpec {
        states: 3,
        sigma_max: 2.0,
        max_amount: 2,
    };
    gen_random(7, 0.4, 3, &spec, seed).expect("generation succeeds")
}

/// Larger instance for the fractional solver, beyond oracle reach.
pub fn medium_instance(seed: u64) -> Instance {
    let spec = RateTableSpec {
        states: 4,
        sigma_max: 2.5,
        max_amount: 3,
    };
    gen_random(16, 0.3, 6, &spec, seed).expect("generation succeeds")
}
