//! Fixtures shared by the benchmarks.

use cogbench_core::env::default_scenarios;
use cogbench_core::policy::PolicyParams;
use cogbench_core::rng::{Stream, StreamKind};
use cogbench_core::synthetic::{sample_rows, simple_structure};
use cogbench_core::{Environment, PolicyKind, RadioSpec};

pub const SEED: u64 = 1;

/// First built-in scenario, resolved with [`SEED`].
pub fn scenario() -> Environment {
    default_scenarios()[0].resolve(SEED).expect("built-in scenario resolves")
}

/// A mid-grid radio: two sensors, accuracy 0.9, no hardware delay.
pub fn radio(policy: PolicyKind) -> RadioSpec {
    let m = if policy == PolicyKind::Random { 1 } else { 2 };
    RadioSpec { radio_id: 0, policy, m, accuracy: 0.9, hw_delay: 0.0, alg_cost: PolicyParams::default().cost_table.cost(policy) }
}

/// 144 rows of 54 variables drawn from a simple-structure model.
pub fn synthetic_rows(factors: usize) -> Vec<Vec<f64>> {
    let mut rng = Stream::derive(SEED, 0, 0, 0, StreamKind::Env);
    let lambda = simple_structure(54, factors, &mut rng);
    sample_rows(&lambda, 144, &mut rng)
}
