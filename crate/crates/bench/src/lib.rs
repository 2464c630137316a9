//! Inputs shared by the benchmarks.

use mcpd_core::rng::chain_rng;
use mcpd_core::{generate_series, scenario};

/// One generated series from a built-in scenario.
pub fn scenario_series(name: &str, seed: u64) -> Vec<f64> {
    let spec = scenario(name).expect("built-in scenario");
    generate_series(&spec, &mut chain_rng(seed))
        .expect("valid scenario")
        .x
}
