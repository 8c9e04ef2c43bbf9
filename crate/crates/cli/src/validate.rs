//! `validate`: check inputs without running anything.

use std::path::Path;

use anyhow::Result;

use crate::analyze::read_performance;
use crate::config::{Overrides, RunConfig};

pub struct Validated {
    pub scenarios: usize,
    pub radios: usize,
    /// Shape of the performance matrix, when one was given.
    pub performance: Option<(usize, usize)>,
}

pub fn run(config: Option<&Path>, ov: &Overrides, performance: Option<&Path>) -> Result<Validated> {
    let cfg = RunConfig::load(config, ov)?;
    let scenarios = cfg.scenarios()?;
    let radios = cogbench_core::radio::enumerate_grid(&cfg.grid, &cfg.policy_params.cost_table).len();
    let performance = performance.map(read_performance).transpose()?.map(|m| (m.rows(), m.cols()));
    Ok(Validated { scenarios: scenarios.len(), radios, performance })
}
