//! `simulate`: run the radio grid over the scenarios and write
//! `performance.csv` with its manifest.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use cogbench_core::harness::{self, Metric, PerformanceMatrix};
use cogbench_core::policy::PolicyKind;
use cogbench_core::radio::enumerate_grid;
use cogbench_core::{GridAxes, PolicyParams};
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::table::{write_file, write_json};

pub const PERFORMANCE_CSV: &str = "performance.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    /// Hash of the experiment definition, see [`RunConfig::experiment_hash`].
    pub config_hash: String,
    /// File name of the scenario file, or `built-in`.
    pub scenario_source: String,
    pub scenarios_sha256: String,
    pub scenario_ids: Vec<u64>,
    pub radios: usize,
    pub columns: usize,
    pub slots: Option<u64>,
    pub reps: u64,
    pub grid: GridAxes,
    pub policy_params: PolicyParams,
    pub dry_run: bool,
    pub performance_sha256: Option<String>,
    /// Only present with `--record-timing`; keeps default outputs
    /// byte-reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

pub struct Simulation {
    pub manifest: Manifest,
    pub matrix: Option<PerformanceMatrix>,
}

pub fn run(cfg: &RunConfig, dry_run: bool, record_timing: bool) -> Result<Simulation> {
    let start = Instant::now();
    let scenarios = cfg.scenarios()?;
    let radios = enumerate_grid(&cfg.grid, &cfg.policy_params.cost_table);
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        config_hash: cfg.experiment_hash(&scenarios),
        scenario_source: cfg
            .scenario_file
            .as_ref()
            .and_then(|p| p.file_name())
            .map_or_else(|| "built-in".into(), |n| n.to_string_lossy().into_owned()),
        scenarios_sha256: sha256_hex(&serde_json::to_vec(&scenarios)?),
        scenario_ids: scenarios.iter().map(|s| s.scenario_id).collect(),
        radios: radios.len(),
        columns: 3 * scenarios.len(),
        slots: cfg.slots,
        reps: cfg.reps,
        grid: cfg.grid.clone(),
        policy_params: cfg.policy_params,
        dry_run,
        performance_sha256: None,
        wall_time_secs: None,
    };

    let matrix = if dry_run {
        None
    } else {
        log::info!("simulating {} radios x {} scenarios, {} reps", radios.len(), scenarios.len(), cfg.reps);
        let m = harness::simulate(&radios, &scenarios, cfg.slots, cfg.reps, cfg.master_seed, &cfg.policy_params)?;
        let mut bytes = Vec::new();
        m.write_csv(&mut bytes)?;
        write_file(&out.join(PERFORMANCE_CSV), &bytes)?;
        manifest.performance_sha256 = Some(sha256_hex(&bytes));
        Some(m)
    };
    if record_timing {
        manifest.wall_time_secs = Some(start.elapsed().as_secs_f64());
    }
    write_json(&out.join(MANIFEST_JSON), &manifest)?;
    Ok(Simulation { manifest, matrix })
}

/// Mean aggregate throughput per policy, in grid order.
pub fn cluster_means(m: &PerformanceMatrix) -> Vec<(PolicyKind, f64)> {
    let mut kinds: Vec<PolicyKind> = Vec::new();
    for r in &m.radios {
        if !kinds.contains(&r.policy) {
            kinds.push(r.policy);
        }
    }
    kinds.into_iter().filter_map(|k| harness::policy_mean(m, Metric::Throughput, k).map(|v| (k, v))).collect()
}

pub fn print_summary(sim: &Simulation, out: &Path) {
    let man = &sim.manifest;
    match &sim.matrix {
        None => println!("dry run: {} radios x {} columns planned; wrote {}", man.radios, man.columns, out.join(MANIFEST_JSON).display()),
        Some(m) => {
            println!("wrote {} ({} x {})", out.join(PERFORMANCE_CSV).display(), m.rows(), m.cols());
            for (k, v) in cluster_means(m) {
                println!("  {k:<7} mean aggregate throughput {v:.4}");
            }
        }
    }
}
