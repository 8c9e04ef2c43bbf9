//! Run configuration, scenario loading and their diagnostics.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cogbench_core::env::default_scenarios;
use cogbench_core::{FaOptions, GridAxes, Method, PolicyKind, PolicyParams, Rotation, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Diagnostic};

/// Factor-analysis settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaConfig {
    pub method: Method,
    pub retention: f64,
    pub rotation: Rotation,
    /// Fixed factor count; the retention threshold decides when absent.
    pub n_factors: Option<usize>,
}

impl Default for FaConfig {
    fn default() -> Self {
        FaConfig { method: Method::Fa, retention: 1.0, rotation: Rotation::Varimax, n_factors: None }
    }
}

impl FaConfig {
    pub fn options(&self) -> FaOptions {
        FaOptions { retention: self.retention, n_factors: self.n_factors, rotation: self.rotation, ..FaOptions::default() }
    }
}

/// Everything a `simulate`/`analyze`/`report` run depends on. Relative paths
/// are resolved against the directory of the file they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Built-in 18-scenario set when absent.
    pub scenario_file: Option<PathBuf>,
    pub grid: GridAxes,
    /// Replaces every scenario's horizon when set.
    pub slots: Option<u64>,
    pub reps: u64,
    pub policy_params: PolicyParams,
    pub fa: FaConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 1,
            scenario_file: None,
            grid: GridAxes::default(),
            slots: None,
            reps: 200,
            policy_params: PolicyParams::default(),
            fa: FaConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenarios: Option<PathBuf>,
    pub policies: Option<Vec<PolicyKind>>,
    pub slots: Option<u64>,
    pub reps: Option<u64>,
    pub out: Option<PathBuf>,
    pub retention: Option<f64>,
    pub rotation: Option<Rotation>,
    pub method: Option<Method>,
    pub n_factors: Option<usize>,
}

impl RunConfig {
    /// Reads `path`, or the defaults when `None`, then applies `ov`.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = read(p)?;
                let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| json_error(p, &e))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.scenario_file = cfg.scenario_file.map(|f| base.join(f));
                cfg.out_dir = base.join(&cfg.out_dir);
                cfg
            }
        };
        cfg.apply(ov);
        cfg.check(path)?;
        Ok(cfg)
    }

    fn apply(&mut self, ov: &Overrides) {
        if let Some(s) = ov.seed {
            self.master_seed = s;
        }
        if let Some(f) = &ov.scenarios {
            self.scenario_file = Some(f.clone());
        }
        if let Some(p) = &ov.policies {
            self.grid.policies = p.clone();
        }
        if ov.slots.is_some() {
            self.slots = ov.slots;
        }
        if let Some(r) = ov.reps {
            self.reps = r;
        }
        if let Some(o) = &ov.out {
            self.out_dir = o.clone();
        }
        if let Some(r) = ov.retention {
            self.fa.retention = r;
        }
        if let Some(r) = ov.rotation {
            self.fa.rotation = r;
        }
        if let Some(m) = ov.method {
            self.fa.method = m;
        }
        if ov.n_factors.is_some() {
            self.fa.n_factors = ov.n_factors;
        }
    }

    fn check(&self, path: Option<&Path>) -> Result<()> {
        let mut problems = Vec::new();
        let g = &self.grid;
        if self.reps == 0 {
            problems.push("reps must be >= 1".to_string());
        }
        if self.slots == Some(0) {
            problems.push("slots must be >= 1".to_string());
        }
        if g.policies.is_empty() || g.sensors.is_empty() || g.accuracies.is_empty() || g.hw_delays.is_empty() {
            problems.push("every grid axis needs at least one value".to_string());
        }
        if g.sensors.contains(&0) {
            problems.push("sensor counts must be >= 1".to_string());
        }
        if g.accuracies.iter().any(|a| !(0.5..=1.0).contains(a)) {
            problems.push("accuracies must lie in [0.5, 1]".to_string());
        }
        if g.hw_delays.iter().any(|h| !(0.0..1.0).contains(h)) {
            problems.push("hardware delays must lie in [0, 1)".to_string());
        }
        if !(self.fa.retention.is_finite() && self.fa.retention >= 0.0) {
            problems.push("fa.retention must be a finite number >= 0".to_string());
        }
        if let Some(f) = &self.scenario_file {
            if !f.is_file() {
                problems.push(format!("scenario file {} not found", f.display()));
            }
        }
        if problems.is_empty() {
            return Ok(());
        }
        let file = path.map_or_else(|| "<command line>".to_string(), |p| p.display().to_string());
        Err(CliError::InvalidFile {
            diagnostics: problems
                .into_iter()
                .map(|message| Diagnostic { file: file.clone(), line: None, column: None, message })
                .collect(),
            file,
        }
        .into())
    }

    /// Scenarios from `scenario_file` or the built-in set.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        match &self.scenario_file {
            None => Ok(default_scenarios()),
            Some(p) => load_scenarios(p),
        }
    }

    /// SHA-256 over the experiment definition: seed, grid, horizon, reps,
    /// policy parameters and the full scenario contents. Output location and
    /// analysis settings do not enter the hash.
    pub fn experiment_hash(&self, scenarios: &[Scenario]) -> String {
        #[derive(Serialize)]
        struct Experiment<'a> {
            master_seed: u64,
            grid: &'a GridAxes,
            slots: Option<u64>,
            reps: u64,
            policy_params: &'a PolicyParams,
            scenarios: &'a [Scenario],
        }
        let exp = Experiment {
            master_seed: self.master_seed,
            grid: &self.grid,
            slots: self.slots,
            reps: self.reps,
            policy_params: &self.policy_params,
            scenarios,
        };
        sha256_hex(&serde_json::to_vec(&exp).expect("experiment serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json_error(path: &Path, e: &serde_json::Error) -> anyhow::Error {
    let (line, col) = if e.line() > 0 { (Some(e.line()), Some(e.column())) } else { (None, None) };
    CliError::invalid(path.display().to_string(), line, col, e.to_string()).into()
}

/// Parses and validates a scenario file (a JSON array of scenarios). Semantic
/// problems are reported at the line of the offending scenario's
/// `scenario_id` key.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let text = read(path)?;
    let scenarios: Vec<Scenario> = serde_json::from_str(&text).map_err(|e| json_error(path, &e))?;
    let file = path.display().to_string();
    let lines = key_lines(&text, "\"scenario_id\"");
    let mut diagnostics = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    if scenarios.is_empty() {
        diagnostics.push(Diagnostic { file: file.clone(), line: Some(1), column: None, message: "no scenarios".into() });
    }
    for (i, s) in scenarios.iter().enumerate() {
        let line = lines.get(i).copied();
        let mut report = |message: String| diagnostics.push(Diagnostic { file: file.clone(), line, column: None, message });
        if let Err(e) = s.validate() {
            report(format!("scenario #{}: {e}", i + 1));
        }
        if !seen.insert(s.scenario_id) {
            report(format!("scenario #{}: duplicate scenario_id {}", i + 1, s.scenario_id));
        }
    }
    if diagnostics.is_empty() {
        Ok(scenarios)
    } else {
        Err(CliError::InvalidFile { file, diagnostics }.into())
    }
}

/// 1-based line numbers of each occurrence of `key`.
fn key_lines(text: &str, key: &str) -> Vec<usize> {
    text.lines().enumerate().flat_map(|(i, l)| std::iter::repeat_n(i + 1, l.matches(key).count())).collect()
}
