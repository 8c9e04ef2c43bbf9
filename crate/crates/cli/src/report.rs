//! `report`: plot-ready tables built from the simulation and analysis
//! outputs.

use std::path::Path;

use anyhow::{Context, Result};
use cogbench_core::harness::{Metric, PerformanceMatrix};
use cogbench_core::policy::PolicyKind;
use serde::Deserialize;

use crate::analyze::{read_performance, top_loadings, FaReport, EIGENVALUES_CSV, FA_REPORT_JSON, LOADINGS_CSV};
use crate::error::CliError;
use crate::simulate::PERFORMANCE_CSV;
use crate::table::{num, Table};

pub const CLUSTERS_CSV: &str = "clusters.csv";
pub const CLUSTER_SUMMARY_CSV: &str = "cluster_summary.csv";
pub const SCREE_CSV: &str = "scree.csv";
pub const FACTOR_LABELS_CSV: &str = "factor_labels.csv";

/// Which factor axes to project onto.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Axes {
    /// Axes shared by every component file (1-based); factors 1 and 2 when
    /// `None`.
    pub fixed: Option<Vec<usize>>,
    /// One component file per entry; all remaining factors when `None`.
    pub vary: Option<Vec<usize>>,
}

impl Axes {
    fn requested(&self) -> bool {
        self.fixed.is_some() || self.vary.is_some()
    }
}

/// Variable loadings as read back from `loadings.csv`.
pub struct Loadings {
    pub variables: Vec<String>,
    /// One row per variable, one entry per factor.
    pub values: Vec<Vec<f64>>,
    pub factors: usize,
}

impl Loadings {
    pub fn read(path: &Path) -> Result<Self> {
        let t = Table::read(path)?;
        let factors = t.header.len().saturating_sub(1);
        let cols = (1..=factors).map(|j| t.floats(path, j)).collect::<Result<Vec<_>>>()?;
        Ok(Loadings {
            variables: t.rows.iter().map(|r| r[0].clone()).collect(),
            values: (0..t.rows.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
            factors,
        })
    }
}

pub struct ReportFiles {
    pub written: Vec<String>,
    pub notices: Vec<String>,
}

fn labels_file(path: &Path) -> Result<Vec<String>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Labels {
        List(Vec<String>),
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let Labels::List(v) = serde_json::from_str(&text).map_err(|e| {
        CliError::invalid(path.display().to_string(), Some(e.line()), Some(e.column()), e.to_string())
    })?;
    Ok(v)
}

/// Metric whose variables load most strongly, on average, on factor `j`.
fn dominant_metric(l: &Loadings, j: usize) -> Option<Metric> {
    Metric::ALL
        .into_iter()
        .filter_map(|m| {
            let v: Vec<f64> = l
                .variables
                .iter()
                .zip(&l.values)
                .filter(|(name, _)| name.ends_with(&format!("_{m}")))
                .map(|(_, row)| row[j].abs())
                .collect();
            (!v.is_empty()).then(|| (m, v.iter().sum::<f64>() / v.len() as f64))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m)
}

fn check_index(i: usize, retained: usize) -> Result<()> {
    if i == 0 || i > retained {
        return Err(CliError::FactorIndex { index: i, retained }.into());
    }
    Ok(())
}

pub fn run(dir: &Path, performance: Option<&Path>, axes: &Axes, labels: Option<&Path>) -> Result<ReportFiles> {
    let perf_path = performance.map_or_else(|| dir.join(PERFORMANCE_CSV), Path::to_path_buf);
    let perf = read_performance(&perf_path)?;
    let fa_path = dir.join(FA_REPORT_JSON);
    let fa_text = std::fs::read_to_string(&fa_path)
        .with_context(|| format!("reading {} (run `analyze` first)", fa_path.display()))?;
    let fa: FaReport = serde_json::from_str(&fa_text).map_err(|e| {
        CliError::invalid(fa_path.display().to_string(), Some(e.line()), Some(e.column()), e.to_string())
    })?;
    let loadings = Loadings::read(&dir.join(LOADINGS_CSV))?;
    let k = fa.retained;
    if loadings.factors != k {
        return Err(CliError::invalid(
            dir.join(LOADINGS_CSV).display().to_string(),
            Some(1),
            None,
            format!("{} factor columns but fa_report.json says retained_I = {k}", loadings.factors),
        )
        .into());
    }

    let mut files = ReportFiles { written: Vec::new(), notices: Vec::new() };
    let mut emit = |name: String, t: Table| -> Result<()> {
        t.write(&dir.join(&name))?;
        files.written.push(name);
        Ok(())
    };

    emit(CLUSTERS_CSV.into(), clusters(&perf))?;
    emit(CLUSTER_SUMMARY_CSV.into(), cluster_summary(&perf))?;

    let eig_path = dir.join(EIGENVALUES_CSV);
    let eig = Table::read(&eig_path)?;
    let mut scree = Table::new(["factor", "initial_eigenvalue", "eigenvalue", "retained"]);
    let (reduced, initial) = (eig.floats(&eig_path, 1)?, eig.floats(&eig_path, 2)?);
    for i in 0..eig.rows.len() {
        scree.push(vec![(i + 1).to_string(), num(initial[i]), num(reduced[i]), u8::from(i < k).to_string()]);
    }
    emit(SCREE_CSV.into(), scree)?;

    let user_labels = labels.map(labels_file).transpose()?.unwrap_or_default();
    if user_labels.len() > k {
        return Err(CliError::FactorIndex { index: user_labels.len(), retained: k }.into());
    }
    let mut t = Table::new(["factor", "label", "dominant_metric", "top_variables"]);
    for j in 0..k {
        let top: Vec<String> = top_loadings(&loadings.variables, &loadings.values, j, 3)
            .into_iter()
            .map(|(name, v)| format!("{name}:{}", num(v)))
            .collect();
        t.push(vec![
            (j + 1).to_string(),
            user_labels.get(j).cloned().unwrap_or_default(),
            dominant_metric(&loadings, j).map_or_else(String::new, |m| m.to_string()),
            top.join(";"),
        ]);
    }
    emit(FACTOR_LABELS_CSV.into(), t)?;

    if k < 3 && !axes.requested() {
        files.notices.push(format!("component tables skipped: {k} factor(s) retained, need at least 3"));
        return Ok(files);
    }
    let fixed = axes.fixed.clone().unwrap_or_else(|| vec![1, 2]);
    if fixed.len() != 2 || fixed[0] == fixed[1] {
        anyhow::bail!("--fix needs two distinct factor indices, got {fixed:?}");
    }
    for &i in fixed.iter().chain(axes.vary.iter().flatten()) {
        check_index(i, k)?;
    }
    let vary: Vec<usize> = match &axes.vary {
        Some(v) => v.clone(),
        None => (1..=k).filter(|i| !fixed.contains(i)).collect(),
    };
    if vary.is_empty() {
        files.notices.push("component tables skipped: no factor left to vary".into());
    }
    for &v in vary.iter().filter(|v| !fixed.contains(v)) {
        let mut axis = fixed.clone();
        axis.push(v);
        let name = format!("components_{}.csv", axis.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_"));
        let mut t = Table::new(std::iter::once("variable".to_string()).chain(axis.iter().map(|i| format!("F{i}"))));
        for (var, row) in loadings.variables.iter().zip(&loadings.values) {
            t.push(std::iter::once(var.clone()).chain(axis.iter().map(|&i| num(row[i - 1]))).collect());
        }
        emit(name, t)?;
    }
    Ok(files)
}

/// Per-radio totals over all scenarios.
fn clusters(perf: &PerformanceMatrix) -> Table {
    let totals: Vec<Vec<f64>> = Metric::ALL.iter().map(|&m| perf.aggregate(m)).collect();
    let mut t = Table::new([
        "radio_id",
        "policy",
        "m",
        "accuracy",
        "hw_delay",
        "total_throughput",
        "total_delay",
        "total_violation",
    ]);
    for (i, r) in perf.radios.iter().enumerate() {
        t.push(vec![
            r.radio_id.to_string(),
            r.policy.to_string(),
            r.m.to_string(),
            num(r.accuracy),
            num(r.hw_delay),
            num(totals[0][i]),
            num(totals[1][i]),
            num(totals[2][i]),
        ]);
    }
    t
}

fn cluster_summary(perf: &PerformanceMatrix) -> Table {
    let thr = perf.aggregate(Metric::Throughput);
    let delay = perf.aggregate(Metric::Delay);
    let viol = perf.aggregate(Metric::Violation);
    let mut t = Table::new([
        "policy",
        "radios",
        "mean_total_throughput",
        "sd_total_throughput",
        "min_total_throughput",
        "max_total_throughput",
        "mean_total_delay",
        "mean_total_violation",
    ]);
    for k in PolicyKind::ALL {
        let idx: Vec<usize> = (0..perf.rows()).filter(|&i| perf.radios[i].policy == k).collect();
        if idx.is_empty() {
            continue;
        }
        let n = idx.len() as f64;
        let mean = |v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / n;
        let m = mean(&thr);
        let sd = if idx.len() > 1 {
            (idx.iter().map(|&i| (thr[i] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = idx.iter().map(|&i| thr[i]).fold(f64::INFINITY, f64::min);
        let max = idx.iter().map(|&i| thr[i]).fold(f64::NEG_INFINITY, f64::max);
        t.push(vec![
            k.to_string(),
            idx.len().to_string(),
            num(m),
            num(sd),
            num(min),
            num(max),
            num(mean(&delay)),
            num(mean(&viol)),
        ]);
    }
    t
}
