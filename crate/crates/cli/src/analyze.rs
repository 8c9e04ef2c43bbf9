//! `analyze`: factor analysis of a performance matrix.

use std::path::Path;

use anyhow::{Context, Result};
use cogbench_core::fa::{analyze as fit, Analysis};
use cogbench_core::harness::PerformanceMatrix;
use cogbench_core::{Method, Rotation};
use serde::{Deserialize, Serialize};

use crate::config::FaConfig;
use crate::error::CliError;
use crate::table::{num, write_json, Table};

pub const LOADINGS_CSV: &str = "loadings.csv";
pub const EIGENVALUES_CSV: &str = "eigenvalues.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const RESIDUALS_CSV: &str = "residuals.csv";
pub const FA_REPORT_JSON: &str = "fa_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaReport {
    pub method: Method,
    pub rotation: Rotation,
    pub retention: f64,
    pub n_factors: Option<usize>,
    #[serde(rename = "retained_I")]
    pub retained: usize,
    pub converged: bool,
    pub iterations: usize,
    pub rmsr: f64,
    /// Uniqueness clamps on the final iteration.
    pub heywood: usize,
    pub dropped_columns: Vec<String>,
    pub n_radios: usize,
    pub n_variables: usize,
    /// Mean communality of the retained factors.
    pub explained_common: f64,
}

pub fn read_performance(path: &Path) -> Result<PerformanceMatrix> {
    let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    PerformanceMatrix::read_csv(std::io::BufReader::new(file)).map_err(|e| {
        let file = path.display().to_string();
        match e {
            cogbench_core::Error::Row { line, message } => CliError::invalid(file, Some(line as usize), None, message),
            e => CliError::invalid(file, None, None, e.to_string()),
        }
        .into()
    })
}

pub fn factor_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("F{i}")).collect()
}

pub fn run(input: &Path, out: &Path, fa: &FaConfig) -> Result<(FaReport, Analysis, PerformanceMatrix)> {
    let perf = read_performance(input)?;
    if perf.rows() < 2 {
        return Err(CliError::invalid(input.display().to_string(), None, None, "need at least two radios").into());
    }
    let analysis = fit(&perf.values, fa.method, &fa.options())?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let Analysis { sigma, initial_eigenvalues, model } = &analysis;
    let labels: Vec<String> = sigma.kept.iter().map(|&j| perf.columns[j].to_string()).collect();
    for &j in &sigma.dropped {
        log::warn!("column {} is constant and was dropped", perf.columns[j]);
    }
    let k = model.retained;
    let names = factor_names(k);

    let mut t = Table::new(std::iter::once("variable".to_string()).chain(names.iter().cloned()));
    for (i, label) in labels.iter().enumerate() {
        t.push(std::iter::once(label.clone()).chain((0..k).map(|j| num(model.lambda[(i, j)]))).collect());
    }
    t.write(&out.join(LOADINGS_CSV))?;

    let mut t = Table::new(["factor", "eigenvalue", "initial_eigenvalue", "retained"]);
    for i in 0..model.eigenvalues.len() {
        t.push(vec![
            (i + 1).to_string(),
            num(model.eigenvalues[i]),
            num(initial_eigenvalues[i]),
            u8::from(i < k).to_string(),
        ]);
    }
    t.write(&out.join(EIGENVALUES_CSV))?;

    let scores = model.scores.as_ref().expect("analyze attaches scores");
    let g = model.g_score.as_ref().expect("analyze attaches scores");
    let mut t = Table::new(
        std::iter::once("radio_id".to_string()).chain(names.iter().cloned()).chain(std::iter::once("g".to_string())),
    );
    for (n, radio) in perf.radios.iter().enumerate() {
        let mut row = vec![radio.radio_id.to_string()];
        row.extend((0..k).map(|j| num(scores[(n, j)])));
        row.push(num(g[n]));
        t.push(row);
    }
    t.write(&out.join(SCORES_CSV))?;

    let mut t = Table::new(std::iter::once("variable".to_string()).chain(labels.iter().cloned()));
    for (i, label) in labels.iter().enumerate() {
        t.push(std::iter::once(label.clone()).chain((0..labels.len()).map(|j| num(model.residual[(i, j)]))).collect());
    }
    t.write(&out.join(RESIDUALS_CSV))?;

    let report = FaReport {
        method: model.method,
        rotation: model.rotation,
        retention: fa.retention,
        n_factors: fa.n_factors,
        retained: k,
        converged: model.converged,
        iterations: model.iterations,
        rmsr: model.rmsr(),
        heywood: model.heywood,
        dropped_columns: sigma.dropped.iter().map(|&j| perf.columns[j].to_string()).collect(),
        n_radios: perf.rows(),
        n_variables: labels.len(),
        explained_common: model.communalities().sum() / labels.len() as f64,
    };
    write_json(&out.join(FA_REPORT_JSON), &report)?;
    Ok((report, analysis, perf))
}

/// Variables with the largest absolute loading on factor `j`, strongest
/// first; ties keep variable order.
pub fn top_loadings(labels: &[String], loadings: &[Vec<f64>], j: usize, n: usize) -> Vec<(String, f64)> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by(|&a, &b| loadings[b][j].abs().total_cmp(&loadings[a][j].abs()).then(a.cmp(&b)));
    idx.into_iter().take(n).map(|i| (labels[i].clone(), loadings[i][j])).collect()
}

pub fn print_summary(report: &FaReport, analysis: &Analysis, perf: &PerformanceMatrix, out: &Path) {
    let model = &analysis.model;
    println!(
        "retained_I = {} ({:?}, rotation {:?}, converged {} after {} iterations, rmsr {:.4})",
        report.retained, report.method, report.rotation, report.converged, report.iterations, report.rmsr
    );
    if !report.dropped_columns.is_empty() {
        println!("dropped constant columns: {}", report.dropped_columns.join(", "));
    }
    let labels: Vec<String> = analysis.sigma.kept.iter().map(|&j| perf.columns[j].to_string()).collect();
    let rows: Vec<Vec<f64>> =
        (0..labels.len()).map(|i| (0..report.retained).map(|j| model.lambda[(i, j)]).collect()).collect();
    for j in 0..report.retained {
        let top: Vec<String> =
            top_loadings(&labels, &rows, j, 5).into_iter().map(|(l, v)| format!("{l} {v:+.3}")).collect();
        println!("  F{}: {}", j + 1, top.join(", "));
    }
    println!("wrote factor outputs to {}", out.display());
}
