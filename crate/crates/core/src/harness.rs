//! Monte-Carlo experiment harness: every radio on every scenario for `R`
//! repetitions, averaged into a radio x (scenario x metric) matrix.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ChannelState, Environment, Scenario};
use crate::error::{Error, Result};
use crate::format::sig12;
use crate::policy::{Action, PolicyKind, PolicyParams};
use crate::radio::{run_slot, RadioSpec, RadioStreams};
use crate::rng::{Stream, StreamKind};

/// Per-slot averages of one (radio, scenario) cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTriple {
    pub throughput_y1: f64,
    pub delay_y2: f64,
    /// Violations per slot.
    pub violation_y3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Throughput,
    Delay,
    Violation,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Throughput, Metric::Delay, Metric::Violation];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::Delay => "delay",
            Metric::Violation => "violation",
        }
    }

    pub fn of(self, m: &MetricsTriple) -> f64 {
        match self {
            Metric::Throughput => m.throughput_y1,
            Metric::Delay => m.delay_y2,
            Metric::Violation => m.violation_y3,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one cell with the spread of per-repetition throughput.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub radio_id: u64,
    pub scenario_id: u64,
    pub metrics: MetricsTriple,
    /// Sample variance of the per-repetition mean throughput.
    pub throughput_rep_var: f64,
    pub reps: u64,
    pub violations: u64,
}

impl CellResult {
    /// Standard error of `metrics.throughput_y1`.
    pub fn throughput_se(&self) -> f64 {
        (self.throughput_rep_var / self.reps as f64).sqrt()
    }
}

/// One repetition of `spec` on `env`; returns (throughput sum, delay sum,
/// violation count).
fn run_rep(spec: &RadioSpec, env: &Environment, rep: u64, master_seed: u64, params: &PolicyParams) -> Result<(f64, f64, u64)> {
    let seed = |kind| Stream::derive(master_seed, spec.radio_id, env.scenario_id, rep, kind);
    let mut env_rng = seed(StreamKind::Env);
    let mut streams = RadioStreams { policy: seed(StreamKind::Policy), radio: seed(StreamKind::Radio) };
    let mut policy = spec.init_policy(env.num_channels(), env.horizon, params)?;
    let mut truth = ChannelState::initial(env, &mut env_rng)?;
    let mut prev = None;
    let (mut thr, mut delay, mut violations) = (0.0, 0.0, 0);
    for slot in 0..env.horizon {
        if slot > 0 {
            truth.advance(env, &mut env_rng)?;
        }
        let out = run_slot(spec, &mut policy, env, &truth, prev, &mut streams)?;
        thr += out.throughput;
        delay += out.delay;
        violations += out.violation as u64;
        if let Action::Play(a) = out.action {
            prev = Some(a);
        }
    }
    Ok((thr, delay, violations))
}

/// Runs `reps` seeded repetitions and averages over repetitions and slots.
pub fn run_cell(spec: &RadioSpec, env: &Environment, reps: u64, master_seed: u64, params: &PolicyParams) -> Result<CellResult> {
    if reps == 0 {
        return Err(Error::Config("need at least one repetition".into()));
    }
    let t = env.horizon as f64;
    let (mut sum_thr, mut sum_thr2, mut sum_delay, mut violations) = (0.0, 0.0, 0.0, 0);
    for rep in 0..reps {
        let (thr, delay, v) = run_rep(spec, env, rep, master_seed, params)?;
        let per_slot = thr / t;
        sum_thr += per_slot;
        sum_thr2 += per_slot * per_slot;
        sum_delay += delay / t;
        violations += v;
    }
    let r = reps as f64;
    let mean = sum_thr / r;
    let var = if reps > 1 { ((sum_thr2 - r * mean * mean) / (r - 1.0)).max(0.0) } else { 0.0 };
    Ok(CellResult {
        radio_id: spec.radio_id,
        scenario_id: env.scenario_id,
        metrics: MetricsTriple { throughput_y1: mean, delay_y2: sum_delay / r, violation_y3: violations as f64 / (r * t) },
        throughput_rep_var: var,
        reps,
        violations,
    })
}

/// Runs every (radio, scenario) cell in parallel on the current rayon pool.
/// Output order is radio-major, scenario-minor regardless of scheduling.
pub fn run_grid(
    radios: &[RadioSpec],
    envs: &[Environment],
    reps: u64,
    master_seed: u64,
    params: &PolicyParams,
) -> Result<Vec<CellResult>> {
    let jobs: Vec<(&RadioSpec, &Environment)> =
        radios.iter().flat_map(|r| envs.iter().map(move |e| (r, e))).collect();
    jobs.par_iter().map(|(r, e)| run_cell(r, e, reps, master_seed, params)).collect()
}

/// Resolves `scenarios`, runs the full grid and assembles the matrix.
/// `horizon`, when given, replaces every scenario's own horizon.
pub fn simulate(
    radios: &[RadioSpec],
    scenarios: &[Scenario],
    horizon: Option<u64>,
    reps: u64,
    master_seed: u64,
    params: &PolicyParams,
) -> Result<PerformanceMatrix> {
    let envs = scenarios
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(t) = horizon {
                s.horizon_t = t;
            }
            s.resolve(master_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = run_grid(radios, &envs, reps, master_seed, params)?;
    let ids: Vec<u64> = scenarios.iter().map(|s| s.scenario_id).collect();
    assemble(radios, &ids, &cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub scenario_id: u64,
    pub metric: Metric,
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}_{}", self.scenario_id, self.metric)
    }
}

impl FromStr for ColumnLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("malformed column label '{s}'"));
        let rest = s.strip_prefix('s').ok_or_else(bad)?;
        let (id, metric) = rest.split_once('_').ok_or_else(bad)?;
        let metric = Metric::ALL.into_iter().find(|m| m.as_str() == metric).ok_or_else(bad)?;
        Ok(ColumnLabel { scenario_id: id.parse().map_err(|_| bad())?, metric })
    }
}

/// The N x 3K matrix of averaged metrics, scenario-major, metric-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMatrix {
    pub radios: Vec<RadioSpec>,
    pub columns: Vec<ColumnLabel>,
    /// Row-major, `radios.len()` rows of `columns.len()` entries.
    pub values: Vec<Vec<f64>>,
}

const ROW_PREFIX: [&str; 6] = ["radio_id", "policy", "m", "accuracy", "hw_delay", "alg_cost"];

impl PerformanceMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Indices of the columns holding `metric`.
    pub fn metric_columns(&self, metric: Metric) -> Vec<usize> {
        (0..self.cols()).filter(|&j| self.columns[j].metric == metric).collect()
    }

    /// Rows whose radio satisfies `keep`, in order.
    pub fn select_rows(&self, keep: impl Fn(&RadioSpec) -> bool) -> PerformanceMatrix {
        let idx: Vec<usize> = (0..self.rows()).filter(|&i| keep(&self.radios[i])).collect();
        PerformanceMatrix {
            radios: idx.iter().map(|&i| self.radios[i].clone()).collect(),
            columns: self.columns.clone(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }

    /// `metric` summed over scenarios, per row.
    pub fn aggregate(&self, metric: Metric) -> Vec<f64> {
        let cols = self.metric_columns(metric);
        self.values.iter().map(|r| cols.iter().map(|&j| r[j]).sum()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> =
            ROW_PREFIX.iter().map(|s| s.to_string()).chain(self.columns.iter().map(|c| c.to_string())).collect();
        w.write_record(&header).map_err(csv_err)?;
        for (spec, row) in self.radios.iter().zip(&self.values) {
            let mut rec = vec![
                spec.radio_id.to_string(),
                spec.policy.to_string(),
                spec.m.to_string(),
                sig12(spec.accuracy),
                sig12(spec.hw_delay),
                sig12(spec.alg_cost),
            ];
            rec.extend(row.iter().map(|&v| sig12(v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.len() < ROW_PREFIX.len() || header.iter().zip(ROW_PREFIX).any(|(h, p)| h != p) {
            return Err(Error::Input(format!("performance header must start with {}", ROW_PREFIX.join(","))));
        }
        let columns = header
            .iter()
            .skip(ROW_PREFIX.len())
            .map(str::parse)
            .collect::<Result<Vec<ColumnLabel>>>()?;
        let mut radios = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let lineno = line as u64 + 2;
            if rec.len() != header.len() {
                return Err(Error::Row { line: lineno, message: format!("expected {} fields, found {}", header.len(), rec.len()) });
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Row { line: lineno, message: format!("column '{}': not a finite number", &header[i]) })
            };
            radios.push(RadioSpec {
                radio_id: rec[0].parse().map_err(|_| row(lineno, "bad radio_id"))?,
                policy: rec[1].parse().map_err(|e: Error| row(lineno, e.to_string()))?,
                m: rec[2].parse().map_err(|_| row(lineno, "bad m"))?,
                accuracy: num(3)?,
                hw_delay: num(4)?,
                alg_cost: num(5)?,
            });
            values.push((ROW_PREFIX.len()..rec.len()).map(num).collect::<Result<Vec<f64>>>()?);
        }
        Ok(PerformanceMatrix { radios, columns, values })
    }
}

fn row(line: u64, message: impl Into<String>) -> Error {
    Error::Row { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => row(pos.line(), e.to_string()),
        None => Error::Input(e.to_string()),
    }
}

/// Arranges cell results into the matrix: rows follow `radios`, columns
/// follow `scenario_ids` then (throughput, delay, violation).
pub fn assemble(radios: &[RadioSpec], scenario_ids: &[u64], cells: &[CellResult]) -> Result<PerformanceMatrix> {
    let by_key: HashMap<(u64, u64), &MetricsTriple> =
        cells.iter().map(|c| ((c.radio_id, c.scenario_id), &c.metrics)).collect();
    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(radios.len());
    for r in radios {
        let mut row = Vec::with_capacity(3 * scenario_ids.len());
        for &s in scenario_ids {
            match by_key.get(&(r.radio_id, s)) {
                Some(m) => row.extend(Metric::ALL.iter().map(|metric| metric.of(m))),
                None => missing.push((r.radio_id, s)),
            }
        }
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    let columns = scenario_ids
        .iter()
        .flat_map(|&scenario_id| Metric::ALL.into_iter().map(move |metric| ColumnLabel { scenario_id, metric }))
        .collect();
    Ok(PerformanceMatrix { radios: radios.to_vec(), columns, values })
}

/// Mean of `values` over the rows whose radio matches `keep`.
pub fn group_mean(radios: &[RadioSpec], values: &[f64], keep: impl Fn(&RadioSpec) -> bool) -> Option<f64> {
    let sel: Vec<f64> = radios.iter().zip(values).filter(|(r, _)| keep(r)).map(|(_, &v)| v).collect();
    (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
}

/// Convenience for cluster summaries keyed by policy.
pub fn policy_mean(m: &PerformanceMatrix, metric: Metric, policy: PolicyKind) -> Option<f64> {
    group_mean(&m.radios, &m.aggregate(metric), |r| r.policy == policy)
}
