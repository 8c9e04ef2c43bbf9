//! Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
//! stderr, nonzero exit when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cogbench::config::load_scenarios;
use cogbench_core::fa::{analyze, sym_eigen, Analysis};
use cogbench_core::harness::{assemble, run_grid, Metric, PerformanceMatrix};
use cogbench_core::policy::qlearn_distribution;
use cogbench_core::radio::enumerate_grid;
use cogbench_core::rng::{Stream, StreamKind};
use cogbench_core::synthetic::{aligned_congruence, sample_rows, simple_structure};
use cogbench_core::{
    Environment, FaOptions, FactorModel, GridAxes, Method, Observation, PolicyKind, PolicyParams, PolicyState,
    RadioSpec, Rotation,
};
use nalgebra::DMatrix;

const SEED: u64 = 1;
const HORIZON: u64 = 2000;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn progress(msg: &str) {
    eprintln!("[acceptance] {msg}");
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_envs() -> Vec<Environment> {
    let file = workspace_root().join("scenarios/default18.json");
    load_scenarios(&file)
        .expect("default scenario file loads")
        .into_iter()
        .map(|mut s| {
            s.horizon_t = HORIZON;
            s.resolve(SEED).expect("scenario resolves")
        })
        .collect()
}

fn default_radios() -> Vec<RadioSpec> {
    enumerate_grid(&GridAxes::default(), &PolicyParams::default().cost_table)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- criterion 1

fn zero_violation_law(envs: &[Environment]) -> Verdict {
    let start = Instant::now();
    let radios: Vec<RadioSpec> = default_radios().into_iter().filter(|r| r.accuracy == 1.0).collect();
    let cells = run_grid(&radios, envs, 50, SEED, &PolicyParams::default()).expect("grid runs");
    let violations: u64 = cells.iter().map(|c| c.violations).sum();
    let took = start.elapsed();
    Verdict {
        id: 1,
        name: "zero-violation law",
        pass: violations == 0 && took < Duration::from_secs(120),
        detail: format!(
            "{} accuracy-1.0 radios x {} scenarios, R = 50: {violations} violations in {}",
            radios.len(),
            envs.len(),
            secs(took)
        ),
    }
}

// ------------------------------------------------------- full-grid criteria

struct FullGrid {
    matrix: PerformanceMatrix,
    /// Aggregate throughput per radio.
    total: Vec<f64>,
    /// Monte-Carlo variance of `total` per radio.
    total_var: Vec<f64>,
    took: Duration,
}

fn full_grid(envs: &[Environment]) -> FullGrid {
    let start = Instant::now();
    let radios = default_radios();
    let cells = run_grid(&radios, envs, 200, SEED, &PolicyParams::default()).expect("grid runs");
    let took = start.elapsed();
    let ids: Vec<u64> = envs.iter().map(|e| e.scenario_id).collect();
    let matrix = assemble(&radios, &ids, &cells).expect("grid complete");
    let mut var: BTreeMap<u64, f64> = BTreeMap::new();
    for c in &cells {
        *var.entry(c.radio_id).or_default() += c.throughput_se().powi(2);
    }
    let total = matrix.aggregate(Metric::Throughput);
    let total_var = radios.iter().map(|r| var[&r.radio_id]).collect();
    FullGrid { matrix, total, total_var, took }
}

impl FullGrid {
    fn rows(&self, keep: impl Fn(&RadioSpec) -> bool) -> Vec<usize> {
        (0..self.matrix.rows()).filter(|&i| keep(&self.matrix.radios[i])).collect()
    }

    /// Mean aggregate throughput over `rows` and its standard error.
    fn group(&self, rows: &[usize]) -> (f64, f64) {
        let n = rows.len() as f64;
        let m = rows.iter().map(|&i| self.total[i]).sum::<f64>() / n;
        let var = rows.iter().map(|&i| self.total_var[i]).sum::<f64>() / (n * n);
        (m, var.sqrt())
    }

    fn policy_mean(&self, k: PolicyKind) -> f64 {
        self.group(&self.rows(|r| r.policy == k)).0
    }
}

fn cluster_ordering(g: &FullGrid) -> Verdict {
    let (u, e, r) = (g.policy_mean(PolicyKind::Ucb1), g.policy_mean(PolicyKind::Exp3), g.policy_mean(PolicyKind::Random));
    // Separation relative to the larger of the two clusters.
    let (s1, s2) = ((u - e) / u, (e - r) / e);
    Verdict {
        id: 2,
        name: "cluster ordering UCB1 > EXP3 > RANDOM",
        pass: s1 >= 0.05 && s2 >= 0.05 && g.took < Duration::from_secs(600),
        detail: format!(
            "means {u:.4} / {e:.4} / {r:.4}, separations {:.1}% and {:.1}%, full grid R = 200 in {}",
            100.0 * s1,
            100.0 * s2,
            secs(g.took)
        ),
    }
}

fn sensor_monotonicity(g: &FullGrid) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in PolicyKind::ALL.into_iter().filter(|&k| k != PolicyKind::Random) {
        let mut ms: Vec<usize> = g.rows(|r| r.policy == k).iter().map(|&i| g.matrix.radios[i].m).collect();
        ms.sort_unstable();
        ms.dedup();
        if ms.len() < 2 {
            continue;
        }
        let stats: Vec<(f64, f64)> = ms.iter().map(|&m| g.group(&g.rows(|r| r.policy == k && r.m == m))).collect();
        let mut text = format!("{k}:");
        for (w, m) in stats.windows(2).zip(ms.windows(2)) {
            let gap = w[1].0 - w[0].0;
            let sigma = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
            pass &= gap >= -sigma;
            text += &format!(" m{}->m{} {gap:+.4} (sd {sigma:.4})", m[0], m[1]);
        }
        parts.push(text);
    }
    Verdict { id: 3, name: "sensor monotonicity", pass: pass && !parts.is_empty(), detail: parts.join("; ") }
}

fn accuracy_monotonicity(g: &FullGrid) -> Verdict {
    let mut groups: BTreeMap<(String, usize, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (i, r) in g.matrix.radios.iter().enumerate() {
        groups.entry((r.policy.to_string(), r.m, r.hw_delay.to_bits())).or_default().push((r.accuracy, g.total[i]));
    }
    let (mut checked, mut failed, mut min_gap) = (0, Vec::new(), f64::INFINITY);
    for ((policy, m, hw), mut v) in groups {
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in v.windows(2) {
            checked += 1;
            let gap = w[0].1 - w[1].1;
            min_gap = min_gap.min(gap);
            if gap <= 0.0 {
                failed.push(format!("{policy} m={m} hw={} acc {}->{}", f64::from_bits(hw), w[0].0, w[1].0));
            }
        }
    }
    Verdict {
        id: 4,
        name: "accuracy monotonicity",
        pass: failed.is_empty() && checked > 0,
        detail: format!("{checked} adjacent pairs, smallest drop {min_gap:.4}{}", if failed.is_empty() { String::new() } else { format!(", violated by {}", failed.join(", ")) }),
    }
}

fn observation_family(g: &FullGrid) -> Verdict {
    let (pola, prola, exp3) = (g.policy_mean(PolicyKind::Pola), g.policy_mean(PolicyKind::Prola), g.policy_mean(PolicyKind::Exp3));
    let rel = (prola - exp3).abs() / exp3;
    let best = prola.min(exp3);
    let below = (best - pola) / best;
    Verdict {
        id: 5,
        name: "POLA/PROLA/EXP3 relation",
        pass: rel <= 0.10 && below >= 0.05,
        detail: format!("EXP3 {exp3:.4}, PROLA {prola:.4} ({:.1}% apart), POLA {pola:.4} ({:.1}% below)", 100.0 * rel, 100.0 * below),
    }
}

fn varimax_fit(rows: &[Vec<f64>]) -> Analysis {
    analyze(rows, Method::Fa, &FaOptions { rotation: Rotation::Varimax, ..FaOptions::default() }).expect("analysis runs")
}

/// Mean absolute loading of each factor over the variables of `metric`.
fn metric_loading(m: &PerformanceMatrix, a: &Analysis, metric: Metric) -> Vec<f64> {
    let rows: Vec<usize> = (0..a.sigma.kept.len()).filter(|&i| m.columns[a.sigma.kept[i]].metric == metric).collect();
    (0..a.model.retained).map(|j| mean(&rows.iter().map(|&i| a.model.lambda[(i, j)].abs()).collect::<Vec<_>>())).collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn soft_reproduction(g: &FullGrid, full: &Analysis) -> Verdict {
    let k = full.model.retained;
    let viol = metric_loading(&g.matrix, full, Metric::Violation);
    let delay = metric_loading(&g.matrix, full, Metric::Delay);
    let (fv, fd) = (argmax(&viol), argmax(&delay));
    let cv = viol[fv] - delay[fv];
    let cd = delay[fd] - viol[fd];
    Verdict {
        id: 8,
        name: "factor-count and violation/delay separation",
        pass: (4..=6).contains(&k) && fv != fd && cv >= 0.3 && cd >= 0.3,
        detail: format!(
            "144 x 54 retains {k}; violation factor F{} contrast {cv:.3}, delay factor F{} contrast {cd:.3}",
            fv + 1,
            fd + 1
        ),
    }
}

// ---------------------------------------------------------------- criterion 6

/// Mean pseudo-regret of UCB1 on two IID channels after 1000 and 10000 slots.
fn ucb1_regret() -> (f64, f64) {
    let means = [0.9, 0.1];
    let reps = 200;
    let (mut r1k, mut r10k) = (0.0, 0.0);
    let params = PolicyParams::default();
    for rep in 0..reps {
        let mut policy = PolicyState::init(PolicyKind::Ucb1, 2, 1, 10_000, &params).unwrap();
        let mut prng = Stream::derive(SEED, 1, 0, rep, StreamKind::Policy);
        let mut env = Stream::derive(SEED, 1, 0, rep, StreamKind::Env);
        let mut regret = 0.0;
        for t in 1..=10_000u64 {
            let d = policy.decide(&mut prng);
            let a = d.action.channel().unwrap();
            let reward = f64::from(u8::from(env.bernoulli(means[a])));
            regret += means[0] - means[a];
            let obs = [Observation { channel: a, est_reward: reward, slot: d.slot, was_played: true }];
            policy.update(&d, &obs).unwrap();
            if t == 1000 {
                r1k += regret;
            }
        }
        r10k += regret;
    }
    (r1k / reps as f64, r10k / reps as f64)
}

/// Average importance-weighted estimate per channel over `runs` episodes of
/// `horizon` slots on IID channels with the given idle probabilities.
fn estimator_means(kind: PolicyKind, width: usize, idle: &[f64], horizon: u64, runs: u64) -> Vec<f64> {
    let c = idle.len();
    let params = PolicyParams::default();
    let mut sums = vec![0.0; c];
    for run in 0..runs {
        let mut policy = PolicyState::init(kind, c, width, horizon, &params).unwrap();
        let mut prng = Stream::derive(SEED, 2, width as u64, run, StreamKind::Policy);
        let mut env = Stream::derive(SEED, 2, width as u64, run, StreamKind::Env);
        for _ in 0..horizon {
            let free: Vec<bool> = idle.iter().map(|&p| env.bernoulli(p)).collect();
            let d = policy.decide(&mut prng);
            let obs: Vec<Observation> = d
                .observe_set
                .iter()
                .map(|&ch| Observation {
                    channel: ch,
                    est_reward: f64::from(u8::from(free[ch])),
                    slot: d.slot,
                    was_played: d.action.channel() == Some(ch),
                })
                .collect();
            for (o, x) in obs.iter().zip(policy.importance_estimates(&d, &obs).unwrap()) {
                sums[o.channel] += x;
            }
            policy.update(&d, &obs).unwrap();
        }
    }
    let n = (runs * horizon) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

fn brute_force_lp(q: &[f64], eps: f64, n: usize) -> Vec<f64> {
    fn visit(i: usize, left: usize, parts: &mut [usize], f: &mut dyn FnMut(&[usize])) {
        if i + 1 == parts.len() {
            parts[i] = left;
            f(parts);
            return;
        }
        for k in 0..=left {
            parts[i] = k;
            visit(i + 1, left - k, parts, f);
        }
    }
    let c = q.len();
    let floor = eps / c as f64;
    let free = 1.0 - eps;
    let mut best = (f64::NEG_INFINITY, vec![0; c]);
    visit(0, n, &mut vec![0; c], &mut |parts| {
        let v: f64 = parts.iter().zip(q).map(|(&k, &qc)| k as f64 * qc).sum();
        if v > best.0 {
            best = (v, parts.to_vec());
        }
    });
    best.1.iter().map(|&k| floor + free * k as f64 / n as f64).collect()
}

fn bandit_oracles() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();

    progress("criterion 6: UCB1 regret");
    let (r1k, r10k) = ucb1_regret();
    let (a, b) = (r10k / 10_000.0, r1k / 1000.0);
    let regret_ok = a < 0.5 * b;
    parts.push(format!("UCB1 regret/T {a:.5} at 10000 vs {b:.5} at 1000"));

    progress("criterion 6: importance-weighted estimators");
    let idle = [0.8, 0.5, 0.2];
    let mut worst: f64 = 0.0;
    for (kind, width) in [(PolicyKind::Exp3, 1), (PolicyKind::Exp3, 2), (PolicyKind::Prola, 1)] {
        let est = estimator_means(kind, width, &idle, 100, 10_000);
        let dev = est.iter().zip(idle).map(|(e, m)| (e - m).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        parts.push(format!("{kind} m={width} max bias {dev:.4}"));
    }
    let unbiased = worst <= 0.01;

    progress("criterion 6: QLEARN against brute-force LP");
    let mut rng = Stream::derive(SEED, 3, 0, 0, StreamKind::Policy);
    let mut lp_err: f64 = 0.0;
    let mut instances = 0;
    for c in 2..=5usize {
        // Compositions of n into C parts: about 1.7e8 at C = 4, n = 1000.
        let (n, count) = match c {
            2 | 3 => (1000, 25),
            4 => (1000, 3),
            _ => (50, 25),
        };
        for _ in 0..count {
            let q: Vec<f64> = (0..c).map(|_| rng.uniform()).collect();
            let eps = rng.uniform();
            let grid = brute_force_lp(&q, eps, n);
            let closed = qlearn_distribution(&q, eps);
            lp_err = closed.iter().zip(&grid).map(|(x, y)| (x - y).abs()).fold(lp_err, f64::max);
            instances += 1;
        }
    }
    // A learned state: the policy's own decide distribution.
    let params = PolicyParams::default();
    let mut policy = PolicyState::init(PolicyKind::Qlearn, 4, 2, 500, &params).unwrap();
    let mut env = Stream::derive(SEED, 3, 1, 0, StreamKind::Env);
    for _ in 0..500 {
        let d = policy.decide(&mut rng);
        let obs: Vec<Observation> = d
            .observe_set
            .iter()
            .map(|&ch| Observation { channel: ch, est_reward: env.uniform(), slot: d.slot, was_played: d.action.channel() == Some(ch) })
            .collect();
        policy.update(&d, &obs).unwrap();
    }
    let learned = policy.distribution().unwrap();
    let grid = brute_force_lp(policy.q_values().unwrap(), params.qlearn_eps, 1000);
    lp_err = learned.iter().zip(&grid).map(|(x, y)| (x - y).abs()).fold(lp_err, f64::max);
    instances += 1;
    parts.push(format!("QLEARN max |p - p_lp| {lp_err:.1e} over {instances} instances"));

    let took = start.elapsed();
    parts.push(format!("in {}", secs(took)));
    Verdict {
        id: 6,
        name: "bandit correctness oracles",
        pass: regret_ok && unbiased && lp_err <= 1e-9 && took < Duration::from_secs(300),
        detail: parts.join("; "),
    }
}

// ---------------------------------------------------------------- criterion 7

fn fa_recovery(fixtures: &mut Vec<(String, FactorModel, DMatrix<f64>)>) -> Verdict {
    let start = Instant::now();
    let (mut exact, mut total, mut worst) = (0, 0, f64::INFINITY);
    for factors in 3..=5usize {
        for trial in 0..50u64 {
            let mut rng = Stream::derive(SEED, 7, factors as u64, trial, StreamKind::Env);
            let truth = simple_structure(54, factors, &mut rng);
            let rows = sample_rows(&truth, 144, &mut rng);
            let a = varimax_fit(&rows);
            total += 1;
            if a.model.retained == factors {
                exact += 1;
                worst = worst.min(aligned_congruence(&truth, &a.model.lambda));
            } else {
                worst = worst.min(0.0);
            }
            if trial == 0 {
                fixtures.push((format!("synthetic I={factors}"), a.model, a.sigma.sigma));
            }
        }
    }
    let took = start.elapsed();
    Verdict {
        id: 7,
        name: "factor recovery on synthetic structure",
        pass: exact == total && worst >= 0.95 && took < Duration::from_secs(60),
        detail: format!("{exact}/{total} exact factor counts, worst congruence {worst:.4}, in {}", secs(took)),
    }
}

// ---------------------------------------------------------------- criterion 9

fn numerical_contracts(fixtures: &[(String, FactorModel, DMatrix<f64>)]) -> Verdict {
    let reconstruct = |m: &DMatrix<f64>| {
        let (vals, vecs) = sym_eigen(m);
        (&vecs * DMatrix::from_diagonal(&vals) * vecs.transpose() - m).norm()
    };
    let (mut eig, mut rot, mut ok_conv) = (0.0f64, 0.0f64, true);
    let mut notes = Vec::new();
    for (name, model, sigma) in fixtures {
        eig = eig.max(reconstruct(sigma)).max(reconstruct(&model.reduced));
        let stored = &model.eigenvectors * DMatrix::from_diagonal(&model.eigenvalues) * model.eigenvectors.transpose();
        eig = eig.max((stored - &model.reduced).norm());
        let common = &model.lambda * model.lambda.transpose() - &model.unrotated * model.unrotated.transpose();
        rot = rot.max(common.norm());
        if !(model.converged && model.iterations <= 1000) {
            ok_conv = false;
            notes.push(format!("{name} did not converge"));
        }
    }
    Verdict {
        id: 9,
        name: "numerical contracts",
        pass: eig <= 1e-8 && rot <= 1e-10 && ok_conv,
        detail: format!(
            "{} fixtures: eigen reconstruction {eig:.1e}, varimax common-part drift {rot:.1e}, all converged {ok_conv}{}",
            fixtures.len(),
            if notes.is_empty() { String::new() } else { format!(" ({})", notes.join(", ")) }
        ),
    }
}

// --------------------------------------------------------------- criterion 10

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn end_to_end(base: &Path, name: &str, threads: &str) -> BTreeMap<String, Vec<u8>> {
    let dir = base.join(name);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, "{\n  \"master_seed\": 42,\n  \"slots\": 300,\n  \"reps\": 3,\n  \"out_dir\": \"out\"\n}\n").unwrap();
    for cmd in ["simulate", "analyze", "report"] {
        let out = Command::new(env!("CARGO_BIN_EXE_cogbench"))
            .args([cmd, "--config", cfg.to_str().unwrap()])
            .env("COGBENCH_THREADS", threads)
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    tree(&dir.join("out"))
}

fn determinism() -> Verdict {
    let base = tempfile::tempdir().unwrap();
    let a = end_to_end(base.path(), "a", "1");
    let b = end_to_end(base.path(), "b", "1");
    let c = end_to_end(base.path(), "c", "3");
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k)).collect();
    Verdict {
        id: 10,
        name: "end-to-end determinism",
        pass: a.len() >= 10 && a.keys().eq(b.keys()) && a.keys().eq(c.keys()) && differing.is_empty(),
        detail: format!("{} files compared across 3 runs (1, 1 and 3 threads), {} differ", a.len(), differing.len()),
    }
}

fn main() {
    let mut verdicts = Vec::new();
    let mut fixtures = Vec::new();

    progress("criterion 6");
    verdicts.push(bandit_oracles());
    progress("criterion 7");
    verdicts.push(fa_recovery(&mut fixtures));

    let envs = default_envs();
    progress("criterion 1");
    verdicts.push(zero_violation_law(&envs));

    progress("full grid, R = 200 (several minutes)");
    let g = full_grid(&envs);
    verdicts.push(cluster_ordering(&g));
    verdicts.push(sensor_monotonicity(&g));
    verdicts.push(accuracy_monotonicity(&g));
    verdicts.push(observation_family(&g));
    let full = varimax_fit(&g.matrix.values);
    verdicts.push(soft_reproduction(&g, &full));
    let subset = g.matrix.select_rows(|r| matches!(r.policy, PolicyKind::Ucb1 | PolicyKind::Exp3 | PolicyKind::Random));
    let sub = varimax_fit(&subset.values);
    eprintln!("[acceptance] note: 63-radio subset retains {} factors", sub.model.retained);
    fixtures.push(("144-radio matrix".into(), full.model, full.sigma.sigma));
    fixtures.push(("63-radio matrix".into(), sub.model, sub.sigma.sigma));
    verdicts.push(numerical_contracts(&fixtures));

    progress("criterion 10");
    verdicts.push(determinism());

    verdicts.sort_by_key(|v| v.id);
    let mut failed = 0;
    for v in &verdicts {
        println!("{} criterion {:>2} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.name, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
