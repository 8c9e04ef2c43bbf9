//! Channel-access strategies with `m` observations per slot.
//!
//! Each strategy is driven through the same two calls: [`PolicyState::decide`]
//! picks the channel to play (or, for POLA, to spend the slot observing) and
//! the set of channels whose readings the learner will see;
//! [`PolicyState::update`] folds those readings back in.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{config, contract, Error, Result};
use crate::rng::Stream;

pub type ChannelSet = SmallVec<[usize; 8]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Random,
    Ucb1,
    Exp3,
    Pola,
    Prola,
    Qlearn,
}

impl PolicyKind {
    /// Grid order used by default: the first experiment phase's strategies
    /// followed by the ones added later.
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Ucb1,
        PolicyKind::Exp3,
        PolicyKind::Random,
        PolicyKind::Pola,
        PolicyKind::Prola,
        PolicyKind::Qlearn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::Exp3 => "exp3",
            PolicyKind::Pola => "pola",
            PolicyKind::Prola => "prola",
            PolicyKind::Qlearn => "qlearn",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| config(format!("unknown policy '{s}'")))
    }
}

/// Per-slot decision cost of each strategy as a fraction of the slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub random: f64,
    pub ucb1: f64,
    pub exp3: f64,
    pub pola: f64,
    pub prola: f64,
    pub qlearn: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable { random: 0.0, ucb1: 0.005, exp3: 0.01, pola: 0.01, prola: 0.01, qlearn: 0.05 }
    }
}

impl CostTable {
    pub fn cost(&self, kind: PolicyKind) -> f64 {
        match kind {
            PolicyKind::Random => self.random,
            PolicyKind::Ucb1 => self.ucb1,
            PolicyKind::Exp3 => self.exp3,
            PolicyKind::Pola => self.pola,
            PolicyKind::Prola => self.prola,
            PolicyKind::Qlearn => self.qlearn,
        }
    }
}

/// Decision cost from the default table.
pub fn algorithmic_cost(kind: PolicyKind) -> f64 {
    CostTable::default().cost(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Overrides the horizon-derived exploration rate of the exponential-weight
    /// strategies.
    pub exp3_gamma: Option<f64>,
    pub pola_eps0: f64,
    pub qlearn_alpha: f64,
    pub qlearn_eps: f64,
    pub cost_table: CostTable,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams { exp3_gamma: None, pola_eps0: 1.0, qlearn_alpha: 0.1, qlearn_eps: 0.1, cost_table: CostTable::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Play(usize),
    /// POLA only: the slot is spent observing, nothing is transmitted.
    ObserveOnly,
}

impl Action {
    pub fn channel(self) -> Option<usize> {
        match self {
            Action::Play(c) => Some(c),
            Action::ObserveOnly => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// 1-based slot counter of the decision.
    pub slot: u64,
    pub action: Action,
    /// Channels read this slot. Empty on POLA play slots; excludes the action
    /// for PROLA; starts at the action for the window-based strategies.
    pub observe_set: ChannelSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub channel: usize,
    /// In `[0, 1]`.
    pub est_reward: f64,
    pub slot: u64,
    pub was_played: bool,
}

/// `{a, a+1, ..., a+m-1} mod C`.
pub fn circular_window(action: usize, m: usize, channels: usize) -> ChannelSet {
    (0..m).map(|j| (action + j) % channels).collect()
}

/// Horizon-aware exploration rate `min(1, sqrt(C ln C / ((e-1) T m)))`.
pub fn default_gamma(channels: usize, horizon: u64, m: usize) -> f64 {
    let c = channels as f64;
    let v = c * c.ln() / ((std::f64::consts::E - 1.0) * horizon as f64 * m as f64);
    v.sqrt().min(1.0)
}

/// UCB1 index argmax with lowest-index tie breaking. Every count must be > 0.
pub fn ucb1_choose(means: &[f64], counts: &[u64], t: u64) -> usize {
    let log_t = (t.max(1) as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, (&mean, &n)) in means.iter().zip(counts).enumerate() {
        let score = if n == 0 { f64::INFINITY } else { mean + (2.0 * log_t / n as f64).sqrt() };
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Solution of `max_p sum p_c Q_c` over the simplex with `p_c >= eps / C`:
/// the floor everywhere and the remaining `1 - eps (C-1)/C` mass on the
/// lowest-index argmax.
pub fn qlearn_distribution(q: &[f64], eps: f64) -> Vec<f64> {
    let c = q.len();
    let floor = eps / c as f64;
    let mut p = vec![floor; c];
    p[argmax(q)] = 1.0 - floor * (c - 1) as f64;
    p
}

type Probs = SmallVec<[f64; 16]>;

/// Exponential weights shared by EXP3, PROLA and POLA.
#[derive(Debug, Clone, PartialEq)]
struct ExpWeights {
    weights: Vec<f64>,
    gamma: f64,
    /// Multiplier of the importance-weighted estimate in the exponent.
    eta: f64,
}

const RESCALE_ABOVE: f64 = 1e200;
const WEIGHT_FLOOR: f64 = 1e-280;

impl ExpWeights {
    /// `eta = gamma m / C`: one slot's observations move the log-weights as
    /// much as `m` single-observation slots would, and `eta * x / q <= 1`.
    fn new(channels: usize, width: usize, gamma: f64) -> Self {
        ExpWeights { weights: vec![1.0; channels], gamma, eta: gamma * width as f64 / channels as f64 }
    }

    /// `(1 - mix) w / W + mix / C`.
    fn distribution(&self, mix: f64) -> Probs {
        let c = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| (1.0 - mix) * w / total + mix / c).collect()
    }

    fn apply(&mut self, channel: usize, estimate: f64) {
        self.weights[channel] *= (self.eta * estimate).exp();
    }

    fn rescale(&mut self) {
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        if max > RESCALE_ABOVE {
            for w in &mut self.weights {
                *w = (*w / max).max(WEIGHT_FLOOR);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Learner {
    Random,
    Ucb1 { counts: Vec<u64>, means: Vec<f64> },
    Exp3(ExpWeights),
    Prola(ExpWeights),
    Pola { weights: ExpWeights, eps0: f64 },
    Qlearn { q: Vec<f64>, alpha: f64, eps: f64 },
}

/// Sufficient statistics of one strategy instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    kind: PolicyKind,
    channels: usize,
    width: usize,
    horizon: u64,
    /// Slots completed.
    t: u64,
    learner: Learner,
    scratch: Vec<usize>,
}

impl PolicyState {
    pub fn init(kind: PolicyKind, channels: usize, width: usize, horizon: u64, params: &PolicyParams) -> Result<Self> {
        if channels == 0 {
            return Err(config("need at least one channel"));
        }
        if width == 0 || width > channels {
            return Err(config(format!("observation width {width} must lie in [1, {channels}]")));
        }
        if horizon < channels as u64 {
            return Err(config(format!("horizon {horizon} shorter than channel count {channels}")));
        }
        if kind == PolicyKind::Prola && width >= channels {
            return Err(config(format!("PROLA observes {width} channels other than the played one out of {channels}")));
        }
        let gamma = params.exp3_gamma.unwrap_or_else(|| default_gamma(channels, horizon, width));
        if !(0.0..=1.0).contains(&gamma) {
            return Err(config(format!("exp3_gamma {gamma} outside [0, 1]")));
        }
        let learner = match kind {
            PolicyKind::Random => Learner::Random,
            PolicyKind::Ucb1 => Learner::Ucb1 { counts: vec![0; channels], means: vec![0.0; channels] },
            PolicyKind::Exp3 => Learner::Exp3(ExpWeights::new(channels, width, gamma)),
            PolicyKind::Prola => Learner::Prola(ExpWeights::new(channels, width, gamma)),
            PolicyKind::Pola => {
                if params.pola_eps0.is_nan() || params.pola_eps0 <= 0.0 {
                    return Err(config("pola_eps0 must be > 0"));
                }
                Learner::Pola { weights: ExpWeights::new(channels, width, gamma), eps0: params.pola_eps0 }
            }
            PolicyKind::Qlearn => {
                if !(0.0..=1.0).contains(&params.qlearn_alpha) || !(0.0..=1.0).contains(&params.qlearn_eps) {
                    return Err(config("qlearn_alpha and qlearn_eps must lie in [0, 1]"));
                }
                Learner::Qlearn { q: vec![0.0; channels], alpha: params.qlearn_alpha, eps: params.qlearn_eps }
            }
        };
        Ok(PolicyState { kind, channels, width, horizon, t: 0, learner, scratch: Vec::with_capacity(channels) })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn slots_done(&self) -> u64 {
        self.t
    }

    /// POLA's observe probability at 1-based slot `t`.
    pub fn pola_epsilon(eps0: f64, t: u64) -> f64 {
        (eps0 * (t.max(1) as f64).powf(-1.0 / 3.0)).min(1.0)
    }

    /// The action-sampling distribution for the next decision, when the
    /// strategy has one.
    pub fn distribution(&self) -> Option<Vec<f64>> {
        match &self.learner {
            Learner::Random => Some(vec![1.0 / self.channels as f64; self.channels]),
            Learner::Ucb1 { .. } => None,
            Learner::Exp3(w) | Learner::Prola(w) => Some(w.distribution(w.gamma).to_vec()),
            Learner::Pola { weights: w, .. } => Some(w.distribution(0.0).to_vec()),
            Learner::Qlearn { q, eps, .. } => Some(qlearn_distribution(q, *eps)),
        }
    }

    /// Current weights of the exponential-weight strategies.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.learner {
            Learner::Exp3(w) | Learner::Prola(w) | Learner::Pola { weights: w, .. } => Some(&w.weights),
            _ => None,
        }
    }

    pub fn q_values(&self) -> Option<&[f64]> {
        match &self.learner {
            Learner::Qlearn { q, .. } => Some(q),
            _ => None,
        }
    }

    pub fn ucb1_stats(&self) -> Option<(&[u64], &[f64])> {
        match &self.learner {
            Learner::Ucb1 { counts, means } => Some((counts, means)),
            _ => None,
        }
    }

    pub fn decide(&mut self, rng: &mut Stream) -> Decision {
        let slot = self.t + 1;
        let (c, m) = (self.channels, self.width);
        let window = |a: usize| circular_window(a, m, c);
        let (action, observe_set) = match &self.learner {
            Learner::Random => {
                let a = rng.below(c);
                (Action::Play(a), ChannelSet::from_slice(&[a]))
            }
            Learner::Ucb1 { counts, means } => {
                let a = if slot <= c as u64 { (slot - 1) as usize } else { ucb1_choose(means, counts, slot) };
                (Action::Play(a), window(a))
            }
            Learner::Exp3(w) => {
                let a = rng.categorical(&w.distribution(w.gamma));
                (Action::Play(a), window(a))
            }
            Learner::Prola(w) => {
                let a = rng.categorical(&w.distribution(w.gamma));
                self.scratch.clear();
                self.scratch.extend((0..c).filter(|&x| x != a));
                let obs = ChannelSet::from_slice(rng.choose_distinct(&mut self.scratch, m));
                (Action::Play(a), obs)
            }
            Learner::Pola { weights, eps0 } => {
                if rng.bernoulli(Self::pola_epsilon(*eps0, slot)) {
                    self.scratch.clear();
                    self.scratch.extend(0..c);
                    let obs = ChannelSet::from_slice(rng.choose_distinct(&mut self.scratch, m));
                    (Action::ObserveOnly, obs)
                } else {
                    (Action::Play(rng.categorical(&weights.distribution(0.0))), ChannelSet::new())
                }
            }
            Learner::Qlearn { q, eps, .. } => {
                let a = if rng.bernoulli(*eps) { rng.below(c) } else { rng.categorical(&qlearn_distribution(q, *eps)) };
                (Action::Play(a), window(a))
            }
        };
        Decision { slot, action, observe_set }
    }

    /// Importance-weighted reward estimates `est / q` for the observations of
    /// one slot, indexed like `obs`, where `q` is the probability that the
    /// channel is in the observe set of a slot decided from the current state.
    pub fn importance_estimates(&self, decision: &Decision, obs: &[Observation]) -> Result<SmallVec<[f64; 8]>> {
        let (c, m) = (self.channels, self.width);
        let p = match &self.learner {
            Learner::Exp3(w) | Learner::Prola(w) => Some(w.distribution(w.gamma)),
            _ => None,
        };
        let observe_probability = |channel: usize| match &self.learner {
            Learner::Exp3(_) => {
                let p = p.as_ref().expect("computed above");
                (0..m).map(|j| p[(channel + c - j) % c]).sum()
            }
            // A channel is a side observation only in slots where it is not played.
            Learner::Prola(_) => {
                let p = p.as_ref().expect("computed above");
                (1.0 - p[channel]) * m as f64 / (c - 1) as f64
            }
            Learner::Pola { eps0, .. } => Self::pola_epsilon(*eps0, decision.slot) * m as f64 / c as f64,
            _ => 1.0,
        };
        obs.iter()
            .map(|o| {
                let q = observe_probability(o.channel);
                if q > 0.0 {
                    Ok(o.est_reward / q)
                } else {
                    Err(Error::Invariant(format!("observed channel {} had observation probability 0", o.channel)))
                }
            })
            .collect()
    }

    pub fn update(&mut self, decision: &Decision, obs: &[Observation]) -> Result<()> {
        if decision.slot != self.t + 1 {
            return Err(contract(format!("decision for slot {} applied at slot {}", decision.slot, self.t + 1)));
        }
        for o in obs {
            let allowed = decision.observe_set.contains(&o.channel);
            if !allowed {
                return Err(contract(format!("observation on channel {} outside the observe set", o.channel)));
            }
            if !(0.0..=1.0).contains(&o.est_reward) {
                return Err(contract(format!("reward estimate {} outside [0, 1]", o.est_reward)));
            }
        }
        let skip_exp_update = match &self.learner {
            Learner::Pola { .. } => decision.action != Action::ObserveOnly,
            Learner::Exp3(_) | Learner::Prola(_) => false,
            _ => true,
        };
        if !skip_exp_update && !obs.is_empty() {
            let est = self.importance_estimates(decision, obs)?;
            if let Learner::Exp3(w) | Learner::Prola(w) | Learner::Pola { weights: w, .. } = &mut self.learner {
                for (o, x) in obs.iter().zip(est) {
                    w.apply(o.channel, x);
                }
                w.rescale();
            }
        }
        match &mut self.learner {
            Learner::Ucb1 { counts, means } => {
                for o in obs {
                    let n = &mut counts[o.channel];
                    *n += 1;
                    means[o.channel] += (o.est_reward - means[o.channel]) / *n as f64;
                }
            }
            Learner::Qlearn { q, alpha, .. } => {
                for o in obs {
                    q[o.channel] = (1.0 - *alpha) * q[o.channel] + *alpha * o.est_reward;
                }
            }
            _ => {}
        }
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(channel: usize, est: f64, slot: u64) -> Observation {
        Observation { channel, est_reward: est, slot, was_played: false }
    }

    fn init(kind: PolicyKind, c: usize, m: usize) -> PolicyState {
        PolicyState::init(kind, c, m, 1000, &PolicyParams::default()).unwrap()
    }

    #[test]
    fn exp3_starts_uniform() {
        let s = init(PolicyKind::Exp3, 10, 2);
        for p in s.distribution().unwrap() {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn ucb1_plays_each_channel_once_first() {
        let mut s = init(PolicyKind::Ucb1, 10, 1);
        let mut rng = Stream::from_state(1);
        for c in 0..10 {
            let d = s.decide(&mut rng);
            assert_eq!(d.action, Action::Play(c));
            assert_eq!(d.observe_set.as_slice(), &[c]);
            let o = [obs(c, 0.0, d.slot)];
            s.update(&d, &o).unwrap();
        }
    }

    #[test]
    fn ucb1_window_is_circular() {
        let mut s = init(PolicyKind::Ucb1, 4, 3);
        let mut rng = Stream::from_state(1);
        for _ in 0..3 {
            let d = s.decide(&mut rng);
            s.update(&d, &[]).unwrap();
        }
        let d = s.decide(&mut rng);
        assert_eq!(d.observe_set.as_slice(), &[3, 0, 1]);
    }

    #[test]
    fn ucb1_prefers_dominant_mean() {
        assert_eq!(ucb1_choose(&[0.9, 0.1], &[50, 50], 100), 0);
        // equal scores: lowest index
        assert_eq!(ucb1_choose(&[0.5, 0.5], &[10, 10], 100), 0);
    }

    #[test]
    fn qlearn_initial_tie_goes_to_lowest_index() {
        let s = init(PolicyKind::Qlearn, 3, 1);
        assert_eq!(s.q_values().unwrap(), &[0.0, 0.0, 0.0]);
        let p = s.distribution().unwrap();
        assert!(p[0] > p[1] && p[1] == p[2]);
    }

    #[test]
    fn qlearn_closed_form_example() {
        let p = qlearn_distribution(&[0.0, 1.0, 0.0], 0.3);
        let expect = [0.1, 0.8, 0.1];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn qlearn_update_arithmetic() {
        let mut s = init(PolicyKind::Qlearn, 3, 1);
        if let Learner::Qlearn { q, .. } = &mut s.learner {
            q[1] = 0.5;
        }
        let d = Decision { slot: 1, action: Action::Play(1), observe_set: ChannelSet::from_slice(&[1]) };
        s.update(&d, &[obs(1, 1.0, 1)]).unwrap();
        assert!((s.q_values().unwrap()[1] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn exp3_zero_rewards_leave_weights() {
        let mut s = init(PolicyKind::Exp3, 5, 2);
        let mut rng = Stream::from_state(3);
        for _ in 0..50 {
            let d = s.decide(&mut rng);
            let o: Vec<_> = d.observe_set.iter().map(|&c| obs(c, 0.0, d.slot)).collect();
            s.update(&d, &o).unwrap();
        }
        assert!(s.weights().unwrap().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn prola_never_observes_action() {
        let mut s = init(PolicyKind::Prola, 10, 2);
        let mut rng = Stream::from_state(4);
        for _ in 0..1000 {
            let d = s.decide(&mut rng);
            let a = d.action.channel().unwrap();
            assert_eq!(d.observe_set.len(), 2);
            assert!(!d.observe_set.contains(&a));
            s.update(&d, &[]).unwrap();
        }
    }

    #[test]
    fn prola_width_must_leave_room() {
        let r = PolicyState::init(PolicyKind::Prola, 4, 4, 100, &PolicyParams::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn init_rejects_wide_observation() {
        let r = PolicyState::init(PolicyKind::Exp3, 4, 5, 100, &PolicyParams::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn observation_outside_set_is_rejected() {
        let mut s = init(PolicyKind::Exp3, 4, 1);
        let mut rng = Stream::from_state(1);
        let d = s.decide(&mut rng);
        let other = (d.action.channel().unwrap() + 1) % 4;
        assert!(s.update(&d, &[obs(other, 0.5, 1)]).is_err());
    }

    #[test]
    fn pola_play_slots_do_not_learn() {
        let mut s = init(PolicyKind::Pola, 5, 2);
        let before = s.weights().unwrap().to_vec();
        let d = Decision { slot: 1, action: Action::Play(0), observe_set: ChannelSet::new() };
        s.update(&d, &[]).unwrap();
        assert_eq!(s.weights().unwrap(), before.as_slice());
    }

    #[test]
    fn zero_observe_probability_is_invariant_violation() {
        let mut s = PolicyState::init(
            PolicyKind::Exp3,
            3,
            1,
            100,
            &PolicyParams { exp3_gamma: Some(0.0), ..PolicyParams::default() },
        )
        .unwrap();
        if let Learner::Exp3(w) = &mut s.learner {
            w.weights = vec![1.0, 0.0, 0.0];
        }
        let d = Decision { slot: 1, action: Action::Play(0), observe_set: ChannelSet::from_slice(&[1]) };
        assert!(matches!(s.update(&d, &[obs(1, 0.5, 1)]), Err(Error::Invariant(_))));
    }

    #[test]
    fn cost_table_defaults() {
        assert_eq!(algorithmic_cost(PolicyKind::Random), 0.0);
        assert_eq!(algorithmic_cost(PolicyKind::Qlearn), 0.05);
        assert_eq!(algorithmic_cost(PolicyKind::Ucb1), 0.005);
        let t = CostTable::default();
        for k in PolicyKind::ALL {
            if k != PolicyKind::Qlearn {
                assert!(t.cost(k) < t.cost(PolicyKind::Qlearn));
            }
        }
    }

    #[test]
    fn policy_names_parse() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("ucb2".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn gamma_formula() {
        let g = default_gamma(10, 2000, 1);
        let expect = (10.0 * 10f64.ln() / ((std::f64::consts::E - 1.0) * 2000.0)).sqrt();
        assert!((g - expect).abs() < 1e-15);
        assert_eq!(default_gamma(10, 1, 1), 1.0);
    }
}
