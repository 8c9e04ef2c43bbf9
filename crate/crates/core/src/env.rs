//! Spectrum environment: per-slot PU occupancy, noisy sensing, frame delivery.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{config, contract, Result};
use crate::rng::{hash64, Stream};

/// Stream tag used when expanding generated arbitrary schedules.
const SCHEDULE_TAG: u64 = 0xA5B1_7A42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Raw data rate (Mbit/s). Normalized by the scenario maximum at resolve time.
    pub rate: f64,
    /// Frame delivery probability.
    pub fdr: f64,
    /// PU-active probability (IID), stationary load (Markov) or base load
    /// (arbitrary).
    pub load: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTransition {
    pub p_idle_busy: f64,
    pub p_busy_idle: f64,
}

impl MarkovTransition {
    /// Chain with the given stationary busy probability and
    /// `p_idle_busy + p_busy_idle = speed`.
    pub fn with_load(load: f64, speed: f64) -> Self {
        MarkovTransition { p_idle_busy: speed * load, p_busy_idle: speed * (1.0 - load) }
    }

    /// Stationary busy probability; `None` for the frozen chain (both zero).
    pub fn stationary_busy(&self) -> Option<f64> {
        let s = self.p_idle_busy + self.p_busy_idle;
        (s > 0.0).then(|| self.p_idle_busy / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub start_slot: u64,
    pub load: f64,
}

/// Piecewise-constant load schedules for arbitrary PU activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArbitrarySchedule {
    /// One change-point list per channel.
    Explicit { schedules: Vec<Vec<ChangePoint>> },
    /// Independent change points per channel with segment lengths uniform in
    /// `[segment_min, segment_max]`. Segment loads come in pairs
    /// `load + d, load - d` with `d` uniform in `[0, min(load, 1 - load)]`,
    /// so every channel swings around its configured load. Expanded from
    /// `(master_seed, scenario_id)`.
    Generated { segment_min: u64, segment_max: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum PuActivityModel {
    Iid {},
    Markov { transitions: Vec<MarkovTransition> },
    Arbitrary(ArbitrarySchedule),
}

impl PuActivityModel {
    pub fn label(&self) -> &'static str {
        match self {
            PuActivityModel::Iid {} => "iid",
            PuActivityModel::Markov { .. } => "markov",
            PuActivityModel::Arbitrary(_) => "arbitrary",
        }
    }
}

/// Slot overheads as fractions of the slot duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct SlotFractions {
    pub sense: f64,
    pub learn: f64,
    pub switch: f64,
}

impl From<[f64; 3]> for SlotFractions {
    fn from([sense, learn, switch]: [f64; 3]) -> Self {
        SlotFractions { sense, learn, switch }
    }
}

impl From<SlotFractions> for [f64; 3] {
    fn from(f: SlotFractions) -> Self {
        [f.sense, f.learn, f.switch]
    }
}

impl Default for SlotFractions {
    fn default() -> Self {
        SlotFractions { sense: 0.1, learn: 0.05, switch: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub channels: Vec<ChannelParams>,
    pub activity: PuActivityModel,
    #[serde(rename = "horizon_T")]
    pub horizon_t: u64,
    pub slot_fractions: SlotFractions,
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl Scenario {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.scenario_id;
        let c = self.channels.len();
        if c == 0 {
            return Err(config(format!("scenario {id}: no channels")));
        }
        if self.horizon_t == 0 {
            return Err(config(format!("scenario {id}: horizon_T must be >= 1")));
        }
        let f = self.slot_fractions;
        if [f.sense, f.learn, f.switch].iter().any(|x| x.is_nan() || *x < 0.0) || f.sense + f.learn + f.switch >= 1.0 {
            return Err(config(format!("scenario {id}: slot fractions must be >= 0 and sum to < 1")));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if !(ch.rate > 0.0 && ch.rate.is_finite()) {
                return Err(config(format!("scenario {id} channel {i}: rate must be > 0")));
            }
            if !in_unit(ch.fdr) || !in_unit(ch.load) {
                return Err(config(format!("scenario {id} channel {i}: fdr and load must lie in [0, 1]")));
            }
        }
        match &self.activity {
            PuActivityModel::Iid {} => {}
            PuActivityModel::Markov { transitions } => {
                if transitions.len() != c {
                    return Err(config(format!(
                        "scenario {id}: {} markov transitions for {c} channels",
                        transitions.len()
                    )));
                }
                for (i, (tr, ch)) in transitions.iter().zip(&self.channels).enumerate() {
                    if !in_unit(tr.p_idle_busy) || !in_unit(tr.p_busy_idle) {
                        return Err(config(format!(
                            "scenario {id} channel {i}: transition probabilities must lie in [0, 1]"
                        )));
                    }
                    if let Some(pi) = tr.stationary_busy() {
                        if (pi - ch.load).abs() > 1e-6 {
                            return Err(config(format!(
                                "scenario {id} channel {i}: load {} disagrees with stationary load {pi}",
                                ch.load
                            )));
                        }
                    }
                }
            }
            PuActivityModel::Arbitrary(ArbitrarySchedule::Explicit { schedules }) => {
                if schedules.len() != c {
                    return Err(config(format!("scenario {id}: {} schedules for {c} channels", schedules.len())));
                }
                for (i, sched) in schedules.iter().enumerate() {
                    validate_schedule(sched).map_err(|e| config(format!("scenario {id} channel {i}: {e}")))?;
                }
            }
            PuActivityModel::Arbitrary(ArbitrarySchedule::Generated { segment_min, segment_max }) => {
                if *segment_min == 0 || segment_min > segment_max {
                    return Err(config(format!("scenario {id}: need 1 <= segment_min <= segment_max")));
                }
            }
        }
        Ok(())
    }

    /// Validates and expands the scenario into its simulation form.
    pub fn resolve(&self, master_seed: u64) -> Result<Environment> {
        self.validate()?;
        let rate_max = self.channels.iter().map(|c| c.rate).fold(0.0, f64::max);
        let process = match &self.activity {
            PuActivityModel::Iid {} => Process::Iid,
            PuActivityModel::Markov { transitions } => Process::Markov(transitions.clone()),
            PuActivityModel::Arbitrary(ArbitrarySchedule::Explicit { schedules }) => Process::Arbitrary(
                schedules.iter().map(|s| s.iter().map(|cp| (cp.start_slot, cp.load)).collect()).collect(),
            ),
            PuActivityModel::Arbitrary(ArbitrarySchedule::Generated { segment_min, segment_max }) => {
                Process::Arbitrary(generate_schedules(
                    &self.channels,
                    *segment_min,
                    *segment_max,
                    self.horizon_t,
                    hash64(&[master_seed, self.scenario_id, SCHEDULE_TAG]),
                ))
            }
        };
        Ok(Environment {
            scenario_id: self.scenario_id,
            rates: self.channels.iter().map(|c| c.rate / rate_max).collect(),
            fdr: self.channels.iter().map(|c| c.fdr).collect(),
            loads: self.channels.iter().map(|c| c.load).collect(),
            process,
            fractions: self.slot_fractions,
            horizon: self.horizon_t,
        })
    }
}

fn validate_schedule(sched: &[ChangePoint]) -> std::result::Result<(), String> {
    match sched.first() {
        None => return Err("empty schedule".into()),
        Some(cp) if cp.start_slot != 0 => return Err("schedule must start at slot 0".into()),
        _ => {}
    }
    if sched.windows(2).any(|w| w[1].start_slot <= w[0].start_slot) {
        return Err("change-point slots must be strictly increasing".into());
    }
    if sched.iter().any(|cp| !in_unit(cp.load)) {
        return Err("schedule loads must lie in [0, 1]".into());
    }
    Ok(())
}

fn generate_schedules(
    channels: &[ChannelParams],
    segment_min: u64,
    segment_max: u64,
    horizon: u64,
    state: u64,
) -> Vec<Vec<(u64, f64)>> {
    let mut rng = Stream::from_state(state);
    let span = (segment_max - segment_min + 1) as usize;
    channels
        .iter()
        .map(|ch| {
            let mut sched = Vec::new();
            let (mut start, mut d) = (0, 0.0);
            while start < horizon {
                let load = if sched.len() % 2 == 0 {
                    d = rng.uniform() * ch.load.min(1.0 - ch.load);
                    ch.load + d
                } else {
                    ch.load - d
                };
                sched.push((start, load.clamp(0.0, 1.0)));
                start += segment_min + rng.below(span) as u64;
            }
            sched
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Iid,
    Markov(Vec<MarkovTransition>),
    /// Per channel `(start_slot, load)` change points, starting at slot 0.
    Arbitrary(Vec<Vec<(u64, f64)>>),
}

/// A validated scenario ready for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub scenario_id: u64,
    /// Rates divided by the scenario maximum, in `(0, 1]`.
    pub rates: Vec<f64>,
    pub fdr: Vec<f64>,
    pub loads: Vec<f64>,
    pub process: Process,
    pub fractions: SlotFractions,
    pub horizon: u64,
}

impl Environment {
    pub fn num_channels(&self) -> usize {
        self.rates.len()
    }

    /// Busy probability of `channel` under the arbitrary schedule at `slot`.
    fn scheduled_load(sched: &[(u64, f64)], slot: u64) -> Option<f64> {
        let idx = sched.partition_point(|&(s, _)| s <= slot);
        (idx > 0).then(|| sched[idx - 1].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelState {
    pub occupied: Vec<bool>,
    pub slot_index: u64,
}

impl ChannelState {
    /// Slot-0 occupancy.
    pub fn initial(env: &Environment, rng: &mut Stream) -> Result<Self> {
        let mut state = ChannelState { occupied: vec![false; env.num_channels()], slot_index: 0 };
        state.draw(env, rng, true)?;
        Ok(state)
    }

    /// Moves to the next slot in place.
    pub fn advance(&mut self, env: &Environment, rng: &mut Stream) -> Result<()> {
        self.slot_index += 1;
        self.draw(env, rng, false)
    }

    fn draw(&mut self, env: &Environment, rng: &mut Stream, first: bool) -> Result<()> {
        match &env.process {
            Process::Iid => {
                for (busy, &load) in self.occupied.iter_mut().zip(&env.loads) {
                    *busy = rng.bernoulli(load);
                }
            }
            Process::Markov(trans) => {
                for ((busy, tr), &load) in self.occupied.iter_mut().zip(trans).zip(&env.loads) {
                    *busy = if first {
                        rng.bernoulli(tr.stationary_busy().unwrap_or(load))
                    } else if *busy {
                        !rng.bernoulli(tr.p_busy_idle)
                    } else {
                        rng.bernoulli(tr.p_idle_busy)
                    };
                }
            }
            Process::Arbitrary(scheds) => {
                let slot = self.slot_index;
                for (ch, (busy, sched)) in self.occupied.iter_mut().zip(scheds).enumerate() {
                    let load = Environment::scheduled_load(sched, slot)
                        .ok_or_else(|| config(format!("channel {ch}: no schedule segment covers slot {slot}")))?;
                    *busy = rng.bernoulli(load);
                }
            }
        }
        Ok(())
    }
}

/// Ground truth for the next slot; `prev` is `None` only at slot 0.
pub fn step(env: &Environment, prev: Option<&ChannelState>, rng: &mut Stream) -> Result<ChannelState> {
    match prev {
        None => ChannelState::initial(env, rng),
        Some(p) => {
            let mut next = p.clone();
            next.advance(env, rng)?;
            Ok(next)
        }
    }
}

/// One noisy reading: correct with probability `accuracy`, flipped otherwise.
#[inline]
pub(crate) fn sense_one(truth_busy: bool, accuracy: f64, rng: &mut Stream) -> bool {
    if rng.bernoulli(accuracy) {
        truth_busy
    } else {
        !truth_busy
    }
}

/// Sensed-busy flags for `channels`, in the given order.
pub fn sense(state: &ChannelState, channels: &[usize], accuracy: f64, rng: &mut Stream) -> Result<SmallVec<[bool; 8]>> {
    if channels.is_empty() {
        return Err(contract("sense called with an empty channel set"));
    }
    if !(0.5..=1.0).contains(&accuracy) {
        return Err(contract(format!("sensing accuracy {accuracy} outside [0.5, 1]")));
    }
    channels
        .iter()
        .map(|&c| {
            let truth = *state
                .occupied
                .get(c)
                .ok_or_else(|| contract(format!("channel {c} out of range")))?;
            Ok(sense_one(truth, accuracy, rng))
        })
        .collect()
}

/// Whether a frame sent on a channel with delivery ratio `fdr` gets through.
#[inline]
pub fn deliver(fdr: f64, rng: &mut Stream) -> bool {
    rng.bernoulli(fdr)
}

/// Raw rates used by the shipped scenario set (Mbit/s).
pub const DEFAULT_RATES: [f64; 3] = [1.0, 2.0, 5.0];
/// Frame delivery ratios used by the shipped scenario set.
pub const DEFAULT_FDRS: [f64; 3] = [1.0, 0.9, 0.7];

/// The shipped 18-scenario set: six channel profiles under each of the three
/// PU activity families, ten channels each.
pub fn default_scenarios() -> Vec<Scenario> {
    let [r1, r2, r5] = DEFAULT_RATES;
    let [f1, f9, f7] = DEFAULT_FDRS;
    #[allow(clippy::type_complexity)]
    let profiles: [(&str, [f64; 10], [f64; 10], [f64; 10]); 6] = [
        (
            "large-gap",
            [0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.9, 0.9, 0.9],
            [r2; 10],
            [f1; 10],
        ),
        (
            "high-load",
            [0.9, 0.8, 0.85, 0.9, 0.75, 0.9, 0.8, 0.9, 0.85, 0.6],
            [r2; 10],
            [f1; 10],
        ),
        (
            "graded-load",
            [0.5, 0.8, 0.3, 0.9, 0.6, 0.2, 0.7, 0.4, 0.1, 0.85],
            [r2; 10],
            [f9; 10],
        ),
        (
            "rate-diversity",
            [0.4; 10],
            [r1, r2, r1, r5, r1, r2, r1, r2, r1, r2],
            [f1; 10],
        ),
        (
            "fdr-diversity",
            [0.3; 10],
            [r2; 10],
            [f7, f9, f7, f9, f7, f1, f7, f9, f7, f9],
        ),
        (
            "mixed",
            [0.2, 0.6, 0.4, 0.8, 0.3, 0.5, 0.7, 0.1, 0.6, 0.4],
            [r1, r2, r5, r1, r2, r5, r1, r2, r1, r5],
            [f1, f9, f7, f1, f9, f7, f1, f9, f7, f1],
        ),
    ];
    let mut out = Vec::with_capacity(18);
    let mut id = 1;
    for family in ["iid", "markov", "arbitrary"] {
        for (name, loads, rates, fdrs) in &profiles {
            let channels: Vec<ChannelParams> = (0..10)
                .map(|i| ChannelParams { rate: rates[i], fdr: fdrs[i], load: loads[i] })
                .collect();
            let activity = match family {
                "iid" => PuActivityModel::Iid {},
                "markov" => PuActivityModel::Markov {
                    transitions: loads.iter().map(|&l| MarkovTransition::with_load(l, 0.2)).collect(),
                },
                _ => PuActivityModel::Arbitrary(ArbitrarySchedule::Generated { segment_min: 150, segment_max: 500 }),
            };
            out.push(Scenario {
                scenario_id: id,
                name: Some(format!("{family}/{name}")),
                channels,
                activity,
                horizon_t: 2000,
                slot_fractions: SlotFractions::default(),
            });
            id += 1;
        }
    }
    out
}
