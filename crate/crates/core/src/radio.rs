//! Radio capability bundles and the per-slot pipeline
//! (sense, transmit, learn, switch).

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::env::{deliver, sense_one, ChannelState, Environment};
use crate::error::Result;
use crate::policy::{Action, CostTable, Observation, PolicyKind, PolicyParams, PolicyState};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioSpec {
    pub radio_id: u64,
    pub policy: PolicyKind,
    /// Number of sensors, i.e. channels observed per slot.
    pub m: usize,
    /// Probability a single channel reading is correct.
    pub accuracy: f64,
    /// Hardware delay as a fraction of the slot.
    pub hw_delay: f64,
    /// Algorithmic decision cost as a fraction of the slot.
    pub alg_cost: f64,
}

impl RadioSpec {
    pub fn init_policy(&self, channels: usize, horizon: u64, params: &PolicyParams) -> Result<PolicyState> {
        PolicyState::init(self.policy, channels, self.m.min(channels), horizon, params)
    }
}

/// Capability axes of the radio grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridAxes {
    pub policies: Vec<PolicyKind>,
    pub sensors: Vec<usize>,
    pub accuracies: Vec<f64>,
    pub hw_delays: Vec<f64>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            policies: PolicyKind::ALL.to_vec(),
            sensors: vec![1, 2, 6],
            accuracies: vec![1.0, 0.9, 0.8],
            hw_delays: vec![0.0, 0.1, 0.3],
        }
    }
}

/// Cartesian product of the axes, ordered by (policy, m, hw_delay, accuracy)
/// in axis order. RANDOM ignores its observations, so it is enumerated once
/// with `m = 1` instead of once per sensor count.
pub fn enumerate_grid(axes: &GridAxes, costs: &CostTable) -> Vec<RadioSpec> {
    let mut out = Vec::new();
    for &policy in &axes.policies {
        let sensors: &[usize] = if policy == PolicyKind::Random { &[1] } else { &axes.sensors };
        for &m in sensors {
            for &hw_delay in &axes.hw_delays {
                for &accuracy in &axes.accuracies {
                    out.push(RadioSpec {
                        radio_id: out.len() as u64,
                        policy,
                        m,
                        accuracy,
                        hw_delay,
                        alg_cost: costs.cost(policy),
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub action: Action,
    /// Sensing result on the played channel; `None` on observe-only slots.
    pub sensed_idle: Option<bool>,
    pub transmitted: bool,
    pub delivered: bool,
    /// Normalized rate times the usable part of the slot.
    pub throughput: f64,
    /// Overhead fraction of the slot.
    pub delay: f64,
    pub violation: bool,
    pub switched: bool,
}

/// Per-repetition random streams of one radio.
#[derive(Debug, Clone)]
pub struct RadioStreams {
    pub policy: Stream,
    pub radio: Stream,
}

/// Fraction of the slot left for data after all overheads.
pub fn usable_fraction(env: &Environment, spec: &RadioSpec, switched: bool) -> f64 {
    let f = env.fractions;
    let sw = if switched { f.switch } else { 0.0 };
    (1.0 - f.sense - f.learn - spec.hw_delay - spec.alg_cost - sw).max(0.0)
}

/// Runs one slot: decide, sense the played channel and the observe set,
/// transmit if the played channel looked idle, then feed the readings back
/// to the policy.
///
/// Radio-stream draw order: played channel reading, remaining observe-set
/// readings in set order, then the delivery draw when transmitting.
pub fn run_slot(
    spec: &RadioSpec,
    policy: &mut PolicyState,
    env: &Environment,
    truth: &ChannelState,
    prev_action: Option<usize>,
    streams: &mut RadioStreams,
) -> Result<SlotOutcome> {
    let decision = policy.decide(&mut streams.policy);
    let acc = spec.accuracy;
    let rng = &mut streams.radio;

    let played = decision.action.channel();
    let sensed_idle = played.map(|a| !sense_one(truth.occupied[a], acc, rng));
    let mut side: SmallVec<[(usize, bool); 8]> = SmallVec::new();
    for &c in &decision.observe_set {
        if Some(c) != played {
            side.push((c, !sense_one(truth.occupied[c], acc, rng)));
        }
    }

    let transmitted = sensed_idle == Some(true);
    let (mut violation, mut delivered) = (false, false);
    if let (true, Some(a)) = (transmitted, played) {
        let got_through = deliver(env.fdr[a], rng);
        violation = truth.occupied[a];
        delivered = got_through && !violation;
    }

    let switched = matches!((played, prev_action), (Some(a), Some(p)) if a != p);
    let usable = usable_fraction(env, spec, switched);
    if usable <= 0.0 {
        log::trace!("radio {} slot {}: no usable transmission time", spec.radio_id, decision.slot);
    }
    let realized = match played {
        Some(a) if delivered => env.rates[a],
        _ => 0.0,
    };

    let mut obs: SmallVec<[Observation; 8]> = SmallVec::new();
    let mut side_iter = side.iter();
    for &c in &decision.observe_set {
        let (est, was_played) = if Some(c) == played {
            (realized, true)
        } else {
            let &(_, idle) = side_iter.next().expect("one reading per side channel");
            (if idle { env.rates[c] } else { 0.0 }, false)
        };
        obs.push(Observation { channel: c, est_reward: est, slot: decision.slot, was_played });
    }
    policy.update(&decision, &obs)?;

    Ok(SlotOutcome {
        slot: decision.slot,
        action: decision.action,
        sensed_idle,
        transmitted,
        delivered,
        throughput: realized * usable,
        delay: 1.0 - usable,
        violation,
        switched,
    })
}
