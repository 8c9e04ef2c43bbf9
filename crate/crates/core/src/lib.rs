//! Test bench for learning-based cognitive radios.
//!
//! A grid of radios ([`radio::RadioSpec`]) is run against a set of spectrum
//! scenarios ([`env::Scenario`]); the averaged throughput, delay and
//! violation ratio of every (radio, scenario) cell form a performance
//! matrix ([`harness::PerformanceMatrix`]) whose latent structure is
//! extracted by iterative principal-axis factoring ([`fa`]).

pub mod env;
pub mod error;
pub mod fa;
pub mod format;
pub mod harness;
pub mod policy;
pub mod radio;
pub mod rng;
pub mod synthetic;

pub use env::{ChannelParams, ChannelState, Environment, PuActivityModel, Scenario, SlotFractions};
pub use error::{Error, Result};
pub use fa::{Analysis, CorrelationMatrix, FaOptions, FactorModel, Method, Rotation};
pub use harness::{MetricsTriple, PerformanceMatrix};
pub use policy::{Action, Decision, Observation, PolicyKind, PolicyParams, PolicyState};
pub use radio::{GridAxes, RadioSpec, SlotOutcome};
