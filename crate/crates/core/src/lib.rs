//! Discrete-event simulation of LTE uplink fronthaul carried over a
//! virtualized XGS-PON, comparing un-synchronised, cooperative and
//! near-ideal DBA operation.

pub mod engine;
pub mod lte;
pub mod metrics;
pub mod pon;
pub mod scenario;
pub mod sim;
pub mod traffic;
pub mod units;

pub use engine::{Engine, RngStream, SimDuration, SimTime};
pub use metrics::{Crossing, RunReport};
pub use scenario::{run, sweep, ConfigError, RunError, Scenario, ScenarioConfig, SweepAxis};
pub use sim::{RunOutput, SimError, SimOptions, Simulation};
