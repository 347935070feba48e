//! Probabilistic swarm distribution guidance driven by local information.
//!
//! Each agent builds a time-varying Markov decision row from the agent
//! counts in its own communication neighbourhood, so the swarm converges to
//! a desired bin distribution without global consensus.

pub mod async_exec;
pub mod config;
pub mod error;
pub mod guidance;
pub mod policies;
pub mod scenario;
pub mod sim;
pub mod topology;

pub use config::{FluxCaps, GuidanceConfig};
pub use error::{GuidanceError, Result};
pub use policies::{PolicyContext, PolicyKind};
pub use scenario::{load_scenario, ScenarioSpec};
pub use sim::{run, RunTrace, Scenario, Simulation};
pub use topology::{BinTopology, DesiredDistribution};
