//! Deterministic discrete-event simulation of a validator network.
//!
//! Every node is a real [`poa_core::node::Node`]; only time and transport
//! are simulated. Events run in `(virtual time, insertion order)` order and
//! all randomness is drawn from seeded generators, so a configuration always
//! produces the same trace.

mod checks;
mod config;
mod sim;
mod trace;

use thiserror::Error;

pub use checks::{
    assert_conservation, assert_convergence, assert_convergence_after_partitions, assert_safety,
    ConservationFailure, ConvergenceFailure, SafetyViolation,
};
pub use config::{
    AnchorSettings, Behavior, LatencyDistribution, LatencyModel, Partition, SimConfig, Workload,
};
pub use sim::{run, Simulation, GENESIS_ALLOCATION};
pub use trace::{
    AnchorEvent, AnchorFailure, AnchorTrace, CanonicalEntry, HeadRecord, Metrics, NodeTrace,
    ProducedRecord, Rejection, SimTrace,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
}
