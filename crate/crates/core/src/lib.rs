//! Distributed online primal-dual resource allocation for edge computing
//! networks with limited inter-node communication.
//!
//! Devices, base stations and edge servers each run an online projected
//! primal-dual update on their own variables. Flow conservation couples
//! neighbouring layers, so nodes exchange a single round of messages per time
//! slot and the external part of their Lagrangian gradient arrives one slot
//! late. The crate also provides the centralized and selfish baselines, the
//! static/dynamic benchmark solver, the regret/fit metrics and the closed-form
//! guarantees they are checked against.

pub mod agents;
pub mod baselines;
pub mod bounds;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod runner;
pub mod scalar;
pub mod topology;

pub use agents::{Feedback, HyperParams, Network};
pub use environment::{EnvConfig, EnvSample, Environment};
pub use error::{Error, Result};
pub use model::{ActionSpace, BoxBounds, CostParams, Problem};
pub use scalar::Scalar;
pub use topology::{NodeId, NodeKind, Topology};

/// Double precision problem, the default for experiments.
pub type Problem64 = Problem<f64>;
/// Single precision problem.
pub type Problem32 = Problem<f32>;
pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type EnvSample64 = EnvSample<f64>;
pub type RunRecord64 = metrics::RunRecord<f64>;
