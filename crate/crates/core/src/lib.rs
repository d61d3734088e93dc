//! Stress testing of banks against supply-chain shocks.
//!
//! A firm-level production shock spreads through the supply network, the
//! resulting firm defaults hit bank loan books, and bank losses spread
//! further over the interbank network. [`pipeline::Engine`] runs the three
//! steps with and without supply-chain contagion; [`metrics`] turns batches
//! of outcomes into systemic-risk indices and loss statistics.

pub mod credit;
pub mod debtrank;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod propagation;
pub mod report;
pub mod scenario;

/// Version of the engine, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use exec::{Execution, Runner};
pub use model::Economy;
pub use pipeline::{Engine, PipelineConfig, Regimes, ScenarioOutcome};
pub use propagation::{PropagationConfig, ShockVector};
