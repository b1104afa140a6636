//! Client selection for federated learning when client compute and
//! throughput fluctuate from round to round.
//!
//! The crate simulates the timing side of federated learning only: a
//! population of cellular clients, the greedy round-time scheduler, four
//! client-evaluation policies (two FedCS variants and two UCB bandit
//! variants), and the reporting needed to compare them on paired random
//! numbers. No model is trained.
//!
//! ```
//! use mabcs::{fl_sim, RunConfig, StrategyKind};
//!
//! let mut cfg = RunConfig::default();
//! cfg.rounds = 20;
//! cfg.strategy.kind = StrategyKind::ElementwiseMab;
//! let run = fl_sim::run_experiment(&cfg).unwrap();
//! assert_eq!(run.rounds.len(), 20);
//! ```

pub mod config;
pub mod env_model;
pub mod error;
pub mod fl_sim;
pub mod metrics;
pub mod scheduling;
pub mod stochastics;
pub mod strategies;
pub mod sweep;

pub use env_model::{ClientProfile, EnvConfig, Fluctuation, ResourceRealization};
pub use error::{Error, Result};
pub use fl_sim::{run_experiment, RoundRecord, RunConfig, RunOutput};
pub use scheduling::{SelectionResult, TimePair};
pub use strategies::{StrategyConfig, StrategyKind, StrategyState};

/// Index of a client in `[0, K)`.
pub type ClientId = usize;
