//! Differentially private federated online prediction from experts.
//!
//! `m` clients face a stream of losses over `d` experts for `T` rounds and
//! cooperate through a server under differential privacy:
//!
//! - [`stoch`]: Frank-Wolfe with tree-based gradient estimates for stochastic
//!   adversaries, communicating only at phase-doubling leaf events.
//! - [`svt`]: sparse-vector switching for oblivious adversaries with a
//!   low-loss expert.
//! - [`adversary`]: loss-stream generators and ratings-matrix ingestion.
//! - [`harness`]: seeded multi-trial experiments with CSV/JSON output.

pub mod adversary;
pub mod dp_fw;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod loss;
pub mod mechanisms;
pub mod rng;
pub mod simplex;
pub mod stoch;
pub mod svt;
pub mod transcript;

pub use error::{Error, Result};
pub use rng::{RandomSource, StreamTag};
pub use simplex::SimplexPoint;
pub use transcript::{Algorithm, Transcript};
