//! Deterministic parameter-server simulator for communication-compressed
//! distributed AMSGrad (CD-Adam) and the baselines it is usually compared
//! against: uncompressed AMSGrad, naive compression, error feedback, two-way
//! EF21 with SGD, and 1-bit Adam.
//!
//! Everything runs in a single process. Workers and the server exchange
//! explicit [`CompressedMessage`] values whose accounting size is recorded in
//! a [`BitLedger`], so communication cost is exact rather than estimated.
//!
//! Module map:
//! - [`vector`], [`rng`], [`ledger`]: numeric vector, seeded substreams, bit counting.
//! - [`compress`]: contractive compressors, wire codec and Markov compression state.
//! - [`optim`]: AMSGrad/SGD kernels, the variance diagnostic and [`theory`] constants.
//! - [`problems`]: nonconvex logistic regression, LibSVM parsing, synthetic data.
//! - [`algorithms`]: per-iteration state machines for every algorithm.
//! - [`harness`]: configuration, experiment loop, metrics export, grid search.

pub mod algorithms;
pub mod compress;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod theory;
pub mod vector;

pub use algorithms::{Algorithm, Simulation};
pub use compress::{CompressedMessage, CompressorKind, CompressorSpec, MarkovState};
pub use error::{Error, Result};
pub use ledger::{BitLedger, Direction, DownlinkCounting};
pub use optim::{AmsgradParams, AmsgradState, StepSize};
pub use problems::{Dataset, LogisticProblem, Partition, Problem};
pub use rng::{Lane, Purpose, RandomStream};
pub use vector::ModelVector;
