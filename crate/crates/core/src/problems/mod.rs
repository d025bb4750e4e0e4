//! Objectives and data.

mod dataset;
mod libsvm;
mod logistic;
mod synth;

pub use dataset::{sample_batch, Batch, Dataset, Partition};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use logistic::LogisticProblem;
pub use synth::synthesize;

use std::ops::Range;

use crate::error::Result;
use crate::vector::ModelVector;

/// A finite-sum objective `f = (1/n) Σᵢ fᵢ` split across `n` workers.
pub trait Problem: Sync {
    fn dim(&self) -> usize;

    fn num_workers(&self) -> usize;

    /// Global indices of the samples held by `worker`.
    fn worker_range(&self, worker: usize) -> Range<usize>;

    fn worker_samples(&self, worker: usize) -> usize {
        self.worker_range(worker).len()
    }

    /// Stochastic gradient of `f_worker` over `batch`.
    fn local_gradient(&self, worker: usize, x: &ModelVector, batch: &Batch) -> Result<ModelVector>;

    fn loss(&self, x: &ModelVector) -> f64;

    /// Exact full gradient of `f`.
    fn gradient(&self, x: &ModelVector) -> ModelVector;
}
