use std::ops::Range;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Dense labelled samples. Labels are `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// `features` is row-major, `labels.len()` rows of `dim` values.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("dataset has no samples"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(i) = labels.iter().position(|y| *y != 1.0 && *y != -1.0) {
            return Err(Error::config(format!("label {} of sample {i} is not ±1", labels[i])));
        }
        if let Some(i) = features.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                quantity: format!("feature {} of sample {}", i % dim.max(1), i / dim.max(1)),
            });
        }
        Ok(Dataset { dim, features, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Rows reordered by a uniform permutation.
    pub fn shuffled(&self, rng: &mut RandomStream) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut order);
        self.reordered(&order)
    }

    fn reordered(&self, order: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(self.features.len());
        for &i in order {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            dim: self.dim,
            features,
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Contiguous, disjoint blocks covering `0..N` whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    ranges: Vec<Range<usize>>,
}

impl Partition {
    pub fn equal(samples: usize, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::config("need at least one worker"));
        }
        if samples < workers {
            return Err(Error::config(format!(
                "{samples} samples cannot be split across {workers} workers"
            )));
        }
        let (base, extra) = (samples / workers, samples % workers);
        let mut start = 0;
        let ranges = (0..workers)
            .map(|w| {
                let len = base + usize::from(w < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(Partition { ranges })
    }

    pub fn num_workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, worker: usize) -> Range<usize> {
        self.ranges[worker].clone()
    }

    pub fn len(&self, worker: usize) -> usize {
        self.ranges[worker].len()
    }
}

/// Which of a worker's samples enter a gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batch {
    Full,
    /// Global sample indices inside the worker's range.
    Indices(Vec<usize>),
}

/// `tau` distinct samples drawn uniformly without replacement from `range`.
/// `tau = 0` selects the full batch.
pub fn sample_batch(range: Range<usize>, tau: usize, rng: &mut RandomStream) -> Result<Batch> {
    let n = range.len();
    if tau == 0 || tau == n {
        return Ok(Batch::Full);
    }
    if tau > n {
        return Err(Error::config(format!("batch size {tau} exceeds the {n} local samples")));
    }
    Ok(Batch::Indices(
        rng.choose_distinct(n, tau)
            .into_iter()
            .map(|i| range.start + i)
            .collect(),
    ))
}
