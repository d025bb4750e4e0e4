use std::ops::Range;

use super::{Batch, Dataset, Partition, Problem};
use crate::error::{Error, Result};
use crate::rng::{Lane, Purpose, RandomStream, DATA};
use crate::vector::ModelVector;

/// Logistic regression with the bounded nonconvex regularizer
///
/// ```text
/// f(x) = (1/N) Σᵢ log(1 + exp(−yᵢ aᵢᵀx)) + λ Σⱼ xⱼ²/(1 + xⱼ²)
/// ```
///
/// Every worker's local objective carries the full regularizer, so the
/// average of the local objectives is `f` when the partition is even.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    data: Dataset,
    lambda: f64,
    partition: Partition,
}

impl LogisticProblem {
    /// Shuffles `data` with `shuffle_seed` (when given) and splits it into
    /// `workers` contiguous blocks.
    pub fn new(data: Dataset, lambda: f64, workers: usize, shuffle_seed: Option<u64>) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let data = match shuffle_seed {
            Some(seed) => data.shuffled(&mut RandomStream::new(seed, Lane::new(DATA, 0), Purpose::Shuffle)),
            None => data,
        };
        let partition = Partition::equal(data.len(), workers)?;
        Ok(LogisticProblem {
            data,
            lambda,
            partition,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn regularizer(&self, x: &ModelVector) -> f64 {
        self.lambda * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }

    fn add_regularizer_gradient(&self, x: &ModelVector, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x.iter()) {
            let q = 1.0 + v * v;
            *o += self.lambda * 2.0 * v / (q * q);
        }
    }

    /// Adds `−y σ(−y aᵀx) a` for sample `i` into `acc`.
    fn accumulate_sample(&self, i: usize, x: &[f64], acc: &mut [f64]) {
        let a = self.data.row(i);
        let y = self.data.label(i);
        let margin: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
        let coef = -y * sigmoid(-y * margin);
        for (s, ai) in acc.iter_mut().zip(a) {
            *s += coef * ai;
        }
    }

    fn mean_gradient<I: Iterator<Item = usize>>(&self, x: &ModelVector, samples: I, count: usize) -> ModelVector {
        let mut acc = vec![0.0; self.dim()];
        for i in samples {
            self.accumulate_sample(i, x.as_slice(), &mut acc);
        }
        let inv = 1.0 / count as f64;
        for s in acc.iter_mut() {
            *s *= inv;
        }
        self.add_regularizer_gradient(x, &mut acc);
        ModelVector::from_raw(acc)
    }
}

impl Problem for LogisticProblem {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn num_workers(&self) -> usize {
        self.partition.num_workers()
    }

    fn worker_range(&self, worker: usize) -> Range<usize> {
        self.partition.range(worker)
    }

    fn local_gradient(&self, worker: usize, x: &ModelVector, batch: &Batch) -> Result<ModelVector> {
        if x.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        let range = self.partition.range(worker);
        match batch {
            Batch::Full => Ok(self.mean_gradient(x, range.clone(), range.len())),
            Batch::Indices(ix) => {
                if ix.is_empty() {
                    return Err(Error::config("empty batch"));
                }
                if let Some(i) = ix.iter().find(|i| !range.contains(i)) {
                    return Err(Error::config(format!(
                        "sample {i} is outside worker {worker}'s range {range:?}"
                    )));
                }
                Ok(self.mean_gradient(x, ix.iter().copied(), ix.len()))
            }
        }
    }

    fn loss(&self, x: &ModelVector) -> f64 {
        let n = self.data.len();
        let data_term: f64 = (0..n)
            .map(|i| {
                let m: f64 = self.data.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                softplus(-self.data.label(i) * m)
            })
            .sum::<f64>()
            / n as f64;
        data_term + self.regularizer(x)
    }

    fn gradient(&self, x: &ModelVector) -> ModelVector {
        let n = self.data.len();
        self.mean_gradient(x, 0..n, n)
    }
}

/// `log(1 + eᶻ)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::synthesize;

    fn problem(samples: usize, dim: usize, workers: usize, lambda: f64) -> LogisticProblem {
        LogisticProblem::new(synthesize(samples, dim, 0.1, 5).unwrap(), lambda, workers, Some(1)).unwrap()
    }

    #[test]
    fn loss_at_origin_is_log_two() {
        let p = problem(30, 4, 3, 0.1);
        assert!((p.loss(&ModelVector::zeros(4)) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfectly_classified_limit() {
        let data = Dataset::new(1, vec![1.0], vec![1.0]).unwrap();
        let p = LogisticProblem::new(data, 0.0, 1, None).unwrap();
        assert!(p.loss(&ModelVector::new(vec![50.0]).unwrap()) < 1e-20);
        // Large margins stay finite.
        assert!(p.loss(&ModelVector::new(vec![-1e4]).unwrap()).is_finite());
    }

    #[test]
    fn regularizer_value() {
        let data = Dataset::new(1, vec![0.0], vec![1.0]).unwrap();
        let p = LogisticProblem::new(data, 0.1, 1, None).unwrap();
        let x = ModelVector::new(vec![1.0]).unwrap();
        assert!((p.regularizer(&x) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_origin() {
        let p = problem(12, 3, 2, 0.3);
        let x = ModelVector::zeros(3);
        let g = p.local_gradient(0, &x, &Batch::Full).unwrap();
        let range = p.partition().range(0);
        let mut expect = [0.0; 3];
        for i in range.clone() {
            for (j, e) in expect.iter_mut().enumerate() {
                *e -= p.data().label(i) * p.data().row(i)[j] / 2.0;
            }
        }
        for (gj, ej) in g.iter().zip(expect) {
            assert!((gj - ej / range.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = problem(40, 5, 4, 0.1);
        let mut rng = RandomStream::new(3, Lane::new(0, 0), Purpose::Diagnostic);
        for _ in 0..20 {
            let x = ModelVector::new((0..5).map(|_| 2.0 * rng.standard_normal()).collect()).unwrap();
            let g = p.gradient(&x);
            let h = 1e-6;
            for j in 0..5 {
                let mut xp = x.clone().into_vec();
                let mut xm = x.clone().into_vec();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p.loss(&ModelVector::new(xp).unwrap()) - p.loss(&ModelVector::new(xm).unwrap())) / (2.0 * h);
                let scale = g.norm().max(1e-3);
                assert!((fd - g[j]).abs() / scale < 1e-5, "coord {j}: fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn local_gradients_average_to_full_gradient() {
        let p = problem(60, 4, 6, 0.1);
        let x = ModelVector::new(vec![0.3, -1.2, 0.7, 2.0]).unwrap();
        let mut mean = ModelVector::zeros(4);
        for w in 0..6 {
            mean.add_scaled_unchecked(1.0 / 6.0, &p.local_gradient(w, &x, &Batch::Full).unwrap());
        }
        assert!(mean.max_abs_diff(&p.gradient(&x)).unwrap() <= 1e-12);
    }

    #[test]
    fn regularizer_is_bounded() {
        let p = problem(10, 3, 1, 0.1);
        let x = ModelVector::new(vec![1e6, -1e6, 3.0]).unwrap();
        assert!(p.regularizer(&x) <= 0.1 * 3.0);
    }

    #[test]
    fn batch_outside_partition_rejected() {
        let p = problem(20, 2, 2, 0.1);
        let x = ModelVector::zeros(2);
        let outside = p.partition().range(1).start;
        assert!(p.local_gradient(0, &x, &Batch::Indices(vec![outside])).is_err());
        assert!(p.local_gradient(0, &x, &Batch::Indices(vec![])).is_err());
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) == 1.0);
    }
}
