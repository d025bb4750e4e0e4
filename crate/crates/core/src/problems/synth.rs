use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{Lane, Purpose, RandomStream, DATA};

/// Gaussian features labelled by a planted hyperplane through the origin,
/// with each label flipped independently with probability `noise`.
pub fn synthesize(samples: usize, dim: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if samples == 0 || dim == 0 {
        return Err(Error::config("synthetic data needs samples >= 1 and dim >= 1"));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::config(format!("noise must lie in [0, 1], got {noise}")));
    }
    let mut rng = RandomStream::new(seed, Lane::new(DATA, 0), Purpose::Synthesize);
    let planted: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let mut features = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let row: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let margin: f64 = row.iter().zip(&planted).map(|(a, w)| a * w).sum();
        let clean = if margin >= 0.0 { 1.0 } else { -1.0 };
        let flip = rng.uniform() < noise;
        labels.push(if flip { -clean } else { clean });
        features.extend(row);
    }
    Dataset::new(dim, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn best_agreement(ds: &Dataset, seed: u64) -> f64 {
        // Recover the planted direction from the same stream and score it.
        let mut rng = RandomStream::new(seed, Lane::new(DATA, 0), Purpose::Synthesize);
        let w: Vec<f64> = (0..ds.dim()).map(|_| rng.standard_normal()).collect();
        let hits = (0..ds.len())
            .filter(|&i| {
                let m: f64 = ds.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
                (m >= 0.0) == (ds.label(i) > 0.0)
            })
            .count();
        hits as f64 / ds.len() as f64
    }

    #[test]
    fn noiseless_is_separable() {
        let ds = synthesize(500, 5, 0.0, 11).unwrap();
        assert_eq!(best_agreement(&ds, 11), 1.0);
    }

    #[test]
    fn half_noise_is_uninformative() {
        let n = 4000;
        let ds = synthesize(n, 5, 0.5, 12).unwrap();
        let acc = best_agreement(&ds, 12);
        let three_sigma = 3.0 * (0.25 / n as f64).sqrt();
        assert!((acc - 0.5).abs() <= three_sigma, "{acc}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(synthesize(50, 4, 0.1, 3).unwrap(), synthesize(50, 4, 0.1, 3).unwrap());
        assert_ne!(synthesize(50, 4, 0.1, 3).unwrap(), synthesize(50, 4, 0.1, 4).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synthesize(0, 3, 0.1, 0).is_err());
        assert!(synthesize(3, 3, 1.5, 0).is_err());
    }
}
