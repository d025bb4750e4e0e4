//! Dense real vectors used for models, gradients and optimizer moments.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vector of `f64` with a length fixed at construction.
///
/// Public constructors and arithmetic reject non-finite results, so a value of
/// this type never carries NaN or infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn zeros(dim: usize) -> Self {
        ModelVector(vec![0.0; dim])
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite(&values, "vector")?;
        Ok(ModelVector(values))
    }

    /// Wraps values produced by internal arithmetic. Callers check finiteness
    /// at iteration boundaries so that the diagnostic names the quantity.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ModelVector(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_dim(&self, other: &ModelVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `a * x + y`.
    pub fn axpy(a: f64, x: &ModelVector, y: &ModelVector) -> Result<ModelVector> {
        x.check_dim(y)?;
        let out: Vec<f64> = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
        ensure_finite(&out, "axpy result")?;
        Ok(ModelVector(out))
    }

    pub fn add(&self, other: &ModelVector) -> Result<ModelVector> {
        ModelVector::axpy(1.0, other, self)
    }

    pub fn sub(&self, other: &ModelVector) -> Result<ModelVector> {
        ModelVector::axpy(-1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> Result<ModelVector> {
        let out: Vec<f64> = self.0.iter().map(|v| a * v).collect();
        ensure_finite(&out, "scaled vector")?;
        Ok(ModelVector(out))
    }

    /// In-place `self += a * x` without the finiteness check.
    pub(crate) fn add_scaled_unchecked(&mut self, a: f64, x: &ModelVector) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += a * xi;
        }
    }

    pub fn dot(&self, other: &ModelVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self - other‖_∞`.
    pub fn max_abs_diff(&self, other: &ModelVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `‖self - other‖_2²`.
    pub fn dist_sq(&self, other: &ModelVector) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

impl Index<usize> for ModelVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ModelVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ModelVector::new(values)
    }
}

impl From<ModelVector> for Vec<f64> {
    fn from(v: ModelVector) -> Self {
        v.0
    }
}

fn ensure_finite(values: &[f64], quantity: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            quantity: format!("{quantity} (coordinate {i})"),
        }),
        None => Ok(()),
    }
}
