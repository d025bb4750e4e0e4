//! Optimizer kernels applied to an already-aggregated gradient.
//!
//! AMSGrad here has no bias correction and puts `ν` inside the square root:
//!
//! ```text
//! m_t = β₁ m_{t−1} + (1 − β₁) g_t
//! b_t = β₂ b_{t−1} + (1 − β₂) g_t²
//! b̂_t = max(b̂_{t−1}, b_t)
//! x_{t+1} = x_t − α_t m_t / sqrt(b̂_t + ν)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ModelVector;

/// Step-size schedule. Both variants are nonincreasing in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum StepSize {
    Constant {
        alpha: f64,
    },
    /// `α / √t`.
    InverseSqrt {
        alpha: f64,
    },
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSize::Constant { alpha } => alpha,
            StepSize::InverseSqrt { alpha } => alpha / (t.max(1) as f64).sqrt(),
        }
    }

    pub fn base(&self) -> f64 {
        match *self {
            StepSize::Constant { alpha } | StepSize::InverseSqrt { alpha } => alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmsgradParams {
    pub step: StepSize,
    pub beta1: f64,
    pub beta2: f64,
    pub nu: f64,
}

impl AmsgradParams {
    pub fn constant(alpha: f64, beta1: f64, beta2: f64, nu: f64) -> Self {
        AmsgradParams {
            step: StepSize::Constant { alpha },
            beta1,
            beta2,
            nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.step.base();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config(format!("alpha must be > 0, got {a}")));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::config(format!("nu must be > 0, got {}", self.nu)));
        }
        Ok(())
    }
}

impl Default for AmsgradParams {
    fn default() -> Self {
        AmsgradParams::constant(1e-3, 0.9, 0.99, 1e-8)
    }
}

/// Moments and model of one AMSGrad replica. Starts from all zeros except `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmsgradState {
    pub m: ModelVector,
    pub b: ModelVector,
    pub b_hat: ModelVector,
    pub x: ModelVector,
}

impl AmsgradState {
    pub fn new(x: ModelVector) -> Self {
        let d = x.dim();
        AmsgradState {
            m: ModelVector::zeros(d),
            b: ModelVector::zeros(d),
            b_hat: ModelVector::zeros(d),
            x,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// One AMSGrad update with gradient `g` at iteration `t ≥ 1`.
    pub fn step(&mut self, g: &ModelVector, params: &AmsgradParams, t: u64) -> Result<()> {
        self.x.check_dim(g)?;
        if !g.is_finite() {
            return Err(Error::NonFinite {
                quantity: "AMSGrad input gradient".into(),
            });
        }
        let alpha = params.step.at(t);
        let (b1, b2, nu) = (params.beta1, params.beta2, params.nu);
        let m = self.m.as_mut_slice();
        let b = self.b.as_mut_slice();
        let b_hat = self.b_hat.as_mut_slice();
        let x = self.x.as_mut_slice();
        for (j, &gj) in g.iter().enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            b[j] = b2 * b[j] + (1.0 - b2) * gj * gj;
            let prev = b_hat[j];
            b_hat[j] = prev.max(b[j]);
            debug_assert!(b_hat[j] >= prev, "b_hat decreased");
            x[j] -= alpha * m[j] / (b_hat[j] + nu).sqrt();
        }
        if !self.x.is_finite() {
            return Err(Error::NonFinite {
                quantity: "model x".into(),
            });
        }
        Ok(())
    }
}

/// `x − α g`.
pub fn sgd_step(x: &ModelVector, g: &ModelVector, alpha: f64) -> Result<ModelVector> {
    ModelVector::axpy(-alpha, g, x)
}

/// Heavy-ball momentum: `m ← β m + g`, `x ← x − α m`.
pub fn momentum_sgd_step(
    x: &ModelVector,
    m: &ModelVector,
    g: &ModelVector,
    alpha: f64,
    beta: f64,
) -> Result<(ModelVector, ModelVector)> {
    let m_next = ModelVector::axpy(beta, m, g)?;
    let x_next = ModelVector::axpy(-alpha, &m_next, x)?;
    Ok((x_next, m_next))
}

/// The two error terms a compressed gradient `ĝ` adds to the second-moment
/// update relative to the fresh gradient `g`:
/// `((1−β₂)‖ĝ−g‖², 2(1−β₂)⟨g, ĝ−g⟩)`.
pub fn variance_instability(g_fresh: &ModelVector, g_compressed: &ModelVector, beta2: f64) -> Result<(f64, f64)> {
    let err = g_compressed.sub(g_fresh)?;
    let w = 1.0 - beta2;
    Ok((w * err.norm_sq(), 2.0 * w * g_fresh.dot(&err)?))
}
