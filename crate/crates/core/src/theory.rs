//! Convergence-bound calculator for CD-Adam with constant step size.
//!
//! Given problem constants and a contraction factor `π`, computes the
//! constants of the ε-stationarity bound
//!
//! ```text
//! min_t E‖∇f(x_t)‖² ≤ M₁/(Tα) + M₂/T + αM₃ + αM₄σ²/n + M₅σ·sqrt((N−τ)/(τ(N−1)))
//! ```
//!
//! and the step size, batch size and iteration count that make each group
//! of terms at most ε/3. `T_min` takes a single ceiling over the whole sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    /// Contraction factor, `0 ≤ π < 1`.
    pub pi: f64,
    /// Smoothness constant.
    pub l: f64,
    /// ℓ₂ bound on stochastic gradients.
    pub g: f64,
    /// ℓ∞ bound on stochastic gradients.
    pub g_inf: f64,
    /// Local variance bound.
    pub sigma: f64,
    pub nu: f64,
    pub beta1: f64,
    /// Number of workers.
    pub n: u64,
    /// Samples per worker.
    pub samples_per_worker: u64,
    pub d: u64,
    /// `f(x₁) − inf f`.
    pub delta_f: f64,
    pub epsilon: f64,
}

impl Default for TheoryInputs {
    fn default() -> Self {
        TheoryInputs {
            pi: 0.5,
            l: 1.0,
            g: 1.0,
            g_inf: 1.0,
            sigma: 1.0,
            nu: 1e-8,
            beta1: 0.9,
            n: 20,
            samples_per_worker: 1000,
            d: 100,
            delta_f: 1.0,
            epsilon: 1e-2,
        }
    }
}

impl TheoryInputs {
    pub const KEYS: &'static [&'static str] = &[
        "pi", "L", "G", "G_inf", "sigma", "nu", "beta1", "n", "N", "d", "delta_f", "epsilon",
    ];

    /// Sets one field by its key in [`TheoryInputs::KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
        }
        match key {
            "pi" => self.pi = num(key, value)?,
            "L" => self.l = num(key, value)?,
            "G" => self.g = num(key, value)?,
            "G_inf" => self.g_inf = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "N" => self.samples_per_worker = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "delta_f" => self.delta_f = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut inp = TheoryInputs::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parsed = match line.split_once('=') {
                Some((k, v)) => inp.set(k.trim(), v.trim()),
                None => Err(Error::Config(format!("expected 'key = value', got '{line}'"))),
            };
            parsed.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(inp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pi) {
            return Err(Error::Domain(format!("pi must lie in [0, 1), got {}", self.pi)));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::Domain(format!("beta1 must lie in [0, 1), got {}", self.beta1)));
        }
        let positive = [
            ("L", self.l),
            ("G", self.g),
            ("G_inf", self.g_inf),
            ("sigma", self.sigma),
            ("nu", self.nu),
            ("delta_f", self.delta_f),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {value}")));
            }
        }
        if self.n == 0 || self.samples_per_worker < 2 || self.d == 0 {
            return Err(Error::Domain("need n >= 1, N >= 2 and d >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub c2: f64,
    pub g_tilde: f64,
    pub g_tilde_inf: f64,
    pub c: f64,
    pub c1: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub alpha_max: f64,
    pub tau_min: u64,
    pub t_min: u64,
}

impl TheoremConstants {
    /// Label/value pairs in a stable order, for printing.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("C2", self.c2),
            ("G_tilde", self.g_tilde),
            ("G_tilde_inf", self.g_tilde_inf),
            ("C", self.c),
            ("C1", self.c1),
            ("M1", self.m1),
            ("M2", self.m2),
            ("M3", self.m3),
            ("M4", self.m4),
            ("M5", self.m5),
            ("alpha_max", self.alpha_max),
            ("tau_min", self.tau_min as f64),
            ("T_min", self.t_min as f64),
        ]
    }
}

pub fn theorem_constants(inp: &TheoryInputs) -> Result<TheoremConstants> {
    inp.validate()?;
    let sp = inp.pi.sqrt();
    let c2 = (1.0 + sp).powi(2) / (1.0 - sp).powi(2);
    let g_tilde = c2 * inp.g;
    let g_tilde_inf = c2 * inp.g_inf;
    let c = 2.0 * (g_tilde_inf * g_tilde_inf + inp.nu).sqrt();
    let ratio = inp.beta1 / (1.0 - inp.beta1);
    let c1 = 2.0 * inp.l + 3.0 * inp.l * ratio * ratio;
    let sqrt_nu = inp.nu.sqrt();
    let d = inp.d as f64;
    let n = inp.n as f64;
    let big_n = inp.samples_per_worker as f64;
    let (eps, sigma) = (inp.epsilon, inp.sigma);

    let m1 = c * inp.delta_f;
    let m2 = c * inp.g * g_tilde / ((1.0 - inp.beta1) * sqrt_nu);
    let m3 = 32.0 * c * c1 * g_tilde * g_tilde / inp.nu
        + 2.0 * sp * c * inp.l * inp.g * g_tilde * d.sqrt() / (inp.nu * (1.0 - sp).powi(2));
    let m4 = 4.0 * c * c1 / inp.nu;
    let m5 = 4.0 * sp * c * inp.g / (sqrt_nu * (1.0 - sp).powi(2));

    let alpha_max = n * eps / (6.0 * n * m3 + 6.0 * m4 * sigma * sigma);
    let s = (3.0 * m5 * sigma).powi(2);
    let tau_min = (big_n * s / ((big_n - 1.0) * eps * eps + s)).ceil() as u64;
    let t_sum = 36.0 * m1 * m3 / (eps * eps) + 36.0 * m1 * m4 * sigma * sigma / (n * eps * eps) + 3.0 * m2 / eps;
    let t_min = saturating_ceil(t_sum);

    Ok(TheoremConstants {
        c2,
        g_tilde,
        g_tilde_inf,
        c,
        c1,
        m1,
        m2,
        m3,
        m4,
        m5,
        alpha_max,
        tau_min,
        t_min,
    })
}

/// Without-replacement mini-batch variance factor `(N − τ)/(τ(N − 1))`.
pub fn minibatch_variance_factor(samples: u64, tau: u64) -> f64 {
    assert!(samples >= 2 && tau >= 1 && tau <= samples);
    (samples - tau) as f64 / (tau as f64 * (samples - 1) as f64)
}

fn saturating_ceil(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_compressor_constants() {
        let k = theorem_constants(&TheoryInputs {
            pi: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(k.c2, 1.0);
        assert_eq!(k.g_tilde, 1.0);
        assert_eq!(k.m5, 0.0);
        assert_eq!(k.tau_min, 0);
    }

    #[test]
    fn no_momentum_c1() {
        let inp = TheoryInputs {
            beta1: 0.0,
            l: 2.5,
            ..Default::default()
        };
        assert_eq!(theorem_constants(&inp).unwrap().c1, 5.0);
    }

    #[test]
    fn hand_computed_values() {
        // π = 1/4: √π = 1/2, C₂ = (3/2)²/(1/2)² = 9.
        let inp = TheoryInputs {
            pi: 0.25,
            l: 1.0,
            g: 1.0,
            g_inf: 1.0,
            sigma: 1.0,
            nu: 1.0,
            beta1: 0.0,
            n: 1,
            samples_per_worker: 10,
            d: 4,
            delta_f: 1.0,
            epsilon: 1.0,
        };
        let k = theorem_constants(&inp).unwrap();
        assert!((k.c2 - 9.0).abs() < 1e-12);
        let c = 2.0 * (81.0f64 + 1.0).sqrt();
        assert!((k.c - c).abs() < 1e-12);
        assert_eq!(k.c1, 2.0);
        assert!((k.m1 - c).abs() < 1e-12);
        assert!((k.m2 - 9.0 * c).abs() < 1e-9);
        // M₃ = 32·C·2·81 + 2·(1/2)·C·9·2/(1/4) = 5184C + 72C.
        assert!((k.m3 - 5256.0 * c).abs() < 1e-8);
        assert!((k.m4 - 8.0 * c).abs() < 1e-12);
        // M₅ = 4·(1/2)·C/(1/4) = 8C.
        assert!((k.m5 - 8.0 * c).abs() < 1e-12);
    }

    #[test]
    fn rejects_pi_at_least_one() {
        assert!(matches!(
            theorem_constants(&TheoryInputs {
                pi: 1.0,
                ..Default::default()
            }),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn parses_flat_text() {
        let inp = TheoryInputs::parse("pi = 0.25 # scaled sign\nL = 2\nN = 50\n\n").unwrap();
        assert_eq!((inp.pi, inp.l, inp.samples_per_worker), (0.25, 2.0, 50));
        assert!(matches!(
            TheoryInputs::parse("x = 1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(TheoryInputs::parse("pi = high").is_err());
    }

    #[test]
    fn full_batch_has_no_variance() {
        assert_eq!(minibatch_variance_factor(64, 64), 0.0);
        assert_eq!(minibatch_variance_factor(64, 1), 1.0);
    }

    #[test]
    fn monotone_in_pi() {
        let mut prev: Option<TheoremConstants> = None;
        for i in 0..10 {
            let k = theorem_constants(&TheoryInputs {
                pi: i as f64 / 10.0,
                ..Default::default()
            })
            .unwrap();
            if let Some(p) = prev {
                assert!(k.m3 >= p.m3 && k.m5 >= p.m5 && k.t_min >= p.t_min);
            }
            prev = Some(k);
        }
    }
}
