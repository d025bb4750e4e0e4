//! Contractive compressors and the Markov compression sequence.
//!
//! A compressor `C` is contractive with factor `π` when
//! `E‖C(x) − x‖² ≤ π‖x‖²`. The shipped compressors:
//!
//! | kind          | output                          | π                          | wire bits               |
//! |---------------|---------------------------------|----------------------------|-------------------------|
//! | `identity`    | `x`                             | 0                          | `32·d`                  |
//! | `scaled_sign` | `(‖x‖₁/d)·sign(x)`              | `1 − ‖x‖₁²/(d‖x‖₂²)` exact | `32 + d`                |
//! | `top_k`       | `k` largest magnitudes kept     | `≤ 1 − k/d`                | `k·(32 + ⌈log₂ d⌉)`     |
//! | `rand_k`      | `k` uniform coordinates kept    | `1 − k/d` in expectation   | `k·(32 + ⌈log₂ d⌉)`     |
//!
//! `sign(0)` is taken as `+1`. Top-k ties are broken towards the lower index.
//! A sparse entry is priced as a 32-bit value plus a `⌈log₂ d⌉`-bit index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::vector::ModelVector;

/// Bits charged for one full-precision scalar on the wire.
pub const SCALAR_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressorKind {
    Identity,
    ScaledSign,
    TopK,
    RandK,
}

impl CompressorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CompressorKind::Identity => "identity",
            CompressorKind::ScaledSign => "scaled_sign",
            CompressorKind::TopK => "top_k",
            CompressorKind::RandK => "rand_k",
        }
    }

    pub fn is_sparsifier(self) -> bool {
        matches!(self, CompressorKind::TopK | CompressorKind::RandK)
    }
}

impl FromStr for CompressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CompressorKind::Identity),
            "scaled_sign" => Ok(CompressorKind::ScaledSign),
            "top_k" => Ok(CompressorKind::TopK),
            "rand_k" => Ok(CompressorKind::RandK),
            other => Err(Error::config(format!("unknown compressor '{other}'"))),
        }
    }
}

impl fmt::Display for CompressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A compressor together with its sparsity parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompressorSpec {
    Identity,
    ScaledSign,
    TopK { k: usize },
    RandK { k: usize },
}

impl CompressorSpec {
    pub fn from_kind(kind: CompressorKind, k: Option<usize>) -> Result<Self> {
        let need_k = || k.ok_or_else(|| Error::config(format!("{kind} requires k")));
        Ok(match kind {
            CompressorKind::Identity => CompressorSpec::Identity,
            CompressorKind::ScaledSign => CompressorSpec::ScaledSign,
            CompressorKind::TopK => CompressorSpec::TopK { k: need_k()? },
            CompressorKind::RandK => CompressorSpec::RandK { k: need_k()? },
        })
    }

    /// `k = ⌈fraction·d⌉`, at least 1.
    pub fn k_from_fraction(fraction: f64, dim: usize) -> usize {
        ((fraction * dim as f64).ceil() as usize).clamp(1, dim.max(1))
    }

    pub fn kind(&self) -> CompressorKind {
        match self {
            CompressorSpec::Identity => CompressorKind::Identity,
            CompressorSpec::ScaledSign => CompressorKind::ScaledSign,
            CompressorSpec::TopK { .. } => CompressorKind::TopK,
            CompressorSpec::RandK { .. } => CompressorKind::RandK,
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            CompressorSpec::TopK { k } | CompressorSpec::RandK { k } => Some(k),
            _ => None,
        }
    }

    /// Checks `1 ≤ k ≤ dim` for the sparsifiers.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(k) = self.k() {
            if k == 0 || k > dim {
                return Err(Error::config(format!(
                    "{} needs 1 <= k <= d, got k={k}, d={dim}",
                    self.kind()
                )));
            }
        }
        Ok(())
    }

    /// Contraction factor for this particular `x`: exact for identity and
    /// scaled sign, the expectation for rand-k, and the upper bound `1 − k/d`
    /// for top-k.
    pub fn analytical_pi(&self, x: &ModelVector) -> f64 {
        let d = x.dim() as f64;
        match *self {
            CompressorSpec::Identity => 0.0,
            CompressorSpec::ScaledSign => {
                let n2 = x.norm_sq();
                if n2 == 0.0 {
                    0.0
                } else {
                    let n1 = x.norm_l1();
                    1.0 - n1 * n1 / (d * n2)
                }
            }
            CompressorSpec::TopK { k } | CompressorSpec::RandK { k } => 1.0 - k as f64 / d,
        }
    }

    /// Worst case of the contraction factor over all `x ∈ R^d`. For scaled
    /// sign the worst case is a one-hot vector, giving `1 − 1/d`.
    pub fn worst_case_pi(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            CompressorSpec::Identity => 0.0,
            CompressorSpec::ScaledSign => 1.0 - 1.0 / d,
            CompressorSpec::TopK { k } | CompressorSpec::RandK { k } => 1.0 - k as f64 / d,
        }
    }

    /// Applies the compressor. `rng` is consulted only by rand-k.
    ///
    /// # Panics
    /// If a sparsifier's `k` is outside `1..=d`; call [`validate`](Self::validate) first.
    pub fn compress(&self, x: &ModelVector, rng: &mut RandomStream) -> CompressedMessage {
        let dim = x.dim();
        let payload = match *self {
            CompressorSpec::Identity => Payload::Dense {
                values: x.as_slice().to_vec(),
            },
            CompressorSpec::ScaledSign => {
                let scale = if dim == 0 { 0.0 } else { x.norm_l1() / dim as f64 };
                let mut negative = vec![0u8; dim.div_ceil(8)];
                for (i, v) in x.iter().enumerate() {
                    if *v < 0.0 {
                        negative[i / 8] |= 1 << (i % 8);
                    }
                }
                Payload::ScaledSign { scale, negative }
            }
            CompressorSpec::TopK { k } => {
                assert!(k >= 1 && k <= dim, "top_k needs 1 <= k <= d");
                let mut order: Vec<u32> = (0..dim as u32).collect();
                let by_magnitude = |a: &u32, b: &u32| {
                    let (va, vb) = (x[*a as usize].abs(), x[*b as usize].abs());
                    vb.total_cmp(&va).then(a.cmp(b))
                };
                if k < dim {
                    order.select_nth_unstable_by(k - 1, by_magnitude);
                    order.truncate(k);
                }
                order.sort_unstable();
                Payload::Sparse {
                    entries: order.into_iter().map(|i| (i, x[i as usize])).collect(),
                }
            }
            CompressorSpec::RandK { k } => {
                assert!(k >= 1 && k <= dim, "rand_k needs 1 <= k <= d");
                let mut chosen = rng.choose_distinct(dim, k);
                chosen.sort_unstable();
                Payload::Sparse {
                    entries: chosen.into_iter().map(|i| (i as u32, x[i])).collect(),
                }
            }
        };
        CompressedMessage { dim, payload }
    }

    /// `‖C(x) − x‖²` for the realized draw.
    pub fn compression_error_sq(&self, x: &ModelVector, rng: &mut RandomStream) -> f64 {
        let c = self.compress(x, rng);
        c.error_sq(x)
    }

    /// `‖C(x) − x‖² / ‖x‖²` for the realized draw; 0 for the zero vector.
    pub fn measured_pi(&self, x: &ModelVector, rng: &mut RandomStream) -> f64 {
        let c = self.compress(x, rng);
        c.relative_error(x)
    }
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k() {
            Some(k) => write!(f, "{}(k={k})", self.kind()),
            None => f.write_str(self.kind().as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Scale and a bitmap of negative coordinates, bit `i` at byte `i / 8`,
    /// position `i % 8`.
    ScaledSign {
        scale: f64,
        negative: Vec<u8>,
    },
    /// `(index, value)` pairs in ascending index order.
    Sparse {
        entries: Vec<(u32, f64)>,
    },
    Dense {
        values: Vec<f64>,
    },
}

/// What actually crosses the wire for one compressed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMessage {
    dim: usize,
    payload: Payload,
}

const TAG_SCALED_SIGN: u8 = 1;
const TAG_SPARSE: u8 = 2;
const TAG_DENSE: u8 = 3;

impl CompressedMessage {
    /// An uncompressed (32 bits per coordinate) message.
    pub fn dense(x: &ModelVector) -> Self {
        CompressedMessage {
            dim: x.dim(),
            payload: Payload::Dense {
                values: x.as_slice().to_vec(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Accounting size in bits.
    pub fn bit_size(&self) -> u64 {
        let d = self.dim as u64;
        match &self.payload {
            Payload::ScaledSign { .. } => SCALAR_BITS + d,
            Payload::Sparse { entries } => entries.len() as u64 * (SCALAR_BITS + index_bits(self.dim)),
            Payload::Dense { .. } => SCALAR_BITS * d,
        }
    }

    pub fn decode(&self) -> ModelVector {
        let mut out = ModelVector::zeros(self.dim);
        self.add_into(&mut out);
        out
    }

    /// `target += decode(self)`. Both ends of a Markov sequence use this so
    /// their references stay bit-identical.
    pub(crate) fn add_into(&self, target: &mut ModelVector) {
        debug_assert_eq!(target.dim(), self.dim);
        let t = target.as_mut_slice();
        match &self.payload {
            Payload::ScaledSign { scale, negative } => {
                for (i, ti) in t.iter_mut().enumerate() {
                    let neg = negative[i / 8] >> (i % 8) & 1 == 1;
                    *ti += if neg { -scale } else { *scale };
                }
            }
            Payload::Sparse { entries } => {
                for &(i, v) in entries {
                    t[i as usize] += v;
                }
            }
            Payload::Dense { values } => {
                for (ti, v) in t.iter_mut().zip(values) {
                    *ti += v;
                }
            }
        }
    }

    /// `‖decode(self) − x‖²`.
    pub fn error_sq(&self, x: &ModelVector) -> f64 {
        self.decode().dist_sq(x).expect("message built from x")
    }

    pub fn relative_error(&self, x: &ModelVector) -> f64 {
        let n2 = x.norm_sq();
        if n2 == 0.0 {
            0.0
        } else {
            self.error_sq(x) / n2
        }
    }

    /// Trace encoding: tag byte, `u32` dimension, then the payload, all
    /// little-endian. Independent of [`bit_size`](Self::bit_size).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let tag = match &self.payload {
            Payload::ScaledSign { .. } => TAG_SCALED_SIGN,
            Payload::Sparse { .. } => TAG_SPARSE,
            Payload::Dense { .. } => TAG_DENSE,
        };
        out.push(tag);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        match &self.payload {
            Payload::ScaledSign { scale, negative } => {
                out.extend_from_slice(&scale.to_le_bytes());
                out.extend_from_slice(negative);
            }
            Payload::Sparse { entries } => {
                out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
                for (i, v) in entries {
                    out.extend_from_slice(&i.to_le_bytes());
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Payload::Dense { values } => {
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let tag = r.take(1)?[0];
        let dim = r.u32()? as usize;
        let payload = match tag {
            TAG_SCALED_SIGN => {
                let scale = r.f64()?;
                let negative = r.take(dim.div_ceil(8))?.to_vec();
                Payload::ScaledSign { scale, negative }
            }
            TAG_SPARSE => {
                let count = r.u32()? as usize;
                let mut entries = Vec::with_capacity(count.min(dim));
                for _ in 0..count {
                    let i = r.u32()?;
                    if i as usize >= dim {
                        return Err(codec_error(format!("index {i} out of range for d={dim}")));
                    }
                    entries.push((i, r.f64()?));
                }
                Payload::Sparse { entries }
            }
            TAG_DENSE => Payload::Dense {
                values: (0..dim).map(|_| r.f64()).collect::<Result<_>>()?,
            },
            other => return Err(codec_error(format!("unknown message tag {other}"))),
        };
        if r.pos != bytes.len() {
            return Err(codec_error("trailing bytes after message".into()));
        }
        Ok(CompressedMessage { dim, payload })
    }
}

/// `⌈log₂ d⌉`, with 0 for `d ≤ 1`.
pub fn index_bits(dim: usize) -> u64 {
    if dim <= 1 {
        0
    } else {
        u64::from(usize::BITS - (dim - 1).leading_zeros())
    }
}

fn codec_error(message: String) -> Error {
    Error::Parse { line: 0, message }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(codec_error("truncated message".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Running reference of a Markov compression sequence:
/// `ĝ_{t+1} = ĝ_t + C(w_{t+1} − ĝ_t)`.
///
/// The sender calls [`step`](Self::step); every receiver holding a replica
/// calls [`apply`](Self::apply) with the same message. Only the message is
/// transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovState {
    reference: ModelVector,
}

impl MarkovState {
    /// Starts from `C(0) = 0`, which holds for every shipped compressor.
    pub fn new(dim: usize) -> Self {
        MarkovState {
            reference: ModelVector::zeros(dim),
        }
    }

    pub fn reference(&self) -> &ModelVector {
        &self.reference
    }

    pub fn step(
        &mut self,
        spec: &CompressorSpec,
        input: &ModelVector,
        rng: &mut RandomStream,
    ) -> Result<CompressedMessage> {
        self.reference.check_dim(input)?;
        let diff = input.sub(&self.reference)?;
        let msg = spec.compress(&diff, rng);
        msg.add_into(&mut self.reference);
        Ok(msg)
    }

    pub fn apply(&mut self, msg: &CompressedMessage) -> Result<()> {
        if msg.dim() != self.reference.dim() {
            return Err(Error::Dimension {
                expected: self.reference.dim(),
                found: msg.dim(),
            });
        }
        msg.add_into(&mut self.reference);
        Ok(())
    }
}
