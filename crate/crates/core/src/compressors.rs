//! Compressors with bounded relative error.
//!
//! Every compressor `C` here satisfies `E‖C(x)/r − x‖² ≤ (1 − δ)‖x‖²` for
//! some scaling `r > 0` and contraction `δ ∈ (0, 1]`. A direct consequence is
//! `E‖C(x) − x‖² ≤ δ₀‖x‖²` with `δ₀ = 2r²(1 − δ) + 2(1 − r)²`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::MeanSe;

/// Width of a full-precision scalar on the wire.
pub const B1: u64 = 64;

/// Largest quantizer width; keeps `2^(k−1)` and `4^k` exact in `f64`.
pub const MAX_QUANT_BITS: u32 = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompressorKind {
    Identity,
    /// Unbiased `k`-bit quantizer with uniform dither.
    Quantizer { bits: u32 },
    TopK { k: usize },
    RandK { k: usize },
    NormSign,
}

impl fmt::Display for CompressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompressorKind::Identity => write!(f, "identity"),
            CompressorKind::Quantizer { bits } => write!(f, "quant:{bits}"),
            CompressorKind::TopK { k } => write!(f, "topk:{k}"),
            CompressorKind::RandK { k } => write!(f, "randk:{k}"),
            CompressorKind::NormSign => write!(f, "normsign"),
        }
    }
}

impl FromStr for CompressorKind {
    type Err = Error;

    /// `identity | quant:k | topk:k | randk:k | normsign`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::param("compressor", reason);
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        let count = |arg: Option<&str>| -> Result<usize> {
            let arg = arg.ok_or_else(|| bad(format!("`{name}` needs an argument, e.g. `{name}:4`")))?;
            let k: usize = arg
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{arg}` is not a positive integer")))?;
            if k == 0 {
                return Err(bad(format!("`{name}` argument must be at least 1")));
            }
            Ok(k)
        };
        let no_arg = |kind: CompressorKind| match arg {
            None => Ok(kind),
            Some(_) => Err(bad(format!("`{name}` takes no argument"))),
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "identity" => no_arg(CompressorKind::Identity),
            "normsign" => no_arg(CompressorKind::NormSign),
            "quant" => {
                let k = count(arg)?;
                if k > MAX_QUANT_BITS as usize {
                    return Err(bad(format!("quantizer width {k} exceeds {MAX_QUANT_BITS}")));
                }
                Ok(CompressorKind::Quantizer { bits: k as u32 })
            }
            "topk" => Ok(CompressorKind::TopK { k: count(arg)? }),
            "randk" => Ok(CompressorKind::RandK { k: count(arg)? }),
            other => Err(bad(format!(
                "unknown compressor `{other}` (expected identity, quant:k, topk:k, randk:k or normsign)"
            ))),
        }
    }
}

/// A compressor instantiated for dimension `p`, with its constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressorSpec {
    pub kind: CompressorKind,
    pub p: usize,
    pub r: f64,
    pub delta: f64,
    pub delta0: f64,
    pub bits_per_vector: u64,
    pub b1: u64,
}

pub fn delta0(r: f64, delta: f64) -> f64 {
    2.0 * r * r * (1.0 - delta) + 2.0 * (1.0 - r) * (1.0 - r)
}

/// Constants `(r, δ, b_v)` of a compressor in dimension `p`.
pub fn params_for(kind: CompressorKind, p: usize) -> Result<CompressorSpec> {
    if p == 0 {
        return Err(Error::param("p", "dimension must be at least 1"));
    }
    let pf = p as f64;
    let pu = p as u64;
    let (r, delta, bits) = match kind {
        CompressorKind::Identity => (1.0, 1.0, pu * B1),
        CompressorKind::Quantizer { bits } => {
            if bits == 0 || bits > MAX_QUANT_BITS {
                return Err(Error::param("compressor", format!("quantizer width {bits} outside [1, {MAX_QUANT_BITS}]")));
            }
            let r = 1.0 + pf / 4f64.powi(bits as i32);
            (r, 1.0 / r, (bits as u64 + 1) * pu + B1)
        }
        CompressorKind::TopK { k } | CompressorKind::RandK { k } => {
            if k == 0 || k > p {
                return Err(Error::param("compressor", format!("k = {k} must lie in [1, p = {p}]")));
            }
            (1.0, k as f64 / pf, k as u64 * B1)
        }
        CompressorKind::NormSign => (pf / 2.0, 1.0 / (pf * pf), pu + B1),
    };
    Ok(CompressorSpec {
        kind,
        p,
        r,
        delta,
        delta0: delta0(r, delta),
        bits_per_vector: bits,
        b1: B1,
    })
}

impl CompressorSpec {
    pub fn is_stochastic(&self) -> bool {
        matches!(self.kind, CompressorKind::Quantizer { .. } | CompressorKind::RandK { .. })
    }

    /// Applies the compressor. Randomness (dither, coordinate choice) is drawn
    /// from `rng`; deterministic kinds leave it untouched.
    pub fn compress<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.p);
        match self.kind {
            CompressorKind::Identity => x.clone(),
            CompressorKind::Quantizer { bits } => {
                let norm = x.amax();
                let levels = 2f64.powi(bits as i32 - 1);
                // draw the full dither vector even for x = 0 so the stream
                // position does not depend on the data
                let dither: Vec<f64> = (0..x.len()).map(|_| rng.random::<f64>()).collect();
                if norm == 0.0 {
                    return DVector::zeros(x.len());
                }
                let scale = norm / levels;
                DVector::from_iterator(
                    x.len(),
                    x.iter().zip(&dither).map(|(&xi, &w)| {
                        scale * sign(xi) * (levels * xi.abs() / norm + w).floor()
                    }),
                )
            }
            CompressorKind::TopK { k } => {
                let mut idx: Vec<usize> = (0..x.len()).collect();
                // stable sort keeps the lower index first among equal magnitudes
                idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
                let mut out = DVector::zeros(x.len());
                for &i in &idx[..k] {
                    out[i] = x[i];
                }
                out
            }
            CompressorKind::RandK { k } => {
                let mut out = DVector::zeros(x.len());
                for i in rand::seq::index::sample(rng, x.len(), k) {
                    out[i] = x[i];
                }
                out
            }
            CompressorKind::NormSign => {
                let half = x.amax() / 2.0;
                x.map(|xi| half * sign(xi))
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monte-Carlo estimate of `E‖C(x)/r − x‖²/‖x‖²` over standard-normal `x`.
pub fn contraction_estimate<R: Rng + ?Sized>(spec: &CompressorSpec, trials: usize, rng: &mut R) -> MeanSe {
    let ratios = contraction_samples(spec, trials, rng);
    MeanSe::from_samples(&ratios)
}

/// The individual ratios behind [`contraction_estimate`].
pub fn contraction_samples<R: Rng + ?Sized>(spec: &CompressorSpec, trials: usize, rng: &mut R) -> Vec<f64> {
    (0..trials.max(1))
        .map(|_| {
            let x = DVector::from_iterator(spec.p, (0..spec.p).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
            let c = spec.compress(&x, rng);
            (c / spec.r - &x).norm_squared() / x.norm_squared()
        })
        .collect()
}
