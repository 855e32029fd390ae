use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{shape_err, HopfieldError, Result};
use crate::harness::seed::rng_from_seed;
use crate::hopfield::{PatternStore, QueryState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatternKind {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// Uniform on the sphere of the given radius.
    Sphere { radius: f64 },
    /// i.i.d. Bernoulli(density) entries in {0, 1}.
    SparseBinary { density: f64 },
}

impl PatternKind {
    fn validate(&self) -> Result<()> {
        match *self {
            PatternKind::Gaussian => Ok(()),
            PatternKind::Sphere { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            PatternKind::SparseBinary { density } if density > 0.0 && density <= 1.0 => Ok(()),
            other => Err(HopfieldError::InvalidParameter(format!("invalid pattern kind {other}"))),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternKind::Gaussian => write!(f, "gaussian"),
            PatternKind::Sphere { radius } => write!(f, "sphere:{radius}"),
            PatternKind::SparseBinary { density } => write!(f, "sparse-binary:{density}"),
        }
    }
}

impl FromStr for PatternKind {
    type Err = HopfieldError;

    /// `gaussian`, `sphere[:radius]` or `sparse-binary[:density]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| {
                a.parse()
                    .map_err(|_| HopfieldError::InvalidParameter(format!("bad number `{a}` in pattern kind")))
            })
        };
        let kind = match name {
            "gaussian" => PatternKind::Gaussian,
            "sphere" => PatternKind::Sphere { radius: number(1.0)? },
            "sparse-binary" => PatternKind::SparseBinary { density: number(0.1)? },
            other => {
                return Err(HopfieldError::InvalidParameter(format!(
                    "unknown pattern kind `{other}` (gaussian, sphere[:m], sparse-binary[:density])"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// `count` random patterns of dimension `d`, deterministic in `seed`.
pub fn synthesize_patterns(d: usize, count: usize, kind: PatternKind, seed: u64) -> Result<PatternStore> {
    synthesize_with(&mut rng_from_seed(seed), d, count, kind)
}

pub(crate) fn synthesize_with<R: Rng>(rng: &mut R, d: usize, count: usize, kind: PatternKind) -> Result<PatternStore> {
    if d == 0 || count == 0 {
        return Err(HopfieldError::InvalidParameter(format!(
            "need d >= 1 and M >= 1, got d = {d}, M = {count}"
        )));
    }
    kind.validate()?;
    let mut xi = DMatrix::zeros(d, count);
    for mu in 0..count {
        let mut col = xi.column_mut(mu);
        match kind {
            PatternKind::Gaussian => col.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            PatternKind::Sphere { radius } => {
                // redraw the (measure-zero) all-zero direction
                loop {
                    col.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
                    let norm = col.norm();
                    if norm > 0.0 {
                        col.iter_mut().for_each(|v| *v *= radius / norm);
                        break;
                    }
                }
            }
            PatternKind::SparseBinary { density } => col
                .iter_mut()
                .for_each(|v| *v = if rng.random::<f64>() < density { 1.0 } else { 0.0 }),
        }
    }
    PatternStore::new(xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    /// Zero the trailing ⌈d/2⌉ coordinates.
    HalfMask,
    /// Zero a random subset of ⌈fraction·d⌉ coordinates.
    Mask { fraction: f64 },
    /// Add i.i.d. N(0, σ²) noise.
    Gaussian { sigma: f64 },
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Corruption::HalfMask => write!(f, "half-mask"),
            Corruption::Mask { fraction } => write!(f, "mask:{fraction}"),
            Corruption::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

pub fn corrupt(x: &QueryState, kind: Corruption, seed: u64) -> Result<QueryState> {
    corrupt_with(&mut rng_from_seed(seed), x, kind)
}

pub(crate) fn corrupt_with<R: Rng>(rng: &mut R, x: &QueryState, kind: Corruption) -> Result<QueryState> {
    let d = x.dim();
    let mut out: DVector<f64> = x.vector().clone();
    match kind {
        Corruption::HalfMask => {
            let masked = d.div_ceil(2);
            out.rows_mut(d - masked, masked).fill(0.0);
        }
        Corruption::Mask { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(HopfieldError::InvalidParameter(format!(
                    "mask fraction must lie in [0, 1], got {fraction}"
                )));
            }
            let masked = ((fraction * d as f64).ceil() as usize).min(d);
            for i in rand::seq::index::sample(rng, d, masked) {
                out[i] = 0.0;
            }
        }
        Corruption::Gaussian { sigma } => {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(HopfieldError::InvalidParameter(format!(
                    "noise sigma must be non-negative, got {sigma}"
                )));
            }
            if sigma > 0.0 {
                let noise = Normal::new(0.0, sigma).expect("sigma validated");
                out.iter_mut().for_each(|v| *v += noise.sample(rng));
            }
        }
    }
    QueryState::new(out)
}

/// ‖retrieved − target‖² < threshold.
pub fn retrieval_success(retrieved: &QueryState, target: &QueryState, threshold: f64) -> Result<bool> {
    Ok(squared_error(retrieved, target, threshold)? < threshold)
}

pub(crate) fn squared_error(retrieved: &QueryState, target: &QueryState, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(HopfieldError::InvalidParameter(format!(
            "success threshold must be positive, got {threshold}"
        )));
    }
    if retrieved.dim() != target.dim() {
        return Err(shape_err("retrieved dimension", target.dim(), retrieved.dim()));
    }
    Ok((retrieved.vector() - target.vector()).norm_squared())
}
