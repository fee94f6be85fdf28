//! Integration domains and reproducible uniform sampling.
//!
//! All estimators in this crate integrate against the uniform probability
//! measure on a box domain, so "the integral of f" always means the mean of f
//! over the domain. Four box shapes cover every supported configuration: the
//! unit interval, the symmetric interval [-1, 1], and their d-dimensional
//! products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CvmcError, Result};

/// A box domain carrying the uniform probability measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// [0, 1]
    UnitInterval01,
    /// [-1, 1]
    IntervalM1P1,
    /// [0, 1]^d
    UnitCube { d: usize },
    /// [-1, 1]^d
    CubeM1P1 { d: usize },
}

impl Domain {
    pub fn dim(self) -> usize {
        match self {
            Domain::UnitInterval01 | Domain::IntervalM1P1 => 1,
            Domain::UnitCube { d } | Domain::CubeM1P1 { d } => d,
        }
    }

    /// Lower and upper bound shared by every axis.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Domain::UnitInterval01 | Domain::UnitCube { .. } => (0.0, 1.0),
            Domain::IntervalM1P1 | Domain::CubeM1P1 { .. } => (-1.0, 1.0),
        }
    }

    pub fn volume(self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).powi(self.dim() as i32)
    }

    pub fn contains(self, x: &[f64]) -> bool {
        let (lo, hi) = self.bounds();
        x.len() == self.dim() && x.iter().all(|&v| v >= lo && v <= hi)
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::UnitInterval01 => write!(f, "[0,1]"),
            Domain::IntervalM1P1 => write!(f, "[-1,1]"),
            Domain::UnitCube { d } => write!(f, "[0,1]^{d}"),
            Domain::CubeM1P1 { d } => write!(f, "[-1,1]^{d}"),
        }
    }
}

/// An i.i.d. uniform sample on a domain, stored row-major (one point per row).
///
/// The draw is a pure function of `(domain, n, seed)`: the same triple gives
/// bit-identical values on every platform and in every thread layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoints {
    domain: Domain,
    n: usize,
    seed: u64,
    values: Vec<f64>,
}

impl SamplePoints {
    /// Wrap explicit coordinates (row-major) as a sample, e.g. for worked
    /// examples with hand-picked points. The stored seed is 0.
    pub fn from_values(domain: Domain, values: Vec<f64>) -> Result<Self> {
        let d = domain.dim();
        if d == 0 || values.len() % d != 0 {
            return Err(CvmcError::InvalidSpec {
                msg: format!(
                    "{} coordinates do not form whole points in {domain}",
                    values.len()
                ),
            });
        }
        for point in values.chunks_exact(d) {
            if !domain.contains(point) {
                return Err(CvmcError::DomainMismatch {
                    msg: format!("point {point:?} lies outside {domain}"),
                });
            }
        }
        Ok(SamplePoints {
            domain,
            n: values.len() / d,
            seed: 0,
            values,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Coordinates of the i-th point.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.domain.dim();
        &self.values[i * d..(i + 1) * d]
    }

    /// All coordinates, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.domain.dim())
    }
}

/// Draw `n` uniform points on `domain` from a ChaCha8 stream seeded with `seed`.
pub fn draw_samples(domain: Domain, n: usize, seed: u64) -> Result<SamplePoints> {
    let d = domain.dim();
    if d == 0 {
        return Err(CvmcError::InvalidSpec {
            msg: "domain dimension must be at least 1".into(),
        });
    }
    let (lo, hi) = domain.bounds();
    let width = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let u: f64 = rng.random();
        values.push(lo + width * u);
    }
    Ok(SamplePoints {
        domain,
        n,
        seed,
        values,
    })
}

/// SplitMix64 mixing step, used to derive stream seeds for replications.
///
/// Replication r of a run seeded with s draws from seed `s ^ splitmix64(r)`,
/// which decorrelates the streams while staying order-independent.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
