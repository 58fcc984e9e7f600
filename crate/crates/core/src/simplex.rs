//! Probability vectors on the finite simplex.
//!
//! A [`Distribution`] is a strictly positive vector of at least two entries
//! summing to one. Both the target law and the evolving law of the chain are
//! represented by it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};

use crate::error::{Error, Result};

/// Absolute tolerance on `|sum - 1|` accepted by [`validate_distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Smallest entry accepted from [`sample_uniform_simplex`] before a redraw.
const MIN_SAMPLED_ENTRY: f64 = 1e-12;

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    values: Vec<f64>,
}

impl Distribution {
    /// Validates `raw` with the default tolerance.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        validate_distribution(raw, NORMALIZATION_TOL)
    }

    /// Uniform law on `n` states.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewStates { n });
        }
        Ok(Self {
            values: vec![1.0 / n as f64; n],
        })
    }

    /// Wraps integrator output without re-validation. Entries may touch zero
    /// and the sum may drift by rounding.
    pub(crate) fn from_raw_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub(crate) fn check_same_len(&self, other: &Distribution) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Checks that `raw` is a strictly positive vector of at least two entries
/// whose sum is within `tol` of one, then rescales it by its sum.
pub fn validate_distribution(raw: Vec<f64>, tol: f64) -> Result<Distribution> {
    if raw.len() < 2 {
        return Err(Error::TooFewStates { n: raw.len() });
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveEntry { index, value });
    }
    let sum: f64 = raw.iter().sum();
    if !((sum - 1.0).abs() <= tol) {
        return Err(Error::NotNormalized { sum, tol });
    }
    let values = if sum == 1.0 {
        raw
    } else {
        raw.into_iter().map(|v| v / sum).collect()
    };
    Ok(Distribution { values })
}

/// Seeded random stream. Identical `(seed, stream)` pairs reproduce identical
/// draws regardless of which thread consumes them.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draws a point uniformly from the open simplex on `n` states
/// (normalized i.i.d. standard exponentials, i.e. a flat Dirichlet draw).
pub fn sample_uniform_simplex(n: usize, source: &mut RandomSource) -> Result<Distribution> {
    if n < 2 {
        return Err(Error::TooFewStates { n });
    }
    loop {
        let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(source.rng())).collect();
        let total: f64 = draws.iter().sum();
        let values: Vec<f64> = draws.into_iter().map(|x| x / total).collect();
        if values.iter().all(|&v| v >= MIN_SAMPLED_ENTRY) {
            return Ok(Distribution { values });
        }
    }
}

/// Sum of absolute differences between two laws on the same state space.
pub fn l1_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.check_same_len(q)?;
    Ok(l1(p.as_slice(), q.as_slice()))
}

pub(crate) fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}
