//! Reversible generators on a finite state space.
//!
//! A symmetric weight matrix `ω` with row sums `π` defines the generator
//! `Q_ij = ω_ij / π_i` (j ≠ i), which satisfies detailed balance with
//! respect to `π`. The optimal weights `ω*_ij = c π_i π_j` with
//! `c = 1 / (1 − min π)` give the rank-one generator `Q = c(𝟙πᵀ − I)`.
//! The Metropolis–Hastings generator with uniform proposal is the baseline.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::simplex::{Distribution, RandomSource};

/// Tolerance on `|Σ_j ω_ij − π_i|` and on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// The multiplier `c = 1 / (1 − min π)` of the optimal generator.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RateConstant(pub f64);

impl RateConstant {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `c = 1 / (1 − min_k π_k)`.
pub fn optimal_c(pi: &Distribution) -> RateConstant {
    RateConstant(1.0 / (1.0 - pi.min()))
}

/// Symmetric nonnegative weights with row sums equal to `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    omega: DMatrix<f64>,
    pi: Distribution,
}

impl WeightMatrix {
    /// Validates symmetry, nonnegativity and row sums. Asymmetry up to
    /// rounding is removed by averaging with the transpose.
    pub fn new(omega: DMatrix<f64>, pi: Distribution) -> Result<Self> {
        let n = pi.len();
        if omega.nrows() != n || omega.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: omega.nrows().max(omega.ncols()),
            });
        }
        let scale = omega.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                let w = omega[(i, j)];
                if !(w >= 0.0) {
                    return Err(Error::Domain(format!("weight ({i}, {j}) = {w} is negative")));
                }
                if (w - omega[(j, i)]).abs() > 1e-14 * scale {
                    return Err(Error::Domain(format!("weights are not symmetric at ({i}, {j})")));
                }
            }
        }
        let omega = (&omega + omega.transpose()) * 0.5;
        for i in 0..n {
            let sum: f64 = omega.row(i).sum();
            if (sum - pi[i]).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!(
                    "row {i} of the weights sums to {sum}, expected {}",
                    pi[i]
                )));
            }
        }
        Ok(Self { omega, pi })
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn pi(&self) -> &Distribution {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Whether `(i, j)` is an edge, i.e. `ω_ij > 0`.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.omega[(i, j)] > 0.0
    }

    /// Off-diagonal edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_edge(i, j))
            .collect()
    }
}

/// How a generator's flux can be evaluated. Every variant agrees with the
/// dense matrix up to rounding.
#[derive(Debug, Clone, PartialEq)]
enum Structure {
    Dense,
    /// `Q = c(𝟙πᵀ − I)`.
    Optimal { c: f64 },
    /// Uniform-proposal Metropolis–Hastings; states grouped by equal `π`,
    /// in increasing order of `π`.
    Metropolis { groups: Vec<Vec<usize>> },
}

/// A rate matrix together with the law it is meant to leave invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    q: DMatrix<f64>,
    pi: Distribution,
    exit: Vec<f64>,
    structure: Structure,
}

impl Generator {
    /// Checks nonnegative off-diagonal entries and zero row sums.
    /// Detailed balance is not required; see [`check_detailed_balance`].
    pub fn new(q: DMatrix<f64>, pi: Distribution) -> Result<Self> {
        let n = pi.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.nrows().max(q.ncols()),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && !(q[(i, j)] >= 0.0) {
                    return Err(Error::Domain(format!("rate ({i}, {j}) = {} is negative", q[(i, j)])));
                }
            }
            let sum: f64 = q.row(i).sum();
            if !(sum.abs() <= ROW_SUM_TOL) {
                return Err(Error::Domain(format!("row {i} of the generator sums to {sum}")));
            }
        }
        Ok(Self::with_structure(q, pi, Structure::Dense))
    }

    fn with_structure(q: DMatrix<f64>, pi: Distribution, structure: Structure) -> Self {
        let n = pi.len();
        let exit = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum())
            .collect();
        Self {
            q,
            pi,
            exit,
            structure,
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn pi(&self) -> &Distribution {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `max_i (−Q_ii)`; forward Euler preserves positivity for steps up to
    /// its reciprocal.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.len()).map(|i| -self.q[(i, i)]).fold(0.0, f64::max)
    }

    /// Right-hand side of the forward equation,
    /// `out_i = Σ_{j≠i} (Q_ji p_j − Q_ij p_i)`.
    pub fn flux(&self, p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(p.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        match &self.structure {
            Structure::Dense => self.dense_flux(p, out),
            &Structure::Optimal { c } => {
                let total: f64 = p.iter().sum();
                for ((o, &pk), &tk) in out.iter_mut().zip(p).zip(self.pi.as_slice()) {
                    *o = c * (tk * total - pk);
                }
            }
            Structure::Metropolis { groups } => self.metropolis_flux(groups, p, out),
        }
    }

    /// Dense evaluation of [`Generator::flux`], regardless of structure.
    pub fn dense_flux(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let col = self.q.column(i);
            let inflow: f64 = col.iter().zip(p).map(|(q, pj)| q * pj).sum::<f64>() - col[i] * p[i];
            *o = inflow - self.exit[i] * p[i];
        }
    }

    // Σ_{j≠i} min(1, π_i/π_j) p_j splits into states with π_j ≤ π_i (rate 1)
    // and π_j > π_i (rate π_i/π_j); both parts are prefix/suffix sums over
    // the sorted groups.
    fn metropolis_flux(&self, groups: &[Vec<usize>], p: &[f64], out: &mut [f64]) {
        let pi = self.pi.as_slice();
        let scale = 1.0 / (self.len() - 1) as f64;
        let mut suffix_ratio = vec![0.0; groups.len() + 1];
        for (g, members) in groups.iter().enumerate().rev() {
            let here: f64 = members.iter().map(|&j| p[j] / pi[j]).sum();
            suffix_ratio[g] = suffix_ratio[g + 1] + here;
        }
        let mut mass_le = 0.0;
        for (g, members) in groups.iter().enumerate() {
            mass_le += members.iter().map(|&j| p[j]).sum::<f64>();
            for &i in members {
                let inflow = (mass_le - p[i]) + pi[i] * suffix_ratio[g + 1];
                out[i] = scale * inflow - self.exit[i] * p[i];
            }
        }
    }
}

/// The optimal generator `Q_ij = c π_j` (j ≠ i), `Q_ii = −c(1 − π_i)`.
pub fn build_optimal_q(pi: &Distribution) -> Generator {
    let n = pi.len();
    let gap = 1.0 - pi.min();
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -(1.0 - pi[i]) / gap
        } else {
            pi[j] / gap
        }
    });
    let c = optimal_c(pi).value();
    Generator::with_structure(q, pi.clone(), Structure::Optimal { c })
}

/// `ω*_ij = c π_i π_j` off the diagonal and `(1 − c)π_i + cπ_i²` on it.
pub fn build_optimal_weights(pi: &Distribution) -> WeightMatrix {
    let n = pi.len();
    let m = pi.min();
    let gap = 1.0 - m;
    // (1 − c)π_i + cπ_i² = π_i(π_i − min π)/(1 − min π), exactly zero at the minimum.
    let omega = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            pi[i] * (pi[i] - m) / gap
        } else {
            pi[i] * pi[j] / gap
        }
    });
    WeightMatrix {
        omega,
        pi: pi.clone(),
    }
}

/// Random symmetric weights with full off-diagonal support and row sums `π`.
/// Off-diagonal entries are i.i.d. uniform, scaled so that every diagonal
/// entry stays nonnegative.
pub fn sample_weight_matrix(pi: &Distribution, source: &mut RandomSource) -> WeightMatrix {
    let n = pi.len();
    let rng = source.rng();
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random_range(0.05..1.0);
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    let scale = (0..n)
        .map(|i| pi[i] / omega.row(i).sum())
        .fold(f64::INFINITY, f64::min)
        * rng.random_range(0.3..1.0);
    omega *= scale;
    for i in 0..n {
        let off: f64 = omega.row(i).sum();
        omega[(i, i)] = (pi[i] - off).max(0.0);
    }
    WeightMatrix {
        omega,
        pi: pi.clone(),
    }
}

/// `Q_ij = ω_ij / π_i` (j ≠ i) with zero row sums.
pub fn build_q_from_weights(w: &WeightMatrix) -> Generator {
    let n = w.len();
    let pi = w.pi();
    let mut q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w.omega[(i, j)] / pi[i] });
    for i in 0..n {
        let out: f64 = (0..n).filter(|&k| k != i).map(|k| w.omega[(i, k)]).sum();
        q[(i, i)] = -out / pi[i];
    }
    Generator::with_structure(q, pi.clone(), Structure::Dense)
}

/// `Q^MH_ij = min(1, π_j/π_i) / (n − 1)` (j ≠ i) with zero row sums.
pub fn build_mh_q(pi: &Distribution) -> Generator {
    let n = pi.len();
    let scale = 1.0 / (n - 1) as f64;
    let mut q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            scale * (pi[j] / pi[i]).min(1.0)
        }
    });
    for i in 0..n {
        let out: f64 = (0..n).filter(|&k| k != i).map(|k| q[(i, k)]).sum();
        q[(i, i)] = -out;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pi[a].total_cmp(&pi[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(last) if pi[last[0]] == pi[i] => last.push(i),
            _ => groups.push(vec![i]),
        }
    }
    Generator::with_structure(q, pi.clone(), Structure::Metropolis { groups })
}

/// `max_{i,j} |Q_ij π_i − Q_ji π_j|`.
pub fn check_detailed_balance(g: &Generator) -> f64 {
    let n = g.len();
    let pi = g.pi();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((g.q[(i, j)] * pi[i] - g.q[(j, i)] * pi[j]).abs());
        }
    }
    worst
}

/// `max_i |Σ_j (Q_ji π_j − Q_ij π_i)|`: how far `π` is from stationary.
pub fn stationarity_residual(g: &Generator) -> f64 {
    let mut out = vec![0.0; g.len()];
    g.dense_flux(g.pi.as_slice(), &mut out);
    out.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Writes a matrix as row-major CSV with shortest round-trip decimals.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
