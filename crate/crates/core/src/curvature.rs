//! Gamma calculus for φ-divergences along reversible dynamics.
//!
//! With `u_i = p_i/π_i`, the mobility is `θ_ij = ω_ij (u_i − u_j)/(φ'(u_i) − φ'(u_j))`
//! and the potential differences are `η_ij = ω_ij (u_j − u_i)`. The quadratic
//! forms
//!
//! ```text
//! Γ1(f) = ½ Σ_ij (f_i − f_j)² θ_ij        Γ2(f) = ½ Σ_ij (f_i − f_j)² a_ij
//! ```
//!
//! satisfy `dD_φ/dt = −Γ1(φ'(u))` and `d²D_φ/dt² = 2Γ2(φ'(u))` along the
//! forward equation. The largest `κ` with `Γ2 ≥ κΓ1` is the curvature bound.
//!
//! Diagonal entries of `θ` and `a` are zero: they never enter either form.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::divergence::{PhiFunction, PhiKind};
use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::generator::{optimal_c, WeightMatrix};
use crate::simplex::{Distribution, RandomSource};

/// Relative gap `|u − v| ≤ SERIES_TOL·max(u, v)` below which θ and its
/// partials use a midpoint expansion.
const SERIES_TOL: f64 = 1e-6;

/// Eigenvalues of the θ-Laplacian below this fraction of its norm are null.
const NULL_THRESHOLD: f64 = 1e-10;

/// Log-ratio window and resolution of the one-variable ξ search.
const XI_Z_RANGE: f64 = 40.0;
const XI_GRID_1D: usize = 2001;
const XI_GRID_2D: usize = 201;
const GOLDEN_TOL: f64 = 1e-10;

/// θ, η and a at one point of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCoefficients {
    pub theta: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

/// Curvature bounds at one point, for one weight matrix and one φ.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    /// `min_{(i,j) ∈ E} a_ij/θ_ij`.
    pub ratio_bound: f64,
    /// Smallest generalized eigenvalue of `(L_a, L_θ)`.
    pub exact_kappa: f64,
    pub kappa_thm2: f64,
    pub kappa_sqrt_bound: f64,
}

impl CurvatureReport {
    const KEYS: [&'static str; 4] = ["ratio_bound", "exact_kappa", "kappa_thm2", "kappa_sqrt_bound"];

    fn values(&self) -> [f64; 4] {
        [
            self.ratio_bound,
            self.exact_kappa,
            self.kappa_thm2,
            self.kappa_sqrt_bound,
        ]
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        Self::KEYS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k}={}\n", fmt_f64(v)))
            .collect()
    }

    pub fn csv_header() -> String {
        Self::KEYS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values().iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
    }
}

fn ratios(w: &WeightMatrix, p: &Distribution) -> Result<Vec<f64>> {
    w.pi().check_same_len(p)?;
    Ok(p.as_slice().iter().zip(w.pi().as_slice()).map(|(a, b)| a / b).collect())
}

/// `(u − v)/(φ'(u) − φ'(v))`, with the limit `1/φ''(u)` at coincidence.
pub fn theta_scalar(phi: &PhiFunction, u: f64, v: f64) -> Result<f64> {
    let h = u - v;
    if h.abs() <= SERIES_TOL * u.max(v) {
        let m = 0.5 * (u + v);
        let d = phi.d2(m) + phi.d4(m) * h * h / 24.0;
        if !(d > 0.0) {
            return Err(Error::DegeneratePhi(m));
        }
        return Ok(1.0 / d);
    }
    Ok(h / phi.d1_difference(u, v))
}

/// Partial derivatives of [`theta_scalar`] in its first and second argument.
///
/// Writing `θ = 1/D` with the divided difference `D = (φ'(u) − φ'(v))/(u − v)`,
/// `∂_u D = (φ''(u) − D)/(u − v)`. Near coincidence the midpoint expansion
/// `∂_u D ≈ φ'''(m)/2 + φ''''(m)(u − v)/12` is used instead.
fn theta_partials(phi: &PhiFunction, u: f64, v: f64) -> (f64, f64) {
    let h = u - v;
    let (d, du, dv) = if h.abs() <= SERIES_TOL * u.max(v) {
        let m = 0.5 * (u + v);
        let (d2, d3, d4) = (phi.d2(m), phi.d3(m), phi.d4(m));
        (d2 + d4 * h * h / 24.0, 0.5 * d3 + d4 * h / 12.0, 0.5 * d3 - d4 * h / 12.0)
    } else {
        let d = phi.d1_difference(u, v) / h;
        (d, (phi.d2(u) - d) / h, (d - phi.d2(v)) / h)
    };
    (-du / (d * d), -dv / (d * d))
}

/// `θ_ij = ω_ij θ(p_i/π_i, p_j/π_j)` off the diagonal, zero elsewhere.
pub fn compute_theta(w: &WeightMatrix, phi: &PhiFunction, p: &Distribution) -> Result<DMatrix<f64>> {
    let u = ratios(w, p)?;
    let n = u.len();
    let omega = w.omega();
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if omega[(i, j)] > 0.0 {
                let t = omega[(i, j)] * theta_scalar(phi, u[i], u[j])?;
                theta[(i, j)] = t;
                theta[(j, i)] = t;
            }
        }
    }
    Ok(theta)
}

/// `η_ij = ω_ij (p_j/π_j − p_i/π_i)`.
pub fn compute_eta(w: &WeightMatrix, p: &Distribution) -> Result<DMatrix<f64>> {
    let u = ratios(w, p)?;
    let n = u.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            w.omega()[(i, j)] * (u[j] - u[i])
        }
    }))
}

/// The coefficients `a_ij` of Γ2, assembled from the partial derivatives of
/// θ and η and symmetrized.
///
/// Summing the eight terms over `k` leaves, for `i ≠ j`,
///
/// ```text
/// 2a_ij = ∂_i θ_ij H_i + ∂_j θ_ij H_j + θ_ij (S_i/π_i + S_j/π_j)
///       + ω_ij (T_i/π_i + T_j/π_j) − Σ_{k≠i,j} (ω_ik θ_jk + ω_jk θ_ik)/π_k
/// ```
///
/// with `H_i = Σ_k ω_ik (u_k − u_i)`, `S_i = Σ_{k≠i} ω_ik`, `T_i = Σ_k θ_ik`.
/// Pairs outside the edge set may carry nonzero coefficients through the
/// last sum.
pub fn compute_a(w: &WeightMatrix, phi: &PhiFunction, p: &Distribution) -> Result<DMatrix<f64>> {
    let u = ratios(w, p)?;
    let n = u.len();
    let pi = w.pi().as_slice();
    let mut omega = w.omega().clone();
    omega.fill_diagonal(0.0);
    let theta = compute_theta(w, phi, p)?;

    let h: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| omega[(i, k)] * (u[k] - u[i])).sum())
        .collect();
    let s: Vec<f64> = (0..n).map(|i| omega.row(i).sum() / pi[i]).collect();
    let t: Vec<f64> = (0..n).map(|i| theta.row(i).sum() / pi[i]).collect();
    let inv_pi = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, pi.iter().map(|x| 1.0 / x)));
    let m = &omega * inv_pi * &theta;

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut raw = -(m[(i, j)] + m[(j, i)]);
            if omega[(i, j)] > 0.0 {
                let (du, dv) = theta_partials(phi, u[i], u[j]);
                let wij = omega[(i, j)];
                raw += wij * du / pi[i] * h[i]
                    + wij * dv / pi[j] * h[j]
                    + theta[(i, j)] * (s[i] + s[j])
                    + wij * (t[i] + t[j]);
            }
            a[(i, j)] = 0.5 * raw;
            a[(j, i)] = 0.5 * raw;
        }
    }
    Ok(a)
}

pub fn compute_edge_coefficients(w: &WeightMatrix, phi: &PhiFunction, p: &Distribution) -> Result<EdgeCoefficients> {
    Ok(EdgeCoefficients {
        theta: compute_theta(w, phi, p)?,
        eta: compute_eta(w, p)?,
        a: compute_a(w, phi, p)?,
    })
}

/// `a_ij(ω, π) = ω_ij (S_i/π_i + S_j/π_j) − Σ_{k≠i,j} ω_ik ω_jk/π_k`.
pub fn compute_a_stationary(w: &WeightMatrix) -> DMatrix<f64> {
    let n = w.len();
    let pi = w.pi().as_slice();
    let omega = w.omega();
    let s: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&k| k != i).map(|k| omega[(i, k)]).sum::<f64>() / pi[i])
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let cross: f64 = (0..n)
            .filter(|&k| k != i && k != j)
            .map(|k| omega[(i, k)] * omega[(j, k)] / pi[k])
            .sum();
        omega[(i, j)] * (s[i] + s[j]) - cross
    })
}

fn quadratic_form(m: &DMatrix<f64>, f: &[f64]) -> Result<f64> {
    if m.nrows() != m.ncols() || m.nrows() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: f.len(),
        });
    }
    let n = f.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = f[i] - f[j];
            total += d * d * m[(i, j)];
        }
    }
    Ok(total)
}

/// `½ Σ_ij (f_i − f_j)² θ_ij`.
pub fn gamma1(theta: &DMatrix<f64>, f: &[f64]) -> Result<f64> {
    quadratic_form(theta, f)
}

/// `½ Σ_ij (f_i − f_j)² a_ij`.
pub fn gamma2(a: &DMatrix<f64>, f: &[f64]) -> Result<f64> {
    quadratic_form(a, f)
}

/// `min_{(i,j) ∈ E} a_ij/θ_ij`.
pub fn ratio_bound_kappa(theta: &DMatrix<f64>, a: &DMatrix<f64>, edges: &[(usize, usize)]) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let mut best = f64::INFINITY;
    for &(i, j) in edges {
        let t = theta[(i, j)];
        if !(t > 0.0) {
            return Err(Error::Domain(format!("theta vanishes on edge ({i}, {j})")));
        }
        best = best.min(a[(i, j)] / t);
    }
    Ok(best)
}

/// Laplacian of an edge-weight matrix, so that `fᵀ L f = ½ Σ (f_i − f_j)² m_ij`.
fn laplacian(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[(i, j)] = -m[(i, j)];
                l[(i, i)] += m[(i, j)];
            }
        }
    }
    l
}

/// Largest `κ` with `Γ2(f) ≥ κ Γ1(f)` for every `f` outside the null space of Γ1.
pub fn exact_kappa(theta: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    if theta.shape() != a.shape() || theta.nrows() != theta.ncols() {
        return Err(Error::DimensionMismatch {
            expected: theta.nrows(),
            found: a.nrows(),
        });
    }
    let l_theta = laplacian(theta);
    let l_a = laplacian(a);
    let eig = SymmetricEigen::new(l_theta);
    let norm = eig.eigenvalues.amax();
    if !(norm > 0.0) {
        return Err(Error::SingularPencil);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > NULL_THRESHOLD * norm)
        .collect();
    if keep.is_empty() {
        return Err(Error::SingularPencil);
    }
    let n = theta.nrows();
    let b = DMatrix::from_fn(n, keep.len(), |r, c| {
        let k = keep[c];
        eig.eigenvectors[(r, k)] / eig.eigenvalues[k].sqrt()
    });
    let reduced = b.transpose() * l_a * &b;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    Ok(SymmetricEigen::new(reduced).eigenvalues.min())
}

/// Minimizes a unimodal `f` on `[lo, hi]` to abscissa tolerance `tol`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid search on `[lo, hi]` followed by golden-section refinement around
/// the best grid point. Returns the minimizer and the minimum.
fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..points {
        let v = f(lo + step * k as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let a = lo + step * best_k.saturating_sub(1) as f64;
    let b = lo + step * (best_k + 1).min(points - 1) as f64;
    let (x, v) = golden_section(&f, a, b, tol);
    if v < best {
        (x, v)
    } else {
        (lo + step * best_k as f64, best)
    }
}

/// `ξ_φ(s, t) = inf_{u,v} (φ''(u) t + φ''(v) s) θ(u, v)`.
///
/// χ² and reverse KL have closed forms. For KL the infimum is taken over
/// `x = e^z` of `(s/x + t)(x − 1)/log x`. Every other built-in kind has
/// `φ''(x) = x^e`, which makes the integrand invariant under `(u, v) ↦
/// (λu, λv)`, so it is minimized over `x = u/v` alone. Custom kinds fall back
/// to a two-dimensional log grid.
pub fn xi_phi(phi: &PhiFunction, s: f64, t: f64) -> Result<f64> {
    for x in [s, t] {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!("xi arguments must lie in (0, 1), got {x}")));
        }
    }
    match phi.kind() {
        PhiKind::ChiSquared => Ok(s + t),
        PhiKind::ReverseKl => Ok(2.0 * (s * t).sqrt()),
        PhiKind::Kl => {
            let f = |z: f64| {
                let q = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
                (s * (-z).exp() + t) * q
            };
            Ok(grid_then_golden(f, -XI_Z_RANGE, XI_Z_RANGE, XI_GRID_1D, GOLDEN_TOL).1)
        }
        _ => match phi.curvature_exponent() {
            Some(e) => {
                let f = |z: f64| {
                    let x = z.exp();
                    let th = theta_scalar(phi, x, 1.0).unwrap_or(f64::INFINITY);
                    (t * (e * z).exp() + s) * th
                };
                Ok(grid_then_golden(f, -XI_Z_RANGE, XI_Z_RANGE, XI_GRID_1D, GOLDEN_TOL).1)
            }
            None => Ok(xi_two_dimensional(phi, s, t)),
        },
    }
}

/// Log-grid search over `(u, v) ∈ [1e-8/s, 1/s] × [1e-8/t, 1/t]` with
/// coordinate-wise golden-section refinement.
fn xi_two_dimensional(phi: &PhiFunction, s: f64, t: f64) -> f64 {
    let g = |lu: f64, lv: f64| {
        let (u, v) = (lu.exp(), lv.exp());
        match theta_scalar(phi, u, v) {
            Ok(th) => (phi.d2(u) * t + phi.d2(v) * s) * th,
            Err(_) => f64::INFINITY,
        }
    };
    let (ulo, uhi) = ((1e-8 / s).ln(), (1.0 / s).ln());
    let (vlo, vhi) = ((1e-8 / t).ln(), (1.0 / t).ln());
    let du = (uhi - ulo) / (XI_GRID_2D - 1) as f64;
    let dv = (vhi - vlo) / (XI_GRID_2D - 1) as f64;
    let (mut bu, mut bv, mut best) = (ulo, vlo, f64::INFINITY);
    for a in 0..XI_GRID_2D {
        for b in 0..XI_GRID_2D {
            let (lu, lv) = (ulo + du * a as f64, vlo + dv * b as f64);
            let val = g(lu, lv);
            if val < best {
                (bu, bv, best) = (lu, lv, val);
            }
        }
    }
    for _ in 0..50 {
        let before = best;
        let (x, val) = golden_section(|x| g(x, bv), (bu - du).max(ulo), (bu + du).min(uhi), GOLDEN_TOL);
        if val < best {
            (bu, best) = (x, val);
        }
        let (y, val) = golden_section(|y| g(bu, y), (bv - dv).max(vlo), (bv + dv).min(vhi), GOLDEN_TOL);
        if val < best {
            (bv, best) = (y, val);
        }
        if before - best <= 1e-15 * best.abs() {
            break;
        }
    }
    best
}

/// Whether `ξ_φ(s, t) ≥ 2√(st)` is known to hold, which allows pairs to be
/// skipped once their lower bound exceeds the running minimum.
fn has_sqrt_lower_bound(phi: &PhiFunction) -> bool {
    matches!(phi.curvature_exponent(), Some(e) if (-2.0..=0.0).contains(&e))
}

/// `c · min_{i≠j} (1 − (π_i + π_j)/2 + ξ_φ(π_i, π_j)/2)`.
pub fn kappa_formula_thm2(pi: &Distribution, phi: &PhiFunction) -> Result<f64> {
    let n = pi.len();
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (1.0 - 0.5 * (pi[i].sqrt() - pi[j].sqrt()).powi(2), i, j))
        .collect();
    let prune = has_sqrt_lower_bound(phi);
    if prune {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut best = f64::INFINITY;
    for (lower, i, j) in pairs {
        if prune && lower >= best {
            break;
        }
        let xi = xi_phi(phi, pi[i], pi[j])?;
        best = best.min(1.0 - 0.5 * (pi[i] + pi[j]) + 0.5 * xi);
    }
    Ok(optimal_c(pi).value() * best)
}

/// `c · min_{i≠j} (1 − (√π_i − √π_j)²/2)`, attained at the extreme entries.
pub fn kappa_sqrt_bound(pi: &Distribution) -> f64 {
    let hi = pi.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = hi.sqrt() - pi.min().sqrt();
    optimal_c(pi).value() * (1.0 - 0.5 * gap * gap)
}

/// `F_ij(ω) = a_ij(ω, π)/ω_ij`, the local rate on edge `(i, j)`.
pub fn local_rate_objective(w: &WeightMatrix, i: usize, j: usize) -> Result<f64> {
    let n = w.len();
    if i >= n || j >= n {
        return Err(Error::Domain(format!("state index out of range for n = {n}")));
    }
    if i == j {
        return Err(Error::Domain(format!("local rate needs two distinct states, got ({i}, {j})")));
    }
    let omega = w.omega();
    let pi = w.pi();
    let wij = omega[(i, j)];
    if !(wij > 0.0) {
        return Err(Error::ZeroEdge { i, j });
    }
    let out = |r: usize| (0..n).filter(|&k| k != r).map(|k| omega[(r, k)]).sum::<f64>() / pi[r];
    let cross: f64 = (0..n)
        .filter(|&k| k != i && k != j)
        .map(|k| omega[(i, k)] * omega[(j, k)] / (pi[k] * wij))
        .sum();
    Ok(out(i) + out(j) - cross)
}

fn min_local_rate(w: &WeightMatrix) -> Result<f64> {
    let edges = w.edges();
    if edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    edges
        .iter()
        .map(|&(i, j)| local_rate_objective(w, i, j))
        .try_fold(f64::INFINITY, |acc, r| r.map(|v| acc.min(v)))
}

/// Outcome of perturbing a weight matrix and re-evaluating `min F_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub base: f64,
    /// Largest `min F_ij` seen among the perturbed matrices.
    pub best_perturbed: f64,
    pub trials: usize,
    /// Trials whose `min F_ij` exceeded `base + tol`.
    pub exceedances: usize,
}

/// Evaluates `min_ij F_ij` at `trials` random feasible perturbations
/// `ω + εδ` (δ symmetric, row sums and nonnegativity preserved).
pub fn perturbation_check(
    w: &WeightMatrix,
    eps: f64,
    trials: usize,
    tol: f64,
    source: &mut RandomSource,
) -> Result<PerturbationReport> {
    let base = min_local_rate(w)?;
    let n = w.len();
    let pi = w.pi();
    let mut report = PerturbationReport {
        base,
        best_perturbed: f64::NEG_INFINITY,
        trials: 0,
        exceedances: 0,
    };
    let mut attempts = 0;
    while report.trials < trials {
        attempts += 1;
        if attempts > 1000 * trials.max(1) {
            return Err(Error::Domain("no feasible perturbation found".into()));
        }
        let mut delta = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = source.rng().random_range(-1.0..1.0);
                delta[(i, j)] = d;
                delta[(j, i)] = d;
            }
        }
        let mut omega = w.omega() + delta * eps;
        for i in 0..n {
            let off: f64 = (0..n).filter(|&k| k != i).map(|k| omega[(i, k)]).sum();
            omega[(i, i)] = pi[i] - off;
        }
        if omega.iter().any(|&x| x < 0.0) {
            continue;
        }
        let Ok(perturbed) = WeightMatrix::new(omega, pi.clone()) else {
            continue;
        };
        let value = min_local_rate(&perturbed)?;
        report.trials += 1;
        report.best_perturbed = report.best_perturbed.max(value);
        if value > base + tol {
            report.exceedances += 1;
        }
    }
    Ok(report)
}

/// All four curvature numbers for `ω`, `φ` at `p`.
pub fn curvature_report(w: &WeightMatrix, phi: &PhiFunction, p: &Distribution) -> Result<CurvatureReport> {
    let theta = compute_theta(w, phi, p)?;
    let a = compute_a(w, phi, p)?;
    Ok(CurvatureReport {
        ratio_bound: ratio_bound_kappa(&theta, &a, &w.edges())?,
        exact_kappa: exact_kappa(&theta, &a)?,
        kappa_thm2: kappa_formula_thm2(w.pi(), phi)?,
        kappa_sqrt_bound: kappa_sqrt_bound(w.pi()),
    })
}
