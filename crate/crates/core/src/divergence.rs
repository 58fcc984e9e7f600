//! φ-divergences built from the alpha family.
//!
//! The family is
//!
//! ```text
//! φ_α(x) = (x^α − 1 − α(x − 1)) / (α(α − 1))   α ∉ {0, 1}
//! φ_0(x) = 1 − x + x log x                        (KL)
//! φ_1(x) = x − 1 − log x                          (reverse KL)
//! ```
//!
//! and `D_φ(p‖π) = Σ_i φ(p_i/π_i) π_i`. Note that the generic branch tends to
//! `x − 1 − log x` as α → 0 and to `1 − x + x log x` as α → 1, the reverse of
//! the labels at the exact points. Near those points the generic formula is
//! replaced by its limit, so `alpha(1e-12)` behaves like reverse KL while
//! `alpha(0.0)` is KL.
//!
//! Every built-in kind has `φ''(x) = x^e` for a fixed exponent `e`, which is
//! what makes [`PhiFunction::curvature_exponent`] useful to the curvature code.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::simplex::Distribution;

/// Width around α = 0 and α = 1 inside which the generic branch is replaced
/// by its analytic limit.
const ALPHA_SINGULARITY_BAND: f64 = 1e-9;

/// Below this argument φ is evaluated through its limit at 0+.
const TINY_ARGUMENT: f64 = 1e-300;

/// `|x − 1|` below which φ is evaluated by its Taylor series at 1.
const SERIES_RADIUS: f64 = 1e-2;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which member of the family a [`PhiFunction`] is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiKind {
    /// Generic alpha branch (α ∉ {0, 1, 2}).
    Alpha(f64),
    ChiSquared,
    ReverseKl,
    Kl,
    Custom,
}

#[derive(Clone)]
enum Branch {
    /// `1 − x + x log x`
    Kl,
    /// `x − 1 − log x`
    ReverseKl,
    /// `(x^α − 1 − α(x − 1)) / (α(α − 1))`
    Power(f64),
    Custom {
        name: String,
        value: ScalarFn,
        d1: ScalarFn,
        d2: ScalarFn,
    },
}

/// A convex divergence generator with φ(1) = φ'(1) = 0.
#[derive(Clone)]
pub struct PhiFunction {
    kind: PhiKind,
    branch: Branch,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhiFunction({self})")
    }
}

impl fmt::Display for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.branch) {
            (PhiKind::Kl, _) => f.write_str("kl"),
            (PhiKind::ReverseKl, _) => f.write_str("rkl"),
            (PhiKind::ChiSquared, _) => f.write_str("chi2"),
            (PhiKind::Alpha(a), _) => write!(f, "alpha:{a:?}"),
            (PhiKind::Custom, Branch::Custom { name, .. }) => write!(f, "custom:{name}"),
            (PhiKind::Custom, _) => f.write_str("custom"),
        }
    }
}

impl FromStr for PhiFunction {
    type Err = Error;

    /// Parses `kl`, `rkl`, `chi2` or `alpha:<a>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kl" => Ok(Self::kl()),
            "rkl" | "reverse-kl" => Ok(Self::reverse_kl()),
            "chi2" => Ok(Self::chi_squared()),
            other => {
                let alpha = other
                    .strip_prefix("alpha:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Domain(format!(
                            "unknown phi '{other}', expected alpha:<a>|kl|chi2|rkl"
                        ))
                    })?;
                make_phi_alpha(alpha)
            }
        }
    }
}

/// Builds the alpha-family generator for a finite `alpha`.
pub fn make_phi_alpha(alpha: f64) -> Result<PhiFunction> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
    }
    let phi = if alpha == 0.0 {
        PhiFunction::kl()
    } else if alpha == 1.0 {
        PhiFunction::reverse_kl()
    } else if alpha == 2.0 {
        PhiFunction::chi_squared()
    } else if alpha.abs() <= ALPHA_SINGULARITY_BAND {
        PhiFunction {
            kind: PhiKind::Alpha(alpha),
            branch: Branch::ReverseKl,
        }
    } else if (alpha - 1.0).abs() <= ALPHA_SINGULARITY_BAND {
        PhiFunction {
            kind: PhiKind::Alpha(alpha),
            branch: Branch::Kl,
        }
    } else {
        PhiFunction {
            kind: PhiKind::Alpha(alpha),
            branch: Branch::Power(alpha),
        }
    };
    Ok(phi)
}

impl PhiFunction {
    pub fn kl() -> Self {
        Self {
            kind: PhiKind::Kl,
            branch: Branch::Kl,
        }
    }

    pub fn reverse_kl() -> Self {
        Self {
            kind: PhiKind::ReverseKl,
            branch: Branch::ReverseKl,
        }
    }

    /// The α = 2 branch, `(x − 1)²/2`.
    pub fn chi_squared() -> Self {
        Self {
            kind: PhiKind::ChiSquared,
            branch: Branch::Power(2.0),
        }
    }

    /// User-supplied `(φ, φ', φ'')`. The caller is responsible for convexity
    /// and for `φ(1) = φ'(1) = 0`.
    pub fn custom<F, G, H>(name: impl Into<String>, value: F, d1: G, d2: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PhiKind::Custom,
            branch: Branch::Custom {
                name: name.into(),
                value: Arc::new(value),
                d1: Arc::new(d1),
                d2: Arc::new(d2),
            },
        }
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// `e` such that `φ''(x) = x^e`, for the built-in kinds.
    pub fn curvature_exponent(&self) -> Option<f64> {
        match self.branch {
            Branch::Kl => Some(-1.0),
            Branch::ReverseKl => Some(-2.0),
            Branch::Power(a) => Some(a - 2.0),
            Branch::Custom { .. } => None,
        }
    }

    /// Returns `(φ(x), φ'(x), φ''(x))`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        Ok((self.value(x)?, self.d1(x), self.d2(x)))
    }

    /// φ(x) for `x > 0`, using the limit at 0+ where it is finite.
    pub fn value(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("phi argument must be positive, got {x}")));
        }
        let y = x - 1.0;
        let v = match &self.branch {
            Branch::Custom { value, .. } => value(x),
            _ if y.abs() < SERIES_RADIUS => {
                taylor_at_one(self.curvature_exponent().expect("built-in"), y)
            }
            Branch::Kl => {
                if x < TINY_ARGUMENT {
                    1.0
                } else {
                    x * x.ln() - y
                }
            }
            Branch::ReverseKl => {
                if x < TINY_ARGUMENT {
                    return Err(Error::Domain(format!(
                        "reverse-KL phi diverges at x = {x}"
                    )));
                }
                y - x.ln()
            }
            &Branch::Power(a) => {
                if x < TINY_ARGUMENT {
                    if a > 0.0 {
                        1.0 / a
                    } else {
                        return Err(Error::Domain(format!(
                            "alpha = {a} phi diverges at x = {x}"
                        )));
                    }
                } else {
                    ((a * x.ln()).exp_m1() - a * y) / (a * (a - 1.0))
                }
            }
        };
        Ok(v)
    }

    /// φ'(x) for `x > 0`.
    pub fn d1(&self, x: f64) -> f64 {
        match &self.branch {
            Branch::Kl => ln_accurate(x),
            Branch::ReverseKl => (x - 1.0) / x,
            &Branch::Power(a) => ((a - 1.0) * ln_accurate(x)).exp_m1() / (a - 1.0),
            Branch::Custom { d1, .. } => d1(x),
        }
    }

    /// φ''(x) for `x > 0`.
    pub fn d2(&self, x: f64) -> f64 {
        match &self.branch {
            Branch::Kl => 1.0 / x,
            Branch::ReverseKl => 1.0 / (x * x),
            &Branch::Power(a) => x.powf(a - 2.0),
            Branch::Custom { d2, .. } => d2(x),
        }
    }

    /// φ'''(x); central differences of φ'' for custom kinds.
    pub(crate) fn d3(&self, x: f64) -> f64 {
        match self.curvature_exponent() {
            Some(e) => e * x.powf(e - 1.0),
            None => {
                let h = 1e-5 * x;
                (self.d2(x + h) - self.d2(x - h)) / (2.0 * h)
            }
        }
    }

    /// φ''''(x); central differences of φ''' for custom kinds.
    pub(crate) fn d4(&self, x: f64) -> f64 {
        match self.curvature_exponent() {
            Some(e) => e * (e - 1.0) * x.powf(e - 2.0),
            None => {
                let h = 1e-4 * x;
                (self.d3(x + h) - self.d3(x - h)) / (2.0 * h)
            }
        }
    }

    /// `φ'(u) − φ'(v)` without the cancellation of subtracting two values.
    pub(crate) fn d1_difference(&self, u: f64, v: f64) -> f64 {
        match &self.branch {
            Branch::Kl => ln_accurate_ratio(u, v),
            Branch::ReverseKl => (u - v) / (u * v),
            &Branch::Power(a) => {
                let b = a - 1.0;
                v.powf(b) * (b * ln_accurate_ratio(u, v)).exp_m1() / b
            }
            Branch::Custom { d1, .. } => d1(u) - d1(v),
        }
    }
}

/// `ln x` with `ln_1p` near 1.
fn ln_accurate(x: f64) -> f64 {
    let y = x - 1.0;
    if y.abs() < 0.5 {
        y.ln_1p()
    } else {
        x.ln()
    }
}

/// `ln(u/v)` accurate when `u ≈ v`.
fn ln_accurate_ratio(u: f64, v: f64) -> f64 {
    let r = (u - v) / v;
    if r.abs() < 0.5 {
        r.ln_1p()
    } else {
        u.ln() - v.ln()
    }
}

/// `φ(1 + y)` for `φ''(x) = x^e`: `Σ_{k≥2} φ^(k)(1) y^k / k!` with
/// `φ^(k)(1) = e (e − 1) ⋯ (e − k + 3)`.
fn taylor_at_one(e: f64, y: f64) -> f64 {
    let mut deriv = 1.0;
    let mut term_pow = y * y;
    let mut factorial = 2.0;
    let mut sum = 0.0;
    for k in 2..16 {
        if k >= 3 {
            deriv *= e - (k as f64 - 3.0);
            term_pow *= y;
            factorial *= k as f64;
        }
        let term = deriv * term_pow / factorial;
        sum += term;
        if term.abs() <= f64::EPSILON * 1e-3 * sum.abs() {
            break;
        }
    }
    sum
}

/// `(φ(x), φ'(x), φ''(x))`.
pub fn phi_eval(phi: &PhiFunction, x: f64) -> Result<(f64, f64, f64)> {
    phi.eval(x)
}

/// `D_φ(p‖π) = Σ_i φ(p_i/π_i) π_i`.
pub fn divergence(phi: &PhiFunction, p: &Distribution, pi: &Distribution) -> Result<f64> {
    p.check_same_len(pi)?;
    divergence_slices(phi, p.as_slice(), pi.as_slice())
}

pub(crate) fn divergence_slices(phi: &PhiFunction, p: &[f64], pi: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&pk, &qk) in p.iter().zip(pi) {
        total += phi.value(pk / qk)? * qk;
    }
    Ok(total)
}

/// Upper bound `√(2·KL)` on the L1 distance.
pub fn pinsker_l1_bound(kl_value: f64) -> Result<f64> {
    if kl_value < 0.0 || kl_value.is_nan() {
        return Err(Error::NegativeInput(kl_value));
    }
    Ok((2.0 * kl_value).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_kinds() -> Vec<PhiFunction> {
        vec![
            PhiFunction::kl(),
            PhiFunction::reverse_kl(),
            PhiFunction::chi_squared(),
            make_phi_alpha(0.5).unwrap(),
            make_phi_alpha(-0.7).unwrap(),
            make_phi_alpha(3.0).unwrap(),
        ]
    }

    #[test]
    fn named_points() {
        let kl = make_phi_alpha(0.0).unwrap();
        assert_eq!(kl.kind(), PhiKind::Kl);
        assert_eq!(kl.eval(1.0).unwrap(), (0.0, 0.0, 1.0));

        let rkl = make_phi_alpha(1.0).unwrap();
        assert_eq!(rkl.kind(), PhiKind::ReverseKl);
        assert_relative_eq!(rkl.value(2.0).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_eq!(rkl.d2(2.0), 0.25);

        let chi = make_phi_alpha(2.0).unwrap();
        assert_eq!(chi.kind(), PhiKind::ChiSquared);
        assert_relative_eq!(chi.value(3.0).unwrap(), 2.0, epsilon = 1e-15);
        for x in [0.01, 0.7, 1.0, 5.0, 123.0] {
            assert_eq!(chi.d2(x), 1.0);
        }
    }

    #[test]
    fn normalized_at_one() {
        for phi in all_kinds() {
            let (v, d1, d2) = phi.eval(1.0).unwrap();
            assert!(v.abs() <= 1e-12 && d1.abs() <= 1e-12, "{phi}");
            assert_relative_eq!(d2, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for phi in all_kinds() {
            for &x in &[0.013, 0.2, 0.93, 1.7, 9.0, 77.0] {
                let h = 1e-5 * x;
                let fd1 = (phi.value(x + h).unwrap() - phi.value(x - h).unwrap()) / (2.0 * h);
                let fd2 = (phi.d1(x + h) - phi.d1(x - h)) / (2.0 * h);
                assert_relative_eq!(phi.d1(x), fd1, max_relative = 1e-6, epsilon = 1e-12);
                assert_relative_eq!(phi.d2(x), fd2, max_relative = 1e-6);
                let fd3 = (phi.d2(x + h) - phi.d2(x - h)) / (2.0 * h);
                assert_relative_eq!(phi.d3(x), fd3, max_relative = 1e-6, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn series_and_closed_form_agree_at_switchover() {
        for phi in all_kinds() {
            for y in [SERIES_RADIUS * 0.999, SERIES_RADIUS * 1.001, -SERIES_RADIUS * 1.001] {
                let inside = phi.value(1.0 + y).unwrap();
                // Direct closed forms evaluated far from cancellation.
                let e = phi.curvature_exponent().unwrap();
                let brute = taylor_at_one(e, y);
                assert_relative_eq!(inside, brute, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn difference_of_first_derivatives() {
        for phi in all_kinds() {
            for &(u, v) in &[(0.3, 2.5), (1.0, 1.0 + 1e-7), (4.0, 0.01)] {
                assert_relative_eq!(
                    phi.d1_difference(u, v),
                    phi.d1(u) - phi.d1(v),
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn limits_near_zero() {
        assert_eq!(PhiFunction::kl().value(1e-320).unwrap(), 1.0);
        assert!(matches!(
            PhiFunction::reverse_kl().value(1e-320),
            Err(Error::Domain(_))
        ));
        assert!(matches!(PhiFunction::kl().value(0.0), Err(Error::Domain(_))));
        assert!(matches!(PhiFunction::kl().value(-1.0), Err(Error::Domain(_))));
        assert_relative_eq!(make_phi_alpha(0.5).unwrap().value(1e-320).unwrap(), 2.0);
    }

    #[test]
    fn generic_branch_limits() {
        // The generic branch tends to x − 1 − log x at α → 0 and to
        // 1 − x + x log x at α → 1.
        for x in [0.5, 2.0] {
            let rkl = PhiFunction::reverse_kl().value(x).unwrap();
            let kl = PhiFunction::kl().value(x).unwrap();
            for a in [1e-6, -1e-6, 1e-10] {
                let v = make_phi_alpha(a).unwrap().value(x).unwrap();
                assert!((v - rkl).abs() < 1e-4, "alpha {a}: {v} vs {rkl}");
            }
            for a in [1.0 + 1e-6, 1.0 - 1e-6, 1.0 + 1e-10] {
                let v = make_phi_alpha(a).unwrap().value(x).unwrap();
                assert!((v - kl).abs() < 1e-4, "alpha {a}: {v} vs {kl}");
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        let pi = Distribution::new(vec![0.75, 0.25]).unwrap();
        for phi in all_kinds() {
            assert_eq!(divergence(&phi, &pi, &pi).unwrap(), 0.0);
        }
        let kl = divergence(&PhiFunction::kl(), &p, &pi).unwrap();
        assert_relative_eq!(kl, 0.5 * (2.0f64 / 3.0).ln() + 0.5 * 2f64.ln(), max_relative = 1e-14);
        let chi = divergence(&PhiFunction::chi_squared(), &p, &pi).unwrap();
        assert_relative_eq!(chi, 0.5 * (0.0625 / 0.75 + 0.0625 / 0.25), max_relative = 1e-14);
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_l1_bound(0.0).unwrap(), 0.0);
        assert_eq!(pinsker_l1_bound(0.5).unwrap(), 1.0);
        assert_eq!(pinsker_l1_bound(2.0).unwrap(), 2.0);
        assert!(matches!(pinsker_l1_bound(-0.1), Err(Error::NegativeInput(_))));
    }

    #[test]
    fn parse_and_display() {
        for s in ["kl", "rkl", "chi2", "alpha:0.5"] {
            let phi: PhiFunction = s.parse().unwrap();
            assert_eq!(phi.to_string(), s);
        }
        assert_eq!("alpha:2".parse::<PhiFunction>().unwrap().kind(), PhiKind::ChiSquared);
        assert!("hellinger".parse::<PhiFunction>().is_err());
        assert!("alpha:nan".parse::<PhiFunction>().is_err());
    }

    #[test]
    fn custom_phi_round_trips_through_eval() {
        let phi = PhiFunction::custom(
            "quadratic",
            |x: f64| (x - 1.0) * (x - 1.0),
            |x: f64| 2.0 * (x - 1.0),
            |_x: f64| 2.0,
        );
        assert_eq!(phi.kind(), PhiKind::Custom);
        assert_eq!(phi.eval(3.0).unwrap(), (4.0, 4.0, 2.0));
        assert_eq!(phi.d3(2.0), 0.0);
        assert_eq!(phi.to_string(), "custom:quadratic");
    }
}
