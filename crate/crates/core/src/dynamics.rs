//! Forward-Euler integration of the Kolmogorov forward equation
//! `dp_i/dt = Σ_j (Q_ji p_j − Q_ij p_i)`, and the closed-form solution
//! `p(t) = π + e^{−ct}(p0 − π)` available for the optimal generator.

use std::io::Write;
use std::sync::Arc;

use crate::divergence::{divergence_slices, PhiFunction};
use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::generator::{optimal_c, Generator};
use crate::simplex::{l1, Distribution};

/// Iterates with any `|p_i|` above this are reported as a blow-up.
const BLOWUP_THRESHOLD: f64 = 10.0;

/// A named functional of the current law, evaluated at recorded times.
#[derive(Clone)]
pub struct Observer {
    name: String,
    eval: Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>,
}

impl std::fmt::Debug for Observer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Observer({})", self.name)
    }
}

impl Observer {
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `Σ|p_i − π_i|`.
    pub fn l1(pi: &Distribution) -> Self {
        let pi = pi.as_slice().to_vec();
        Self::new("l1", move |p| Ok(l1(p, &pi)))
    }

    /// `D_φ(p‖π)`.
    pub fn divergence(name: impl Into<String>, phi: PhiFunction, pi: &Distribution) -> Self {
        let pi = pi.as_slice().to_vec();
        Self::new(name, move |p| divergence_slices(&phi, p, &pi))
    }

    /// Observers by name: `l1`, `kl`, `chi2`, `reverse-kl` (or `rkl`).
    pub fn by_name(name: &str, pi: &Distribution) -> Result<Self> {
        match name {
            "l1" => Ok(Self::l1(pi)),
            "kl" => Ok(Self::divergence("kl", PhiFunction::kl(), pi)),
            "chi2" => Ok(Self::divergence("chi2", PhiFunction::chi_squared(), pi)),
            "reverse-kl" | "rkl" => Ok(Self::divergence(name, PhiFunction::reverse_kl(), pi)),
            other => Err(Error::Config(format!(
                "unknown observer '{other}', expected l1|kl|chi2|reverse-kl"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observe(&self, p: &[f64]) -> Result<f64> {
        (self.eval)(p)
    }
}

/// Step size, horizon and recording cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every k-th step; `None` picks 1 for n ≤ 1000 and 10 above.
    pub record_every: Option<usize>,
    /// Reject steps larger than `1 / max_i(−Q_ii)`.
    pub enforce_positivity: bool,
    /// Keep the recorded laws, not just the observations.
    pub keep_states: bool,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            record_every: None,
            enforce_positivity: true,
            keep_states: true,
        }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = Some(k);
        self
    }

    pub fn keep_states(mut self, keep: bool) -> Self {
        self.keep_states = keep;
        self
    }

    pub fn enforce_positivity(mut self, enforce: bool) -> Self {
        self.enforce_positivity = enforce;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_every == Some(0) {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of Euler steps covering `[0, t_end]`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// Recorded times, laws and observer series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty when the run was configured not to keep states.
    pub states: Vec<Distribution>,
    pub observations: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// CSV with header `t,<observer names>` preceded by `# key=value` lines.
    pub fn write_csv<W: Write>(&self, mut out: W, metadata: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}={v}")?;
        }
        let mut header = vec!["t".to_string()];
        header.extend(self.observations.iter().map(|(n, _)| n.clone()));
        writeln!(out, "{}", header.join(","))?;
        for (row, &t) in self.times.iter().enumerate() {
            let mut fields = vec![fmt_f64(t)];
            fields.extend(self.observations.iter().map(|(_, s)| fmt_f64(s[row])));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn check_step(g: &Generator, dt: f64, enforce_positivity: bool) -> Result<()> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("step must be nonnegative, got {dt}")));
    }
    if enforce_positivity {
        let rate = g.max_exit_rate();
        if rate > 0.0 && dt > 1.0 / rate {
            return Err(Error::StepTooLarge {
                dt,
                bound: 1.0 / rate,
            });
        }
    }
    Ok(())
}

/// One forward-Euler step `p' = p + dt·flux(p)`.
pub fn euler_step(g: &Generator, p: &Distribution, dt: f64, enforce_positivity: bool) -> Result<Distribution> {
    if p.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            found: p.len(),
        });
    }
    check_step(g, dt, enforce_positivity)?;
    let mut flux = vec![0.0; p.len()];
    g.flux(p.as_slice(), &mut flux);
    let next = p.as_slice().iter().zip(&flux).map(|(pk, fk)| pk + dt * fk).collect();
    Ok(Distribution::from_raw_unchecked(next))
}

/// Integrates from `p0` to `cfg.t_end`, evaluating `observers` at every
/// recorded time. The initial and final times are always recorded.
pub fn simulate(
    g: &Generator,
    p0: &Distribution,
    cfg: &IntegratorConfig,
    observers: &[Observer],
) -> Result<Trajectory> {
    cfg.validate()?;
    if p0.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            found: p0.len(),
        });
    }
    check_step(g, cfg.dt, cfg.enforce_positivity)?;

    let n = g.len();
    let steps = cfg.steps();
    let every = cfg.record_every.unwrap_or(if n <= 1000 { 1 } else { 10 });

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps / every + 2),
        states: Vec::new(),
        observations: observers.iter().map(|o| (o.name().to_string(), Vec::new())).collect(),
    };
    let record = |step: usize, p: &[f64], traj: &mut Trajectory| -> Result<()> {
        traj.times.push(step as f64 * cfg.dt);
        if cfg.keep_states {
            traj.states.push(Distribution::from_raw_unchecked(p.to_vec()));
        }
        for (o, (_, series)) in observers.iter().zip(traj.observations.iter_mut()) {
            series.push(o.observe(p)?);
        }
        Ok(())
    };

    let mut p = p0.as_slice().to_vec();
    let mut flux = vec![0.0; n];
    record(0, &p, &mut traj)?;
    for step in 1..=steps {
        g.flux(&p, &mut flux);
        for (pk, fk) in p.iter_mut().zip(&flux) {
            *pk += cfg.dt * fk;
        }
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(v.abs() <= BLOWUP_THRESHOLD)) {
            return Err(Error::NumericalBlowup {
                t: step as f64 * cfg.dt,
                index,
                value,
            });
        }
        if step % every == 0 || step == steps {
            record(step, &p, &mut traj)?;
        }
    }
    Ok(traj)
}

/// `π + e^{−ct}(p0 − π)` for the optimal generator of `π`, evaluated as the
/// convex combination `(1 − λ)π + λ p0` with `λ = e^{−ct}`.
pub fn exact_solution_optimal(pi: &Distribution, p0: &Distribution, t: f64) -> Result<Distribution> {
    pi.check_same_len(p0)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let lambda = (-optimal_c(pi).value() * t).exp();
    let values = pi
        .as_slice()
        .iter()
        .zip(p0.as_slice())
        .map(|(&q, &p)| (1.0 - lambda) * q + lambda * p)
        .collect();
    Ok(Distribution::from_raw_unchecked(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_mh_q, build_optimal_q};
    use approx::assert_relative_eq;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn stationary_law_is_fixed() {
        let pi = dist(&[0.5, 1.0 / 3.0, 1.0 / 6.0]);
        for g in [build_optimal_q(&pi), build_mh_q(&pi)] {
            let next = euler_step(&g, &pi, 0.3, true).unwrap();
            for (a, b) in next.as_slice().iter().zip(pi.as_slice()) {
                assert!((a - b).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let pi = dist(&[0.2, 0.8]);
        let p = dist(&[0.6, 0.4]);
        let g = build_optimal_q(&pi);
        assert_eq!(euler_step(&g, &p, 0.0, true).unwrap(), p);
    }

    #[test]
    fn optimal_step_contracts_toward_target() {
        // p' = p + dt·c·(π − p), checked against an explicit dense evaluation.
        let pi = dist(&[0.1, 0.2, 0.3, 0.4]);
        let p = dist(&[0.4, 0.3, 0.2, 0.1]);
        let g = build_optimal_q(&pi);
        let c = optimal_c(&pi).value();
        let dt = 0.05;
        let next = euler_step(&g, &p, dt, true).unwrap();
        let q = g.q();
        for i in 0..4 {
            let by_formula = p[i] + dt * c * (pi[i] - p[i]);
            let by_matrix: f64 = p[i] + dt * (0..4).map(|j| q[(j, i)] * p[j] - q[(i, j)] * p[i]).sum::<f64>();
            assert_relative_eq!(next[i], by_formula, epsilon = 1e-15);
            assert_relative_eq!(next[i], by_matrix, epsilon = 1e-15);
        }
    }

    #[test]
    fn step_bound_is_enforced() {
        let pi = dist(&[0.3, 0.7]);
        let g = build_optimal_q(&pi);
        assert!(euler_step(&g, &pi, 1.0, true).is_ok());
        assert!(matches!(
            euler_step(&g, &pi, 1.5, true),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(euler_step(&g, &pi, 1.5, false).is_ok());
        assert!(euler_step(&g, &pi, -0.1, false).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        let pi = dist(&[0.3, 0.7]);
        let p0 = dist(&[0.9, 0.1]);
        let g = build_optimal_q(&pi);
        let cfg = IntegratorConfig::new(5.0, 200.0).enforce_positivity(false);
        assert!(matches!(
            simulate(&g, &p0, &cfg, &[]),
            Err(Error::NumericalBlowup { .. })
        ));
    }

    #[test]
    fn simulate_records_grid() {
        let pi = dist(&[0.75, 0.25]);
        let p0 = dist(&[0.5, 0.5]);
        let g = build_optimal_q(&pi);
        let cfg = IntegratorConfig::new(0.01, 1.0).record_every(7);
        let traj = simulate(&g, &p0, &cfg, &[Observer::l1(&pi)]).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!((traj.times.last().unwrap() - 1.0).abs() <= 0.005);
        assert_eq!(traj.states.len(), traj.times.len());
        assert_eq!(traj.series("l1").unwrap().len(), traj.times.len());
    }

    #[test]
    fn simulate_matches_closed_form() {
        let pi = dist(&[0.75, 0.25]);
        let p0 = dist(&[0.5, 0.5]);
        let g = build_optimal_q(&pi);
        let cfg = IntegratorConfig::new(1e-4, 1.0).record_every(10_000);
        let traj = simulate(&g, &p0, &cfg, &[]).unwrap();
        let exact = exact_solution_optimal(&pi, &p0, 1.0).unwrap();
        let last = traj.states.last().unwrap();
        for i in 0..2 {
            assert!((last[i] - exact[i]).abs() < 1e-3);
        }
        assert_relative_eq!(exact[0], 0.75 - 0.25 * (-4.0f64 / 3.0).exp(), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_endpoints() {
        let pi = dist(&[0.1, 0.2, 0.7]);
        let p0 = dist(&[0.6, 0.3, 0.1]);
        assert_eq!(exact_solution_optimal(&pi, &p0, 0.0).unwrap(), p0);
        let late = exact_solution_optimal(&pi, &p0, 60.0 / optimal_c(&pi).value()).unwrap();
        for i in 0..3 {
            assert!((late[i] - pi[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn uniform_target_makes_generators_coincide() {
        let pi = Distribution::uniform(4).unwrap();
        let p0 = dist(&[0.4, 0.3, 0.2, 0.1]);
        let cfg = IntegratorConfig::new(0.01, 2.0);
        let obs = [Observer::l1(&pi)];
        let a = simulate(&build_optimal_q(&pi), &p0, &cfg, &obs).unwrap();
        let b = simulate(&build_mh_q(&pi), &p0, &cfg, &obs).unwrap();
        for (x, y) in a.series("l1").unwrap().iter().zip(b.series("l1").unwrap()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_layout() {
        let pi = dist(&[0.75, 0.25]);
        let p0 = dist(&[0.5, 0.5]);
        let g = build_optimal_q(&pi);
        let obs = [Observer::l1(&pi), Observer::by_name("kl", &pi).unwrap()];
        let traj = simulate(&g, &p0, &IntegratorConfig::new(0.5, 1.0), &obs).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, &[("kind".into(), "optimal".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# kind=optimal");
        assert_eq!(lines[1], "t,l1,kl");
        assert_eq!(lines.len(), 2 + 3);
        assert!(lines[2].starts_with("0.0,0.5,"));
        assert!(Observer::by_name("tv", &pi).is_err());
    }
}
