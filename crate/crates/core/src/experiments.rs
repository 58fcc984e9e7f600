//! Averaged convergence of the optimal generator against Metropolis–Hastings
//! over random targets and initial laws.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{simulate, IntegratorConfig, Observer};
use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::generator::{build_mh_q, build_optimal_q, Generator};
use crate::simplex::{l1, sample_uniform_simplex, Distribution, RandomSource};

/// Stream reserved for the shared target when one π serves every realization.
const SHARED_TARGET_STREAM: u64 = u64::MAX;

/// Initial laws closer than this to the target are redrawn.
const MIN_INITIAL_L1: f64 = 1e-9;

pub const SAMPLING_SCHEME: &str = "uniform-simplex";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Optimal,
    Mh,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Optimal => "optimal",
            GeneratorKind::Mh => "mh",
        }
    }

    pub fn build(self, pi: &Distribution) -> Generator {
        match self {
            GeneratorKind::Optimal => build_optimal_q(pi),
            GeneratorKind::Mh => build_mh_q(pi),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(GeneratorKind::Optimal),
            "mh" => Ok(GeneratorKind::Mh),
            other => Err(Error::Config(format!("unknown generator '{other}', expected optimal|mh"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub generators: Vec<GeneratorKind>,
    /// Observer names; `l1` is always reported first when present.
    pub observers: Vec<String>,
    /// Draw one target for all realizations instead of one per realization.
    pub shared_target: bool,
    /// Start every realization at its target. Meant for tests.
    pub start_at_target: bool,
}

impl ExperimentConfig {
    /// Both generators, the `l1` observer, `dt = 0.01` and `T = 10`.
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            dt: 0.01,
            t_end: 10.0,
            seed,
            generators: vec![GeneratorKind::Optimal, GeneratorKind::Mh],
            observers: vec!["l1".to_string()],
            shared_target: false,
            start_at_target: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewStates { n: self.n });
        }
        if self.k < 1 {
            return Err(Error::Config("at least one realization is required".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::Config(format!("dt must lie in (0, 1], got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be finite and at least dt, got {}",
                self.t_end
            )));
        }
        if self.generators.is_empty() || self.observers.is_empty() {
            return Err(Error::Config("at least one generator and one observer are required".into()));
        }
        for (idx, g) in self.generators.iter().enumerate() {
            if self.generators[..idx].contains(g) {
                return Err(Error::Config(format!("generator '{g}' listed twice")));
            }
        }
        let probe = Distribution::uniform(2)?;
        for (idx, o) in self.observers.iter().enumerate() {
            Observer::by_name(o, &probe)?;
            if self.observers[..idx].contains(o) {
                return Err(Error::Config(format!("observer '{o}' listed twice")));
            }
        }
        Ok(())
    }

    fn ordered_observers(&self) -> Vec<String> {
        let mut out: Vec<String> = self.observers.iter().filter(|o| *o == "l1").cloned().collect();
        out.extend(self.observers.iter().filter(|o| *o != "l1").cloned());
        out
    }

    fn metadata(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(";");
        vec![
            ("n".into(), self.n.to_string()),
            ("k".into(), self.k.to_string()),
            ("dt".into(), fmt_f64(self.dt)),
            ("t_end".into(), fmt_f64(self.t_end)),
            ("seed".into(), self.seed.to_string()),
            ("sampling".into(), SAMPLING_SCHEME.into()),
            (
                "target".into(),
                if self.shared_target { "shared" } else { "per-realization" }.into(),
            ),
            (
                "generators".into(),
                join(self.generators.iter().map(|g| g.to_string()).collect()),
            ),
            ("observers".into(), join(self.ordered_observers())),
        ]
    }
}

/// One averaged series per (observer, generator) column.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub generator: GeneratorKind,
    pub observer: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn column_name(&self) -> String {
        format!("{}_{}", self.generator, self.observer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub times: Vec<f64>,
    /// Ordered by observer, then generator.
    pub mean_series: Vec<Series>,
    /// `(seed, k)` substream of each realization.
    pub per_realization_seeds: Vec<(u64, u64)>,
    pub metadata: Vec<(String, String)>,
}

impl ExperimentResult {
    pub fn mean(&self, generator: GeneratorKind, observer: &str) -> Option<&[f64]> {
        self.mean_series
            .iter()
            .find(|s| s.generator == generator && s.observer == observer)
            .map(|s| s.values.as_slice())
    }

    /// `# key=value` metadata lines, then `t,<generator>_<observer>,…`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        let mut header = vec!["t".to_string()];
        header.extend(self.mean_series.iter().map(Series::column_name));
        writeln!(out, "{}", header.join(","))?;
        for (row, &t) in self.times.iter().enumerate() {
            let mut line = fmt_f64(t);
            for s in &self.mean_series {
                line.push(',');
                line.push_str(&fmt_f64(s.values[row]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Target and initial law of realization `k`.
pub fn draw_realization(cfg: &ExperimentConfig, k: usize) -> Result<(Distribution, Distribution)> {
    let mut source = RandomSource::new(cfg.seed, k as u64);
    let pi = if cfg.shared_target {
        sample_uniform_simplex(cfg.n, &mut RandomSource::new(cfg.seed, SHARED_TARGET_STREAM))?
    } else {
        sample_uniform_simplex(cfg.n, &mut source)?
    };
    if cfg.start_at_target {
        return Ok((pi.clone(), pi));
    }
    loop {
        let p0 = sample_uniform_simplex(cfg.n, &mut source)?;
        if l1(p0.as_slice(), pi.as_slice()) >= MIN_INITIAL_L1 {
            return Ok((pi, p0));
        }
    }
}

/// Per-column series of one realization, in result column order.
fn run_realization(cfg: &ExperimentConfig, observers: &[String], k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (pi, p0) = draw_realization(cfg, k)?;
    let obs: Vec<Observer> = observers
        .iter()
        .map(|o| Observer::by_name(o, &pi))
        .collect::<Result<_>>()?;
    let integrator = IntegratorConfig::new(cfg.dt, cfg.t_end).record_every(1).keep_states(false);
    let mut by_generator = Vec::with_capacity(cfg.generators.len());
    let mut times = Vec::new();
    for &g in &cfg.generators {
        let traj = simulate(&g.build(&pi), &p0, &integrator, &obs)?;
        times = traj.times;
        by_generator.push(traj.observations);
    }
    let mut columns = Vec::with_capacity(observers.len() * cfg.generators.len());
    for o in 0..observers.len() {
        for series in &by_generator {
            columns.push(series[o].1.clone());
        }
    }
    Ok((times, columns))
}

/// Runs every realization, in parallel, and averages each column over
/// realizations in index order with compensated summation.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let observers = cfg.ordered_observers();
    let runs: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..cfg.k)
        .into_par_iter()
        .map(|k| run_realization(cfg, &observers, k))
        .collect::<Result<_>>()?;

    let times = runs[0].0.clone();
    let mut mean_series = Vec::new();
    let mut column = 0;
    for o in &observers {
        for &g in &cfg.generators {
            let values = (0..times.len())
                .map(|row| compensated_mean(runs.iter().map(|r| r.1[column][row])))
                .collect();
            mean_series.push(Series {
                generator: g,
                observer: o.clone(),
                values,
            });
            column += 1;
        }
    }
    Ok(ExperimentResult {
        times,
        mean_series,
        per_realization_seeds: (0..cfg.k as u64).map(|k| (cfg.seed, k)).collect(),
        metadata: cfg.metadata(),
    })
}

/// Neumaier-compensated mean.
fn compensated_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp, mut count) = (0.0f64, 0.0f64, 0usize);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        count += 1;
    }
    (sum + comp) / count as f64
}

pub fn write_result_csv(res: &ExperimentResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    res.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
