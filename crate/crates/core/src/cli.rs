//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::curvature::{curvature_report, kappa_formula_thm2, kappa_sqrt_bound, xi_phi, CurvatureReport};
use crate::divergence::PhiFunction;
use crate::dynamics::{simulate, IntegratorConfig, Observer};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, write_result_csv, ExperimentConfig, GeneratorKind};
use crate::fmt::fmt_f64;
use crate::generator::{build_optimal_weights, optimal_c, write_matrix_csv};
use crate::plot::write_convergence_plot;
use crate::simplex::{validate_distribution, Distribution, NORMALIZATION_TOL};

#[derive(Debug, Parser)]
#[command(name = "ricci-mcmc", version, about = "Optimal-curvature Markov generators on finite state spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the optimal or Metropolis–Hastings generator as CSV.
    BuildQ(BuildQArgs),
    /// Integrate the forward equation and record observers.
    Simulate(SimulateArgs),
    /// Curvature bounds of the optimal weights at a point.
    Curvature(CurvatureArgs),
    /// Global rate formulas and the optimal rate constant.
    Rate(RateArgs),
    /// Evaluate ξ_φ(s, t).
    Xi(XiArgs),
    /// Averaged L1 convergence of both generators over random targets.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Optimal,
    Mh,
}

impl From<Kind> for GeneratorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Optimal => GeneratorKind::Optimal,
            Kind::Mh => GeneratorKind::Mh,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Kv,
    Csv,
}

#[derive(Debug, Args)]
struct BuildQArgs {
    /// Target law: a file path or an inline comma-separated list.
    #[arg(long)]
    pi: String,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    pi: String,
    #[arg(long)]
    p0: String,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 10.0)]
    t_end: f64,
    /// Comma-separated subset of l1, kl, chi2, reverse-kl.
    #[arg(long, default_value = "l1", value_delimiter = ',')]
    observers: Vec<String>,
    #[arg(long = "record-every")]
    record_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvatureArgs {
    #[arg(long)]
    pi: String,
    /// alpha:<a> | kl | chi2 | rkl
    #[arg(long, value_parser = parse_phi)]
    phi: PhiFunction,
    /// Evaluation point; defaults to the target.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "kv")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    pi: String,
    #[arg(long, value_parser = parse_phi)]
    phi: PhiFunction,
}

#[derive(Debug, Args)]
struct XiArgs {
    #[arg(long, value_parser = parse_phi)]
    phi: PhiFunction,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    t: f64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 10.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-csv")]
    out_csv: PathBuf,
    #[arg(long = "out-plot")]
    out_plot: Option<PathBuf>,
    /// Logarithmic vertical axis in the plot.
    #[arg(long = "log-y")]
    log_y: bool,
    /// One target shared by all realizations.
    #[arg(long = "shared-pi")]
    shared_pi: bool,
    #[arg(long, default_value = "l1", value_delimiter = ',')]
    observers: Vec<String>,
    #[arg(long, value_enum, default_values = ["optimal", "mh"], value_delimiter = ',')]
    generators: Vec<Kind>,
}

fn parse_phi(s: &str) -> std::result::Result<PhiFunction, String> {
    s.parse::<PhiFunction>().map_err(|e| e.to_string())
}

/// Parses argv, runs the subcommand and returns the process exit status:
/// 0 on success, 1 on domain errors, 2 on usage errors.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildQ(a) => build_q(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Curvature(a) => run_curvature(a),
        Command::Rate(a) => run_rate(a),
        Command::Xi(a) => run_xi(a),
        Command::Experiment(a) => run_experiment_cmd(a),
    }
}

/// Standard output, or a buffered file whose errors name the path.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::io(path.unwrap_or(Path::new("<stdout>")), e)
}

fn build_q(a: BuildQArgs) -> Result<()> {
    let pi = resolve_distribution(&a.pi)?;
    let g = GeneratorKind::from(a.kind).build(&pi);
    let path = a.out.as_deref();
    let mut out = open_output(path)?;
    write_matrix_csv(g.q(), &mut out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let pi = resolve_distribution(&a.pi)?;
    let p0 = resolve_distribution(&a.p0)?;
    let kind = GeneratorKind::from(a.kind);
    let observers: Vec<Observer> = a
        .observers
        .iter()
        .map(|o| Observer::by_name(o.trim(), &pi))
        .collect::<Result<_>>()?;
    let mut cfg = IntegratorConfig::new(a.dt, a.t_end).keep_states(false);
    cfg.record_every = a.record_every;
    let traj = simulate(&kind.build(&pi), &p0, &cfg, &observers)?;
    let metadata = vec![
        ("kind".to_string(), kind.to_string()),
        ("n".to_string(), pi.len().to_string()),
        ("dt".to_string(), fmt_f64(a.dt)),
        ("t_end".to_string(), fmt_f64(a.t_end)),
    ];
    let path = a.out.as_deref();
    let mut out = open_output(path)?;
    traj.write_csv(&mut out, &metadata).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn run_curvature(a: CurvatureArgs) -> Result<()> {
    let pi = resolve_distribution(&a.pi)?;
    let p = match &a.p {
        Some(s) => resolve_distribution(s)?,
        None => pi.clone(),
    };
    let w = build_optimal_weights(&pi);
    let report = curvature_report(&w, &a.phi, &p)?;
    let text = match a.format {
        ReportFormat::Kv => format!("phi={}\n{}", a.phi, report.to_kv()),
        ReportFormat::Csv => format!("{}\n{}\n", CurvatureReport::csv_header(), report.to_csv_row()),
    };
    let path = a.report.as_deref();
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn run_rate(a: RateArgs) -> Result<()> {
    let pi = resolve_distribution(&a.pi)?;
    println!("kappa_thm2={}", fmt_f64(kappa_formula_thm2(&pi, &a.phi)?));
    println!("kappa_sqrt_bound={}", fmt_f64(kappa_sqrt_bound(&pi)));
    println!("c={}", fmt_f64(optimal_c(&pi).value()));
    Ok(())
}

fn run_xi(a: XiArgs) -> Result<()> {
    println!("{}", fmt_f64(xi_phi(&a.phi, a.s, a.t)?));
    Ok(())
}

fn run_experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        n: a.n,
        k: a.k,
        dt: a.dt,
        t_end: a.t_end,
        seed: a.seed,
        generators: a.generators.iter().map(|&g| g.into()).collect(),
        observers: a.observers.iter().map(|o| o.trim().to_string()).collect(),
        shared_target: a.shared_pi,
        start_at_target: false,
    };
    let res = run_experiment(&cfg)?;
    write_result_csv(&res, &a.out_csv)?;
    if let Some(plot) = &a.out_plot {
        write_convergence_plot(&res, plot, a.log_y)?;
    }
    Ok(())
}

/// A path to an existing file is loaded; anything else is read as an
/// inline comma-separated list.
fn resolve_distribution(arg: &str) -> Result<Distribution> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_distribution_file(path);
    }
    parse_values(arg).and_then(|v| validate_distribution(v, NORMALIZATION_TOL)).map_err(|e| match e {
        Error::Parse { msg, .. } => Error::Config(format!("'{arg}' is neither a file nor a list of numbers: {msg}")),
        other => other,
    })
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for token in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let v = token.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("'{token}' is not a number"),
            })?;
            values.push(v);
        }
    }
    Ok(values)
}

/// Reads one value per line or a single comma-separated line.
pub fn load_distribution_file(path: &Path) -> Result<Distribution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_distribution(parse_values(&text)?, NORMALIZATION_TOL)
}
