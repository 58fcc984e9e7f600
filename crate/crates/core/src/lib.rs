//! Continuous-time Markov chain samplers on finite state spaces with
//! curvature-certified convergence rates.
//!
//! The crate builds the optimal reversible generator `Q = c(𝟙πᵀ − I)` and
//! the Metropolis–Hastings baseline, integrates the Kolmogorov forward
//! equation, and evaluates φ-divergence curvature bounds through Gamma
//! calculus.

pub mod cli;
pub mod curvature;
pub mod divergence;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fmt;
pub mod generator;
pub mod plot;
pub mod simplex;

pub use nalgebra;

pub use curvature::{
    compute_a, compute_a_stationary, compute_edge_coefficients, compute_eta, compute_theta,
    curvature_report, exact_kappa, gamma1, gamma2, kappa_formula_thm2, kappa_sqrt_bound,
    local_rate_objective, perturbation_check, ratio_bound_kappa, xi_phi, CurvatureReport,
    EdgeCoefficients, PerturbationReport,
};
pub use divergence::{divergence, make_phi_alpha, phi_eval, pinsker_l1_bound, PhiFunction, PhiKind};
pub use dynamics::{euler_step, exact_solution_optimal, simulate, IntegratorConfig, Observer, Trajectory};
pub use error::{Error, Result};
pub use experiments::{run_experiment, write_result_csv, ExperimentConfig, ExperimentResult, GeneratorKind};
pub use generator::{
    build_mh_q, build_optimal_q, build_optimal_weights, build_q_from_weights, check_detailed_balance,
    optimal_c, sample_weight_matrix, stationarity_residual, Generator, RateConstant, WeightMatrix,
};
pub use plot::write_convergence_plot;
pub use simplex::{l1_distance, sample_uniform_simplex, validate_distribution, Distribution, RandomSource};
