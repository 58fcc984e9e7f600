use ricci_mcmc::nalgebra::DMatrix;
use ricci_mcmc::{
    build_optimal_weights, compute_a, compute_a_stationary, compute_theta, curvature_report, exact_kappa,
    gamma1, gamma2, kappa_formula_thm2, kappa_sqrt_bound, make_phi_alpha, perturbation_check,
    ratio_bound_kappa, sample_uniform_simplex, sample_weight_matrix, Distribution, PhiFunction,
    RandomSource, WeightMatrix,
};

/// φ' written out per kind, independent of the library's evaluation.
fn phi_prime(alpha: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if alpha == 0.0 {
            x.ln()
        } else if alpha == 1.0 {
            1.0 - 1.0 / x
        } else {
            (x.powf(alpha - 1.0) - 1.0) / (alpha - 1.0)
        }
    }
}

fn phi_for(alpha: f64) -> PhiFunction {
    make_phi_alpha(alpha).unwrap()
}

fn oracle_theta(w: &DMatrix<f64>, pi: &[f64], p: &[f64], d1: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
    let n = pi.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let (u, v) = (p[i] / pi[i], p[j] / pi[j]);
        w[(i, j)] * (u - v) / (d1(u) - d1(v))
    })
}

/// `η_ij = ω_ij (p_j/π_j − p_i/π_i)`.
fn oracle_eta(w: &DMatrix<f64>, pi: &[f64], p: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[(i, j)] * (p[j] / pi[j] - p[i] / pi[i]) })
}

/// The eight-term sum over `k` with every partial derivative taken by central
/// differences, symmetrized. With η oriented as above the sum comes out with
/// the opposite sign of the coefficient that makes `d²D/dt² = 2Γ2`, so the
/// result is negated.
fn finite_difference_a(w: &DMatrix<f64>, pi: &[f64], p: &[f64], d1: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
    let n = pi.len();
    let h = 1e-6;
    let th = oracle_theta(w, pi, p, d1);
    let et = oracle_eta(w, pi, p);
    let mut dth = Vec::new();
    let mut det = Vec::new();
    for m in 0..n {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[m] += h;
        minus[m] -= h;
        dth.push((oracle_theta(w, pi, &plus, d1) - oracle_theta(w, pi, &minus, d1)) / (2.0 * h));
        det.push((oracle_eta(w, pi, &plus) - oracle_eta(w, pi, &minus)) / (2.0 * h));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut s = 0.0;
            for k in 0..n {
                s += dth[i][(i, j)] * et[(k, i)] + det[i][(i, j)] * th[(k, i)] + det[j][(j, k)] * th[(i, j)]
                    - det[k][(k, i)] * th[(j, k)]
                    - dth[j][(i, j)] * et[(j, k)]
                    - det[j][(i, j)] * th[(j, k)]
                    - det[i][(k, i)] * th[(i, j)]
                    + det[k][(j, k)] * th[(k, i)];
            }
            a[(i, j)] = -0.5 * s;
        }
    }
    (&a + a.transpose()) * 0.5
}

fn draw(n: usize, src: &mut RandomSource) -> Distribution {
    sample_uniform_simplex(n, src).unwrap()
}

/// Keeps random points away from the boundary so that finite differences
/// stay inside the simplex.
fn draw_interior(n: usize, src: &mut RandomSource) -> Distribution {
    loop {
        let p = draw(n, src);
        if p.min() > 1e-3 {
            return p;
        }
    }
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn assembly_matches_finite_differences() {
    let mut src = RandomSource::new(1, 0);
    for alpha in [0.0, 1.0, 2.0, 0.5, 1.5] {
        for n in [3, 4, 6] {
            let pi = draw_interior(n, &mut src);
            let p = draw_interior(n, &mut src);
            let w = sample_weight_matrix(&pi, &mut src);
            let oracle = finite_difference_a(w.omega(), pi.as_slice(), p.as_slice(), &phi_prime(alpha));
            let a = compute_a(&w, &phi_for(alpha), &p).unwrap();
            let err = max_rel(&a, &oracle);
            assert!(err <= 1e-4, "alpha {alpha}, n {n}: relative error {err:e}");
        }
    }
}

#[test]
fn assembly_matches_finite_differences_for_optimal_weights() {
    let mut src = RandomSource::new(2, 0);
    let pi = draw_interior(4, &mut src);
    let p = draw_interior(4, &mut src);
    let w = build_optimal_weights(&pi);
    let oracle = finite_difference_a(w.omega(), pi.as_slice(), p.as_slice(), &phi_prime(0.0));
    let a = compute_a(&w, &PhiFunction::kl(), &p).unwrap();
    assert!(max_rel(&a, &oracle) <= 1e-4);
}

#[test]
fn chi_squared_assembly_by_hand_at_three_states() {
    // θ_ij = ω_ij does not depend on p, so only the η partials survive:
    // 2a_ij = ω_ij(S_i/π_i + S_j/π_j) + ω_ij(S_i/π_i + S_j/π_j)
    //         − Σ_{k≠i,j} 2ω_ik ω_jk/π_k, identical at every p.
    let pi = [0.5, 0.3, 0.2];
    let omega = DMatrix::from_row_slice(3, 3, &[0.3, 0.12, 0.08, 0.12, 0.1, 0.08, 0.08, 0.08, 0.04]);
    let w = WeightMatrix::new(omega.clone(), Distribution::new(pi.to_vec()).unwrap()).unwrap();
    let s: Vec<f64> = (0..3)
        .map(|i| (0..3).filter(|&k| k != i).map(|k| omega[(i, k)]).sum::<f64>() / pi[i])
        .collect();
    let by_hand = |i: usize, j: usize| {
        let k = 3 - i - j;
        omega[(i, j)] * (s[i] + s[j]) - omega[(i, k)] * omega[(j, k)] / pi[k]
    };
    let p = Distribution::new(vec![0.2, 0.45, 0.35]).unwrap();
    let a = compute_a(&w, &PhiFunction::chi_squared(), &p).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!((a[(i, j)] - by_hand(i, j)).abs() < 1e-14, "({i},{j})");
    }
}

#[test]
fn stationary_closed_form_for_random_weights() {
    let mut src = RandomSource::new(3, 0);
    for n in [3, 6] {
        for _ in 0..20 {
            let pi = draw(n, &mut src);
            let w = sample_weight_matrix(&pi, &mut src);
            for alpha in [0.0, 1.0, 2.0, 0.5] {
                let a = compute_a(&w, &phi_for(alpha), &pi).unwrap();
                assert!((a - compute_a_stationary(&w)).amax() <= 1e-10);
            }
        }
    }
}

#[test]
fn exact_kappa_at_two_states_is_the_edge_ratio() {
    let pi = Distribution::new(vec![0.7, 0.3]).unwrap();
    let p = Distribution::new(vec![0.4, 0.6]).unwrap();
    let w = build_optimal_weights(&pi);
    for alpha in [0.0, 1.0, 0.5] {
        let phi = phi_for(alpha);
        let th = compute_theta(&w, &phi, &p).unwrap();
        let a = compute_a(&w, &phi, &p).unwrap();
        let k = exact_kappa(&th, &a).unwrap();
        assert!((k - a[(0, 1)] / th[(0, 1)]).abs() < 1e-12);
    }
}

/// Randomized Rayleigh-quotient minimization followed by a shrinking local
/// search around the best sample.
fn rayleigh_minimum(th: &DMatrix<f64>, a: &DMatrix<f64>, src: &mut RandomSource) -> f64 {
    let n = th.nrows();
    let ratio = |f: &[f64]| gamma2(a, f).unwrap() / gamma1(th, f).unwrap();
    let mut best_f = vec![0.0; n];
    let mut best = f64::INFINITY;
    for _ in 0..10_000 {
        let f: Vec<f64> = draw(n + 1, src).as_slice()[..n].iter().map(|x| x.ln()).collect();
        let r = ratio(&f);
        if r < best {
            best = r;
            best_f = f;
        }
    }
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..n {
            for sign in [-1.0, 1.0] {
                let mut g = best_f.clone();
                g[i] += sign * step;
                let r = ratio(&g);
                if r < best {
                    best = r;
                    best_f = g;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[test]
fn exact_kappa_matches_randomized_minimization() {
    let mut src = RandomSource::new(4, 0);
    for alpha in [0.0, 1.0, 0.5] {
        let pi = draw_interior(4, &mut src);
        let p = draw_interior(4, &mut src);
        let w = sample_weight_matrix(&pi, &mut src);
        let phi = phi_for(alpha);
        let th = compute_theta(&w, &phi, &p).unwrap();
        let a = compute_a(&w, &phi, &p).unwrap();
        let exact = exact_kappa(&th, &a).unwrap();
        let sampled = rayleigh_minimum(&th, &a, &mut src);
        assert!(sampled >= exact - 1e-9, "sampled {sampled} below exact {exact}");
        assert!(sampled - exact <= 1e-3, "alpha {alpha}: sampled {sampled}, exact {exact}");
        let ratio = ratio_bound_kappa(&th, &a, &w.edges()).unwrap();
        assert!(ratio <= exact + 1e-9);
    }
}

#[test]
fn report_bounds_are_ordered() {
    let mut src = RandomSource::new(5, 0);
    for n in [2, 3, 5, 8] {
        let pi = draw(n, &mut src);
        let p = draw_interior(n, &mut src);
        let w = build_optimal_weights(&pi);
        for alpha in [0.0, 1.0, 2.0, 0.5] {
            let r = curvature_report(&w, &phi_for(alpha), &p).unwrap();
            assert!(r.exact_kappa >= r.ratio_bound - 1e-9, "{r:?}");
            assert!(r.kappa_thm2 >= 0.5, "{r:?}");
        }
    }
}

#[test]
fn sqrt_bound_is_below_the_xi_formula() {
    let mut src = RandomSource::new(6, 0);
    for i in 0..300 {
        let n = 2 + i % 12;
        let pi = draw(n, &mut src);
        let sqrt_bound = kappa_sqrt_bound(&pi);
        assert!(sqrt_bound >= 0.5 - 1e-12);
        for alpha in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let k = kappa_formula_thm2(&pi, &phi_for(alpha)).unwrap();
            assert!(sqrt_bound <= k + 1e-9, "alpha {alpha}: {sqrt_bound} > {k}");
            assert!(k >= 0.5 - 1e-12);
        }
    }
}

#[test]
fn sqrt_bound_worst_pair() {
    let pi = Distribution::new(vec![0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap();
    let pairs = [(0.5, 1.0 / 3.0), (0.5, 1.0 / 6.0), (1.0 / 3.0, 1.0 / 6.0)];
    let values: Vec<f64> = pairs
        .iter()
        .map(|&(a, b): &(f64, f64)| 1.0 - 0.5 * (a.sqrt() - b.sqrt()).powi(2))
        .collect();
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(worst, values[1]);
    assert!((kappa_sqrt_bound(&pi) - 1.2 * worst).abs() < 1e-15);
}

/// `Γ2(f) ≥ κ Γ1(f)` with κ from the ξ formula, over random points and test
/// vectors for the optimal weights.
#[test]
fn curvature_inequality_for_optimal_weights() {
    let mut src = RandomSource::new(7, 0);
    let mut failures = Vec::new();
    for n in [2, 5, 20] {
        let pi = draw(n, &mut src);
        let w = build_optimal_weights(&pi);
        for alpha in [0.0, 1.0, 2.0, 0.5] {
            let phi = phi_for(alpha);
            let kappa = kappa_formula_thm2(&pi, &phi).unwrap();
            let mut worst = f64::INFINITY;
            let mut count = 0;
            for _ in 0..1000 {
                let p = draw(n, &mut src);
                let f: Vec<f64> = draw(n, &mut src).as_slice().iter().map(|x| x.ln()).collect();
                let g1 = gamma1(&compute_theta(&w, &phi, &p).unwrap(), &f).unwrap();
                let g2 = gamma2(&compute_a(&w, &phi, &p).unwrap(), &f).unwrap();
                if g2 < kappa * g1 - 1e-9 {
                    count += 1;
                    worst = worst.min(g2 / g1);
                }
            }
            if count > 0 {
                failures.push(format!("n={n} alpha={alpha}: {count}/1000, min Γ2/Γ1 {worst:.4} < κ {kappa:.4}"));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn perturbations_of_the_optimal_weights() {
    let pi = Distribution::new(vec![0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap();
    let w = build_optimal_weights(&pi);
    let report = perturbation_check(&w, 1e-3, 200, 1e-6, &mut RandomSource::new(8, 0)).unwrap();
    println!(
        "min F at the optimal weights {}, best perturbed {}, exceedances {}/{}",
        report.base, report.best_perturbed, report.exceedances, report.trials
    );
    assert_eq!(report.trials, 200);
    assert!(report.best_perturbed.is_finite());
}
