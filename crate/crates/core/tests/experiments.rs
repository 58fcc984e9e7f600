use ricci_mcmc::experiments::{draw_realization, GeneratorKind};
use ricci_mcmc::{
    build_optimal_q, optimal_c, run_experiment, simulate, write_convergence_plot, write_result_csv, Error,
    ExperimentConfig, IntegratorConfig, Observer,
};

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    run_experiment(cfg).unwrap().write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = ExperimentConfig {
        observers: vec!["l1".into(), "kl".into()],
        t_end: 2.0,
        ..ExperimentConfig::new(40, 12, 77)
    };
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
    let other = ExperimentConfig { seed: 78, ..cfg.clone() };
    assert_ne!(csv_bytes(&cfg), csv_bytes(&other));
}

#[test]
fn per_realization_euler_error_is_first_order() {
    let cfg = ExperimentConfig::new(250, 5, 11);
    for k in 0..cfg.k {
        let (pi, p0) = draw_realization(&cfg, k).unwrap();
        let c = optimal_c(&pi).value();
        let traj = simulate(
            &build_optimal_q(&pi),
            &p0,
            &IntegratorConfig::new(cfg.dt, cfg.t_end).keep_states(false),
            &[Observer::l1(&pi)],
        )
        .unwrap();
        let l1 = traj.series("l1").unwrap();
        for t in [1.0, 5.0, 10.0] {
            let row = (t / cfg.dt).round() as usize;
            let oracle = (-c * t).exp() * l1[0];
            assert!(
                (l1[row] - oracle).abs() <= 3.0 * c * cfg.dt * t * l1[0],
                "realization {k}, t = {t}"
            );
        }
    }
}

#[test]
fn averaged_series_are_nonincreasing_and_ordered() {
    for n in [250, 500, 1000, 2000] {
        let res = run_experiment(&ExperimentConfig::new(n, 100, 5)).unwrap();
        let opt = res.mean(GeneratorKind::Optimal, "l1").unwrap();
        let mh = res.mean(GeneratorKind::Mh, "l1").unwrap();
        for series in [opt, mh] {
            assert!(series.windows(2).all(|w| w[1] <= w[0] + 1e-8), "n = {n}");
        }
        for (row, &t) in res.times.iter().enumerate().skip(1) {
            assert!(opt[row] < mh[row], "n = {n}, t = {t}");
        }
        assert_eq!(res.per_realization_seeds.len(), 100);
    }
}

#[test]
fn csv_round_trips_bit_for_bit() {
    let cfg = ExperimentConfig {
        t_end: 0.5,
        observers: vec!["l1".into(), "chi2".into()],
        ..ExperimentConfig::new(8, 3, 21)
    };
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    write_result_csv(&res, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("t,optimal_l1,mh_l1,optimal_chi2,mh_chi2"));
    for (row, line) in lines.enumerate() {
        let fields: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields[0].to_bits(), res.times[row].to_bits());
        for (col, s) in res.mean_series.iter().enumerate() {
            assert_eq!(fields[col + 1].to_bits(), s.values[row].to_bits());
        }
    }
}

#[test]
fn single_step_horizon_has_two_rows() {
    let cfg = ExperimentConfig {
        t_end: 0.01,
        ..ExperimentConfig::new(5, 2, 1)
    };
    let res = run_experiment(&cfg).unwrap();
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn missing_directory_is_reported_with_its_path() {
    let res = run_experiment(&ExperimentConfig {
        t_end: 0.05,
        ..ExperimentConfig::new(4, 1, 1)
    })
    .unwrap();
    let path = std::path::Path::new("/nonexistent-dir/sub/out.csv");
    match write_result_csv(&res, path) {
        Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(write_convergence_plot(&res, path, false), Err(Error::Io { .. })));
}

#[test]
fn plot_has_one_polyline_per_generator() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        t_end: 1.0,
        ..ExperimentConfig::new(10, 4, 3)
    };
    for (generators, expected) in [(vec![GeneratorKind::Optimal, GeneratorKind::Mh], 2), (vec![GeneratorKind::Mh], 1)] {
        let res = run_experiment(&ExperimentConfig {
            generators,
            ..base.clone()
        })
        .unwrap();
        let path = dir.path().join("plot.svg");
        write_convergence_plot(&res, &path, false).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<polyline").count(), expected);
        assert!(svg.starts_with("<svg"));
    }
}
