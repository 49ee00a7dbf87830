mod common;

use mis_core::experiments::{build_arc_scenario, case_study, case_study_spec, ArcScenarioSpec};
use mis_core::oracle::{brute_force_solve, gamma_table, BruteForceConfig};
use mis_core::solver::{
    inner_solve, lift_single_layer, line_search, random_start, solve_from, solve_problem,
    LineSearchParams,
};
use mis_core::{
    CascadedChannel, MisGeometry, Problem, ProductPoint, SolveReport, SolverConfig, TangentTriple,
};
use ndarray::{array, Array2};
use num_complex::Complex64;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn assert_monotone(report: &SolveReport) {
    for w in report.trace.windows(2) {
        if w[0].outer == w[1].outer {
            assert!(w[1].objective >= w[0].objective, "{:?} -> {:?}", w[0], w[1]);
        }
    }
}

fn assert_consistent(problem: &Problem, report: &SolveReport) {
    let table = gamma_table(problem, &report.phi, &report.theta);
    let per_user: Vec<f64> = report
        .selected_patterns
        .iter()
        .enumerate()
        .map(|(k, &u)| table[k][u - 1])
        .collect();
    let worst = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((worst - report.worst_snr).abs() <= 1e-12 * worst);
    assert!(report.point().feasibility_error() < 1e-12);
    for (k, row) in report.schedule.rows().into_iter().enumerate() {
        assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(row[report.selected_patterns[k] - 1], 1.0);
    }
}

#[test]
fn line_search_on_quadratic_toy() {
    let point = ProductPoint {
        phi: vec![one()],
        theta: vec![one()],
        schedule: array![[0.5, 0.5]],
    };
    let dir = TangentTriple {
        d_phi: vec![Complex64::new(0.0, 0.0)],
        d_theta: vec![Complex64::new(0.0, 0.0)],
        d_x: array![[1.0, -1.0]],
    };
    let f = |p: &ProductPoint| -(p.schedule[[0, 0]] - 0.8).powi(2);
    // d/da f(x + a d) at a = 0 is 2 * 0.3.
    let params = LineSearchParams {
        c1: 0.5,
        factor: 0.5,
        max_backtracks: 50,
    };
    let ls = line_search(f, &point, f(&point), &dir, 0.6, 1.0, params);
    let optimum = 0.3;
    assert!(!ls.stalled);
    assert!(
        ls.alpha <= optimum && ls.alpha >= optimum * params.factor,
        "alpha {}",
        ls.alpha
    );
    assert!(ls.value >= f(&point) + params.c1 * ls.alpha * 0.6);
}

#[test]
fn line_search_armijo_holds_post_hoc() {
    for seed in 0..10 {
        let mut rng = common::rng(seed);
        let p = common::random_problem(&mut rng, MisGeometry::new(3, 3, 2, 1).unwrap(), 3);
        let pt = common::random_point(&mut rng, &p);
        let mu = 0.01;
        let egrad = p.egrad(&pt, mu);
        let dir = mis_core::manifolds::project_tangent(&pt, &egrad).unwrap();
        let slope = dir.inner(&dir);
        let f = |q: &ProductPoint| p.lse_objective(q, mu);
        let value = f(&pt);
        let params = LineSearchParams {
            c1: 1e-4,
            factor: 0.5,
            max_backtracks: 50,
        };
        let ls = line_search(f, &pt, value, &dir, slope, 10.0, params);
        assert!(!ls.stalled);
        let again = p.lse_objective(&ls.point, mu);
        assert_eq!(again, ls.value);
        assert!(again >= value + params.c1 * ls.alpha * slope);
    }
}

#[test]
fn stationary_start_returns_immediately() {
    let geom = MisGeometry::new(1, 1, 1, 1).unwrap();
    let p = Problem::from_parts(
        geom,
        vec![CascadedChannel::new(
            vec![Complex64::from_polar(1.0, 0.7)],
            0.01,
        )],
    )
    .unwrap();
    let start = ProductPoint::identity(1, 1, 1, 1);
    let mut trace = Vec::new();
    let out = inner_solve(
        &p,
        start.clone(),
        0.1,
        0,
        &SolverConfig::default(),
        &mut trace,
    );
    assert!(out.converged);
    assert_eq!(out.iterations, 0);
    assert_eq!(out.point, start);
    assert_eq!(trace.len(), 1);
}

#[test]
fn matched_filter_from_random_start() {
    let mut rng = common::rng(2);
    let geom = MisGeometry::single_layer(2, 2).unwrap();
    let p = common::random_problem(&mut rng, geom, 1);
    let iota = p.channels()[0].iota;
    let report = solve_from(&p, random_start(&p, 3, 0), &SolverConfig::default()).unwrap();
    assert!((report.worst_snr - iota * 16.0).abs() <= 0.01 * iota * 16.0);
    assert_monotone(&report);
    assert_consistent(&p, &report);
}

#[test]
fn single_pattern_schedule_is_ones_column() {
    let mut rng = common::rng(4);
    let p = common::random_problem(&mut rng, MisGeometry::single_layer(3, 2).unwrap(), 3);
    let report = solve_problem(
        &p,
        &SolverConfig {
            restarts: 2,
            ..Default::default()
        },
        &[],
    )
    .unwrap();
    assert_eq!(report.schedule, Array2::ones((3, 1)));
    assert_eq!(report.selected_patterns, vec![1; 3]);
}

#[test]
fn tiny_instance_reaches_oracle() {
    for seed in 0..3 {
        let mut rng = common::rng(100 + seed);
        let p = common::random_problem(&mut rng, MisGeometry::new(2, 1, 1, 1).unwrap(), 2);
        let oracle = brute_force_solve(&p, &BruteForceConfig::default()).unwrap();
        let report = solve_problem(&p, &SolverConfig::default(), &[]).unwrap();
        assert!(
            report.worst_snr >= 0.95 * oracle.value,
            "{} vs {}",
            report.worst_snr,
            oracle.value
        );
        assert_monotone(&report);
        assert_consistent(&p, &report);
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let mut rng = common::rng(9);
    let p = common::random_problem(&mut rng, MisGeometry::new(3, 3, 2, 2).unwrap(), 3);
    let config = SolverConfig {
        restarts: 4,
        seed: 17,
        ..Default::default()
    };
    let a = solve_problem(&p, &config, &[]).unwrap();
    let b = solve_problem(&p, &config, &[]).unwrap();
    assert_eq!(a, b);
    let c = solve_problem(&p, &SolverConfig { seed: 18, ..config }, &[]).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn lifted_single_layer_nests() {
    for seed in 0..4 {
        let mut rng = common::rng(200 + seed);
        let geom = MisGeometry::new(3, 3, 2, 1).unwrap();
        let scenario = common::random_scenario(&mut rng, geom, 4);
        let config = SolverConfig {
            restarts: 3,
            seed,
            ..Default::default()
        };
        let sms_problem = Problem::new(&scenario.with_geometry(geom.to_single_layer())).unwrap();
        let sms = solve_problem(&sms_problem, &config, &[]).unwrap();
        let problem = Problem::new(&scenario).unwrap();
        let warm = lift_single_layer(&sms, &problem).unwrap();
        assert!(
            (problem.min_snr(&ProductPoint {
                schedule: Array2::from_elem(
                    (4, problem.patterns()),
                    1.0 / problem.patterns() as f64
                ),
                ..warm.clone()
            }) - sms.worst_snr)
                .abs()
                <= 1e-9 * sms.worst_snr
        );
        let mis = solve_problem(&problem, &config, &[warm]).unwrap();
        assert!(mis.worst_snr >= sms.worst_snr * (1.0 - 1e-6));
        assert_monotone(&mis);
        assert_consistent(&problem, &mis);
    }
}

#[test]
fn two_pattern_case_study_beats_single_layer() {
    let spec = case_study_spec(6).unwrap();
    let study = case_study(6, &spec, &SolverConfig::default()).unwrap();
    assert!(study.mis.worst_snr > study.sms.worst_snr);
    assert_eq!(study.used_patterns(), vec![1, 2]);
    assert_eq!(study.rows.iter().filter(|r| r.surface == "sms").count(), 4);
    assert_eq!(study.rows.iter().filter(|r| r.surface == "mis").count(), 8);
    assert_monotone(&study.mis);
    assert_monotone(&study.sms);
}

#[test]
fn four_pattern_case_study_table() {
    let spec = case_study_spec(7).unwrap();
    let study = case_study(7, &spec, &SolverConfig::default()).unwrap();
    assert_eq!(study.rows.iter().filter(|r| r.surface == "mis").count(), 16);
    assert!(study.used_patterns().len() <= 4);
    assert!(study.mis.worst_snr >= study.sms.worst_snr * (1.0 - 1e-6));
    let problem = Problem::new(&build_arc_scenario(&spec).unwrap()).unwrap();
    assert_consistent(&problem, &study.mis);
}

#[test]
fn rejects_bad_config_and_start() {
    let spec = ArcScenarioSpec::new(MisGeometry::new(2, 1, 1, 1).unwrap(), 2);
    let p = Problem::new(&build_arc_scenario(&spec).unwrap()).unwrap();
    let bad = SolverConfig {
        delta: 1.0,
        ..Default::default()
    };
    assert!(solve_problem(&p, &bad, &[]).is_err());
    let mut start = ProductPoint::identity(2, 1, 2, 2);
    start.schedule[[0, 0]] = 0.9;
    assert!(solve_from(&p, start, &SolverConfig::default()).is_err());
    assert!(solve_from(
        &p,
        ProductPoint::identity(3, 1, 2, 2),
        &SolverConfig::default()
    )
    .is_err());
}
