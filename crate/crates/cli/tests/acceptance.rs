//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_3;
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mis_core::experiments::{
    build_arc_scenario, default_1d2d_geometries, sms_baseline, sweep_allocation, sweep_ms2_sizes,
    sweep_users_1d2d, AllocationScheme, ArcScenarioSpec, SweepResult,
};
use mis_core::channel::{snr, snr_full_path};
use mis_core::geometry::equivalent_phase;
use mis_core::manifolds::{project_simplex, project_tangent, retract};
use mis_core::objective::lse;
use mis_core::oracle::{brute_force_solve, gradient_suite, random_angles, random_instance, BruteForceConfig};
use mis_core::solver::solve_problem;
use mis_core::{MisGeometry, Problem, SolveReport, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

const GRADIENT_TOL: f64 = 1e-5;
const SANDWICH_TOL: f64 = 1e-12;
const FULL_PATH_TOL: f64 = 1e-10;
const TANGENT_TOL: f64 = 1e-14;
const SIMPLEX_TOL: f64 = 1e-10;
const FEASIBLE_TOL: f64 = 1e-12;
const ORACLE_RATIO: f64 = 0.95;
const MATCHED_FILTER_TOL: f64 = 0.01;
const NESTING_TOL: f64 = 1e-6;
const GAIN_MS2: f64 = 1.10;
const GAIN_ALLOCATION: f64 = 1.20;

struct Verdict {
    pass: bool,
    detail: String,
}

struct Suite {
    failures: usize,
    /// `(run label, trace monotone)` for every solver run made by the suite.
    traces: Vec<(String, bool)>,
}

impl Suite {
    fn run(&mut self, id: &str, name: &str, budget: Duration, body: impl FnOnce(&mut Self) -> Verdict) {
        let start = Instant::now();
        let v = body(self);
        let elapsed = start.elapsed();
        let in_time = elapsed < budget;
        let pass = v.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} criterion {id}: {name}: {} [{:.2} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }

    fn record(&mut self, label: impl Into<String>, report: &SolveReport) {
        self.traces.push((label.into(), report.trace_is_monotone()));
    }

    fn record_sweep(&mut self, sweep: &SweepResult) {
        for c in &sweep.cells {
            self.traces.push((
                format!("{} N={}x{}", sweep.label, c.n_rows, c.n_cols),
                c.monotone,
            ));
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Nearest simplex point by enumerating every support set.
fn simplex_qp(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| y[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = y[i] - tau;
        }
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("some support is feasible").1
}

fn gradients(_: &mut Suite) -> Verdict {
    let cases = gradient_suite(SEED, 20, 1e-6).expect("gradient suite");
    let worst = cases.iter().map(|c| c.check.relative_error).fold(0.0, f64::max);
    Verdict {
        pass: worst < GRADIENT_TOL,
        detail: format!("{} checks on 20 instances, max relative error {worst:.3e} (< {GRADIENT_TOL:e})", cases.len()),
    }
}

fn sandwich(_: &mut Suite) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (_, problem, point) = random_instance(&mut rng, 16, 4, 4).expect("instance");
        let g = problem.evaluate(&point).g;
        let mu = 10f64.powf(rng.random_range(-4.0..0.0)) * g.iter().copied().fold(0.0, f64::max);
        let f = lse(&g, mu);
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        let gap = mu * (g.len() as f64).ln();
        let scale = min.abs().max(gap).max(f64::MIN_POSITIVE);
        let lower = (f - min).max(0.0) / scale;
        let upper = (min - f - gap).max(0.0) / scale;
        worst = worst.max(lower).max(upper);
    }
    Verdict {
        pass: worst <= SANDWICH_TOL,
        detail: format!("100 points, max relative violation {worst:.3e} (<= {SANDWICH_TOL:e})"),
    }
}

fn full_path(_: &mut Suite) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    let mut evaluations = 0;
    for _ in 0..50 {
        let (scenario, problem, point) = random_instance(&mut rng, 16, 4, 4).expect("instance");
        for sel in problem.selections() {
            let tb = equivalent_phase(&point.theta, sel).expect("phase");
            for (k, ch) in problem.channels().iter().enumerate() {
                let a = snr(&point.phi, &tb, ch).expect("snr");
                let b = snr_full_path(&point.phi, &tb, &scenario, k, random_angles(&mut rng)).expect("full path");
                worst = worst.max((a - b).abs() / a.max(f64::MIN_POSITIVE));
                evaluations += 1;
            }
        }
    }
    Verdict {
        pass: worst < FULL_PATH_TOL,
        detail: format!("50 instances, {evaluations} evaluations with random BS angles, max relative error {worst:.3e} (< {FULL_PATH_TOL:e})"),
    }
}

fn manifolds(_: &mut Suite) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut tangent: f64 = 0.0;
    let mut infeasible: f64 = 0.0;
    for _ in 0..50 {
        let (_, problem, point) = random_instance(&mut rng, 16, 4, 4).expect("instance");
        let g = problem.egrad(&point, 0.1);
        let p = project_tangent(&point, &g).expect("projection");
        let pp = project_tangent(&point, &p).expect("projection");
        for (b, t) in point.phi.iter().zip(&p.d_phi).chain(point.theta.iter().zip(&p.d_theta)) {
            tangent = tangent.max((b.conj() * t).re.abs() / t.norm().max(1.0));
        }
        for row in p.d_x.rows() {
            tangent = tangent.max(row.sum().abs() / row.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
        }
        for (a, b) in p.d_phi.iter().zip(&pp.d_phi).chain(p.d_theta.iter().zip(&pp.d_theta)) {
            tangent = tangent.max((a - b).norm() / a.norm().max(1.0));
        }
        for (a, b) in p.d_x.iter().zip(pp.d_x.iter()) {
            tangent = tangent.max((a - b).abs() / a.abs().max(1.0));
        }
        for _ in 0..4 {
            let alpha = 10f64.powf(rng.random_range(-3.0..2.0));
            let next = retract(&point, &p, alpha).expect("retraction");
            let negative = next.schedule.iter().any(|&x| x <= 0.0);
            infeasible = infeasible.max(next.feasibility_error());
            if negative {
                infeasible = f64::INFINITY;
            }
        }
    }
    let mut simplex: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = project_simplex(&y);
        let want = simplex_qp(&y);
        simplex = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(simplex, f64::max);
    }
    Verdict {
        pass: tangent < TANGENT_TOL && simplex < SIMPLEX_TOL && infeasible < FEASIBLE_TOL,
        detail: format!(
            "tangent defect {tangent:.3e} (< {TANGENT_TOL:e}), simplex vs QP {simplex:.3e} on 200 vectors (< {SIMPLEX_TOL:e}), retraction violation {infeasible:.3e} (< {FEASIBLE_TOL:e})"
        ),
    }
}

fn oracle(suite: &mut Suite) -> Verdict {
    let mut spec = ArcScenarioSpec::new(MisGeometry::new(2, 1, 1, 1).expect("geometry"), 2);
    spec.azimuth_lo = -FRAC_PI_3;
    spec.azimuth_hi = FRAC_PI_3;
    let problem = Problem::new(&build_arc_scenario(&spec).expect("scenario")).expect("problem");
    let lattice = brute_force_solve(&problem, &BruteForceConfig::default()).expect("oracle");
    let config = SolverConfig { restarts: 8, seed: SEED, ..Default::default() };
    let report = solve_problem(&problem, &config, &[]).expect("solve");
    suite.record("oracle 2x1/1x1", &report);
    let ratio = report.worst_snr / lattice.value;
    Verdict {
        pass: ratio >= ORACLE_RATIO,
        detail: format!(
            "solver {:.6e} vs 16-level oracle {:.6e}, ratio {ratio:.6} (>= {ORACLE_RATIO})",
            report.worst_snr, lattice.value
        ),
    }
}

fn matched_filter(suite: &mut Suite) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for side in [2, 4, 8] {
        let spec = ArcScenarioSpec::new(MisGeometry::single_layer(side, side).expect("geometry"), 1);
        let config = SolverConfig { seed: SEED, ..Default::default() };
        let report = sms_baseline(&spec, &config).expect("solve");
        suite.record(format!("matched filter {side}x{side}"), &report);
        let m = (side * side) as f64;
        let target = spec.iota * m * m;
        let rel = (report.worst_snr - target).abs() / target;
        pass &= rel < MATCHED_FILTER_TOL;
        parts.push(format!("M={}: {rel:.2e}", side * side));
    }
    Verdict {
        pass,
        detail: format!("relative error vs iota*M^2 ({}) (< {MATCHED_FILTER_TOL})", parts.join(", ")),
    }
}

fn spec_6x6() -> ArcScenarioSpec {
    ArcScenarioSpec::new(MisGeometry::single_layer(6, 6).expect("geometry"), 8)
}

fn nesting(suite: &mut Suite, sweep: &SweepResult) -> Verdict {
    suite.record_sweep(sweep);
    let worst = sweep.cells.iter().map(|c| c.gain).fold(f64::INFINITY, f64::min);
    Verdict {
        pass: worst >= 1.0 - NESTING_TOL,
        detail: format!(
            "{} cells, smallest MIS/SMS ratio {worst:.6} (>= 1 - {NESTING_TOL:e})",
            sweep.cells.len()
        ),
    }
}

fn gain_bounds(suite: &mut Suite, ms2: &SweepResult) -> Verdict {
    let best_small = ms2
        .cells
        .iter()
        .filter(|c| c.ms2_len() <= 4)
        .map(|c| (c.gain, c.n_rows, c.n_cols))
        .fold((0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let a = best_small.0 >= GAIN_MS2;

    let config = SolverConfig { seed: SEED, ..Default::default() };
    let spec = ArcScenarioSpec::new(MisGeometry::single_layer(8, 8).expect("geometry"), 8);
    let mut peaks = Vec::new();
    for (n, scheme) in [(1, AllocationScheme::Columns), (2, AllocationScheme::Rows)] {
        let sweep = sweep_allocation(64, scheme, &spec, &config).expect("allocation sweep");
        suite.record_sweep(&sweep);
        let best = sweep.best_cell().expect("non-empty").clone();
        peaks.push((n, best));
    }
    let peak = peaks.iter().map(|(_, c)| c.gain).fold(0.0, f64::max);
    let b = peak >= GAIN_ALLOCATION;

    let template = ArcScenarioSpec::new(MisGeometry::single_layer(8, 8).expect("geometry"), 1);
    let counts = [4, 8, 16, 32];
    let rows = sweep_users_1d2d(&default_1d2d_geometries(), &counts, &template, &config).expect("users sweep");
    let mut c = true;
    let mut curves = Vec::new();
    for (label, _) in default_1d2d_geometries() {
        let curve: Vec<&_> = rows.iter().filter(|r| r.label == label).collect();
        for r in &curve {
            suite.traces.push((format!("users {label} K={}", r.users), r.monotone));
        }
        c &= curve.windows(2).all(|w| w[1].worst_snr <= w[0].worst_snr * (1.0 + NESTING_TOL));
        let dbs: Vec<String> = curve.iter().map(|r| format!("{:.2}", r.worst_snr_db)).collect();
        curves.push(format!("{label} [{}] dB", dbs.join(", ")));
    }

    let scheme_report: Vec<String> = peaks
        .iter()
        .map(|(n, cell)| {
            format!(
                "scheme {n} peak {:.4} at {}x{}/{}x{}",
                cell.gain, cell.m_rows, cell.m_cols, cell.n_rows, cell.n_cols
            )
        })
        .collect();
    Verdict {
        pass: a && b && c,
        detail: format!(
            "(a) best N<=4 gain {:.4} at {}x{} (>= {GAIN_MS2}): {}; (b) {} (>= {GAIN_ALLOCATION}): {}; (c) K = {counts:?}: {}: {}",
            best_small.0,
            best_small.1,
            best_small.2,
            verdict(a),
            scheme_report.join(", "),
            verdict(b),
            curves.join(", "),
            verdict(c)
        ),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

fn monotone(suite: &mut Suite) -> Verdict {
    let bad: Vec<&str> = suite.traces.iter().filter(|(_, ok)| !ok).map(|(l, _)| l.as_str()).collect();
    Verdict {
        pass: bad.is_empty() && !suite.traces.is_empty(),
        detail: if bad.is_empty() {
            format!("{} runs with non-decreasing surrogate", suite.traces.len())
        } else {
            format!("{} of {} runs not monotone: {}", bad.len(), suite.traces.len(), bad.join("; "))
        },
    }
}

fn determinism(_: &mut Suite) -> Verdict {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut csvs = Vec::new();
    for out in ["first", "second"] {
        let status = Command::new(env!("CARGO_BIN_EXE_mis"))
            .args(["case-study", "--figure", "6", "--seed", "7", "--out", out])
            .current_dir(tmp.path())
            .output()
            .expect("binary runs");
        if !status.status.success() {
            return Verdict {
                pass: false,
                detail: format!("run failed: {}", String::from_utf8_lossy(&status.stderr)),
            };
        }
        csvs.push(fs::read(tmp.path().join(out).join("results.csv")).expect("csv"));
    }
    Verdict {
        pass: csvs[0] == csvs[1],
        detail: format!("two runs, {} bytes each, identical: {}", csvs[0].len(), csvs[0] == csvs[1]),
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0, traces: Vec::new() };
    suite.run("1", "gradient correctness", secs(10), gradients);
    suite.run("2", "LSE sandwich", secs(5), sandwich);
    suite.run("3", "model equivalence", secs(5), full_path);
    suite.run("4", "manifold primitives", secs(5), manifolds);
    suite.run("5", "oracle optimality", secs(60), oracle);
    suite.run("6", "matched-filter closed form", secs(30), matched_filter);

    let config = SolverConfig { seed: SEED, ..Default::default() };
    let mut ms2 = None;
    suite.run("7", "feasible-set nesting", secs(15 * 60), |s| {
        let sweep = sweep_ms2_sizes(&spec_6x6(), &config).expect("ms2 sweep");
        let v = nesting(s, &sweep);
        ms2 = Some(sweep);
        v
    });
    let ms2 = ms2.expect("sweep ran");
    suite.run("8", "gain lower bounds", secs(30 * 60), |s| gain_bounds(s, &ms2));
    suite.run("9", "monotone solver trace", secs(5), monotone);
    suite.run("10", "determinism", secs(60), determinism);

    println!("{} of 10 criteria failed", suite.failures);
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
