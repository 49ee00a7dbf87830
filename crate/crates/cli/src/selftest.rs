//! Invariant suite behind `mis selftest`.

use mis_core::channel::{snr, snr_full_path};
use mis_core::experiments::{case_study, case_study_spec, sms_baseline, ArcScenarioSpec};
use mis_core::geometry::equivalent_phase;
use mis_core::manifolds::{project_simplex, project_tangent, SIMPLEX_FLOOR};
use mis_core::objective::lse;
use mis_core::oracle::{gradient_suite, random_angles, random_instance};
use mis_core::{MisGeometry, ShiftPosition, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn run(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        selection_operators()?,
        full_path(&mut rng)?,
        sandwich(&mut rng)?,
        tangent_projections(&mut rng)?,
        simplex(&mut rng),
        gradients(seed)?,
        matched_filter()?,
        case_study_checks(seed)?,
    ])
}

fn selection_operators() -> Result<Check, CliError> {
    let mut geometries = 0;
    let mut ok = true;
    for mr in 1..=4 {
        for mc in 1..=4 {
            for nr in 1..=mr {
                for nc in 1..=mc {
                    let g = MisGeometry::new(mr, mc, nr, nc)?;
                    geometries += 1;
                    let grid = g.pattern_grid();
                    for sel in g.selections() {
                        let mut hits = vec![0u8; g.ms1_len()];
                        for &m in sel.overlap_map() {
                            hits[m] += 1;
                        }
                        ok &= hits
                            .iter()
                            .zip(sel.padding())
                            .all(|(&h, &p)| h + u8::from(p) == 1);
                        let u = sel.position().index(grid);
                        ok &= ShiftPosition::from_index(grid, u)? == sel.position();
                    }
                }
            }
        }
    }
    Ok(check(
        "selection_operators",
        ok,
        format!("{geometries} geometries up to 4x4"),
    ))
}

fn full_path(rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (scenario, problem, point) = random_instance(rng, 16, 4, 4)?;
        for sel in problem.selections().iter().take(3) {
            let tb = equivalent_phase(&point.theta, sel)?;
            for (k, ch) in problem.channels().iter().enumerate() {
                let a = snr(&point.phi, &tb, ch)?;
                let b = snr_full_path(&point.phi, &tb, &scenario, k, random_angles(rng))?;
                worst = worst.max((a - b).abs() / a.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(check(
        "full_path_equivalence",
        worst < 1e-10,
        format!("max relative error {worst:e} (tolerance 1e-10)"),
    ))
}

fn sandwich(rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut ok = true;
    for _ in 0..100 {
        let (_, problem, point) = random_instance(rng, 16, 4, 4)?;
        let g = problem.evaluate(&point).g;
        let mu = rng.random_range(1e-4..1.0);
        let f = lse(&g, mu);
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        let gap = mu * (g.len() as f64).ln();
        let tol = 1e-12 * min.abs().max(gap);
        ok &= f <= min + tol && min <= f + gap + tol;
    }
    Ok(check("lse_sandwich", ok, "100 random points".into()))
}

fn tangent_projections(rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (_, problem, point) = random_instance(rng, 16, 4, 4)?;
        let g = problem.egrad(&point, 0.1);
        let p = project_tangent(&point, &g)?;
        let pp = project_tangent(&point, &p)?;
        for (b, t) in point.phi.iter().zip(&p.d_phi).chain(point.theta.iter().zip(&p.d_theta)) {
            worst = worst.max((b.conj() * t).re.abs() / t.norm().max(1.0));
        }
        for row in p.d_x.rows() {
            worst = worst.max(row.sum().abs() / row.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
        }
        let complex = p.d_phi.iter().zip(&pp.d_phi).chain(p.d_theta.iter().zip(&pp.d_theta));
        for (a, b) in complex {
            worst = worst.max((a - b).norm() / a.norm().max(1.0));
        }
        for (a, b) in p.d_x.iter().zip(pp.d_x.iter()) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok(check(
        "tangent_projections",
        worst < 1e-14,
        format!("max tangency/idempotence defect {worst:e} (tolerance 1e-14)"),
    ))
}

fn simplex(rng: &mut ChaCha8Rng) -> Check {
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = project_simplex(&y);
        ok &= (p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|&v| v >= SIMPLEX_FLOOR);
        let s: f64 = y.iter().map(|v| v.abs() + 0.1).sum();
        let inside: Vec<f64> = y.iter().map(|v| (v.abs() + 0.1) / s).collect();
        ok &= project_simplex(&inside)
            .iter()
            .zip(&inside)
            .all(|(a, b)| (a - b).abs() < 1e-12);
    }
    check("simplex_projection", ok, "200 random vectors".into())
}

fn gradients(seed: u64) -> Result<Check, CliError> {
    let cases = gradient_suite(seed, 5, crate::commands::FD_STEP)?;
    let worst = cases.iter().map(|c| c.check.relative_error).fold(0.0, f64::max);
    Ok(check(
        "gradient_fd",
        worst < crate::commands::FD_TOLERANCE,
        format!("{} checks, max relative error {worst:e}", cases.len()),
    ))
}

fn matched_filter() -> Result<Check, CliError> {
    let spec = ArcScenarioSpec::new(MisGeometry::single_layer(2, 2)?, 1);
    let report = sms_baseline(&spec, &SolverConfig { restarts: 2, ..Default::default() })?;
    let target = spec.iota * 16.0;
    let rel = (report.worst_snr - target).abs() / target;
    Ok(check(
        "matched_filter",
        rel < 0.01,
        format!("{} vs {} (relative {rel:e})", report.worst_snr, target),
    ))
}

fn case_study_checks(seed: u64) -> Result<Check, CliError> {
    let spec = case_study_spec(6)?;
    let config = SolverConfig { restarts: 2, seed, ..Default::default() };
    let a = case_study(6, &spec, &config)?;
    let b = case_study(6, &spec, &config)?;
    let deterministic = a == b;
    let nested = a.mis.worst_snr >= a.sms.worst_snr * (1.0 - 1e-6);
    Ok(check(
        "determinism_and_nesting",
        deterministic && nested,
        format!(
            "repeat identical: {deterministic}; MIS {} >= SMS {}: {nested}",
            a.mis.worst_snr, a.sms.worst_snr
        ),
    ))
}
