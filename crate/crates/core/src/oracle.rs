//! Independent ground truth: exhaustive search on a phase lattice and
//! central finite differences.
//!
//! Nothing here goes through [`Problem::evaluate`]; SNRs are recomputed from
//! dense equivalent phases with [`channel::snr`](crate::channel::snr).

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::snr;
use crate::channel::{ArrayAngles, Scenario, User};
use crate::error::{Error, Result};
use crate::geometry::{equivalent_phase, MisGeometry};
use crate::manifolds::TangentTriple;
use crate::objective::{Problem, ProductPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BruteForceConfig {
    /// Phases are drawn from `2 pi l / phase_levels`, `l = 0..phase_levels`.
    pub phase_levels: usize,
    /// Cap on `phase_levels^(M + N) * U^K`.
    pub max_search_space: u128,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self {
            phase_levels: 16,
            max_search_space: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    /// Lattice-optimal worst-case SNR.
    pub value: f64,
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    /// 1-based pattern per user.
    pub patterns: Vec<usize>,
}

/// `phase_levels^(M + N) * U^K`, or `None` on overflow.
pub fn search_space_size(problem: &Problem, phase_levels: usize) -> Option<u128> {
    let g = problem.geometry();
    let phases = (phase_levels as u128).checked_pow((g.ms1_len() + g.ms2_len()) as u32)?;
    let schedules = (problem.patterns() as u128).checked_pow(problem.users() as u32)?;
    phases.checked_mul(schedules)
}

fn lattice(levels: usize) -> Vec<Complex64> {
    (0..levels)
        .map(|l| Complex64::from_polar(1.0, TAU * l as f64 / levels as f64))
        .collect()
}

/// Decodes a mixed-radix lattice index into phase indices.
fn decode(mut index: u128, levels: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut().rev() {
        *d = (index % levels as u128) as usize;
        index /= levels as u128;
    }
    digits
}

/// `gamma[k][u]` from dense equivalent phases.
pub fn gamma_table(problem: &Problem, phi: &[Complex64], theta: &[Complex64]) -> Vec<Vec<f64>> {
    let bars: Vec<Vec<Complex64>> = problem
        .selections()
        .iter()
        .map(|s| equivalent_phase(theta, s).expect("lattice dims"))
        .collect();
    problem
        .channels()
        .iter()
        .map(|ch| {
            bars.iter()
                .map(|tb| snr(phi, tb, ch).expect("lattice dims"))
                .collect()
        })
        .collect()
}

fn check_space(problem: &Problem, cfg: &BruteForceConfig) -> Result<u128> {
    if cfg.phase_levels < 2 {
        return Err(Error::InvalidConfig {
            key: "phase_levels",
            reason: format!("must be at least 2, got {}", cfg.phase_levels),
        });
    }
    match search_space_size(problem, cfg.phase_levels) {
        Some(size) if size <= cfg.max_search_space => Ok(size),
        size => Err(Error::SearchSpaceTooLarge {
            size: size.unwrap_or(u128::MAX),
            cap: cfg.max_search_space,
        }),
    }
}

fn exhaustive<F>(problem: &Problem, cfg: &BruteForceConfig, inner: F) -> Result<BruteForceResult>
where
    F: Fn(&[Vec<f64>]) -> (f64, Vec<usize>) + Sync,
{
    check_space(problem, cfg)?;
    let g = problem.geometry();
    let (m, n) = (g.ms1_len(), g.ms2_len());
    let levels = cfg.phase_levels;
    let lat = lattice(levels);
    let tuples = (levels as u128).pow((m + n) as u32);

    let best = (0..tuples)
        .into_par_iter()
        .map(|idx| {
            let digits = decode(idx, levels, m + n);
            let phi: Vec<Complex64> = digits[..m].iter().map(|&d| lat[d]).collect();
            let theta: Vec<Complex64> = digits[m..].iter().map(|&d| lat[d]).collect();
            let table = gamma_table(problem, &phi, &theta);
            let (value, patterns) = inner(&table);
            (value, idx, patterns)
        })
        .reduce_with(|a, b| {
            // Deterministic: larger value wins, ties to the smaller lattice index.
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("non-empty lattice");

    let digits = decode(best.1, levels, m + n);
    Ok(BruteForceResult {
        value: best.0,
        phi: digits[..m].iter().map(|&d| lat[d]).collect(),
        theta: digits[m..].iter().map(|&d| lat[d]).collect(),
        patterns: best.2,
    })
}

/// Exact lattice max-min SNR, assigning each user its best pattern.
pub fn brute_force_solve(problem: &Problem, cfg: &BruteForceConfig) -> Result<BruteForceResult> {
    exhaustive(problem, cfg, |table| {
        let mut worst = f64::INFINITY;
        let mut patterns = Vec::with_capacity(table.len());
        for row in table {
            let (u, v) = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (u, &v)| if v > acc.1 { (u, v) } else { acc },
                );
            patterns.push(u + 1);
            worst = worst.min(v);
        }
        (worst, patterns)
    })
}

/// Same optimum as [`brute_force_solve`], enumerating all `U^K` schedules explicitly.
pub fn brute_force_solve_joint(
    problem: &Problem,
    cfg: &BruteForceConfig,
) -> Result<BruteForceResult> {
    let users = problem.users();
    let patterns = problem.patterns();
    let schedules = patterns.pow(users as u32);
    exhaustive(problem, cfg, |table| {
        let mut best = (f64::NEG_INFINITY, vec![1; users]);
        for s in 0..schedules {
            let assignment = decode(s as u128, patterns, users);
            let worst = assignment
                .iter()
                .enumerate()
                .map(|(k, &u)| table[k][u])
                .fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, assignment.iter().map(|u| u + 1).collect());
            }
        }
        best
    })
}

/// Surrogate objective recomputed term by term from dense equivalent phases.
pub fn reference_objective(problem: &Problem, point: &ProductPoint, mu: f64) -> f64 {
    let table = gamma_table(problem, &point.phi, &point.theta);
    let g: Vec<f64> = table
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(u, v)| point.schedule[[k, u]] * v)
                .sum()
        })
        .collect();
    let shift = g.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = g.iter().map(|gk| (-(gk - shift) / mu).exp()).sum();
    shift - mu * sum.ln()
}

fn offset(point: &ProductPoint, dir: &TangentTriple, s: f64) -> ProductPoint {
    ProductPoint {
        phi: point
            .phi
            .iter()
            .zip(&dir.d_phi)
            .map(|(p, d)| p + d * s)
            .collect(),
        theta: point
            .theta
            .iter()
            .zip(&dir.d_theta)
            .map(|(t, d)| t + d * s)
            .collect(),
        schedule: &point.schedule + &(&dir.d_x * s),
    }
}

/// Central difference `(f(p + h d) - f(p - h d)) / 2h` in the ambient space.
pub fn fd_directional<F>(f: F, point: &ProductPoint, direction: &TangentTriple, step: f64) -> f64
where
    F: Fn(&ProductPoint) -> f64,
{
    let plus = f(&offset(point, direction, step));
    let minus = f(&offset(point, direction, -step));
    (plus - minus) / (2.0 * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    pub finite_difference: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

/// Compares `Re(g^H d)` from [`Problem::egrad`] against a finite difference of
/// [`reference_objective`].
pub fn check_gradient(
    problem: &Problem,
    point: &ProductPoint,
    mu: f64,
    direction: &TangentTriple,
    step: f64,
) -> GradientCheck {
    let predicted = problem.egrad(point, mu).inner(direction);
    let finite_difference = fd_directional(
        |p| reference_objective(problem, p, mu),
        point,
        direction,
        step,
    );
    let scale = predicted
        .abs()
        .max(finite_difference.abs())
        .max(f64::MIN_POSITIVE);
    GradientCheck {
        finite_difference,
        predicted,
        relative_error: (finite_difference - predicted).abs() / scale,
    }
}

/// One factor-restricted gradient check on a random instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCase {
    pub instance: usize,
    pub m: usize,
    pub n: usize,
    pub users: usize,
    /// `"phi"`, `"theta"` or `"schedule"`.
    pub factor: &'static str,
    pub check: GradientCheck,
}

pub fn random_angles(rng: &mut ChaCha8Rng) -> ArrayAngles {
    ArrayAngles {
        azimuth: rng.random_range(-3.0..3.0),
        elevation: rng.random_range(0.0..1.5),
    }
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))
        .collect()
}

fn random_ambient(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Random scenario with `M <= max_m`, `N <= max_n`, `1 <= K <= max_users`,
/// its problem, and a random interior point.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_m: usize,
    max_n: usize,
    max_users: usize,
) -> Result<(Scenario, Problem, ProductPoint)> {
    let geom = loop {
        let mr = rng.random_range(1..=max_m);
        let mc = rng.random_range(1..=max_m / mr);
        let nr = rng.random_range(1..=mr);
        let nc = rng.random_range(1..=mc);
        if nr * nc <= max_n {
            break MisGeometry::new(mr, mc, nr, nc)?;
        }
    };
    let users = (0..rng.random_range(1..=max_users))
        .map(|_| User {
            angles: random_angles(rng),
            iota: rng.random_range(0.005..0.02),
        })
        .collect();
    let arrival = random_angles(rng);
    let scenario = Scenario::new(geom, arrival, users)?;
    let problem = Problem::new(&scenario)?;
    let mut schedule = Array2::from_shape_fn((problem.users(), problem.patterns()), |_| {
        rng.random_range(0.05..1.0)
    });
    for mut row in schedule.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    let point = ProductPoint {
        phi: random_unit(rng, geom.ms1_len()),
        theta: random_unit(rng, geom.ms2_len()),
        schedule,
    };
    Ok((scenario, problem, point))
}

/// Finite-difference checks of every gradient factor on `instances` random
/// instances (`M <= 16`, `N <= 4`, `K <= 4`), with `mu` at half the largest
/// scheduled SNR.
pub fn gradient_suite(seed: u64, instances: usize, step: f64) -> Result<Vec<GradientCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(3 * instances);
    for instance in 0..instances {
        let (_, problem, point) = random_instance(&mut rng, 16, 4, 4)?;
        let g = problem.evaluate(&point).g;
        let mu = 0.5 * g.iter().copied().fold(0.0, f64::max);
        let zeros = |len| vec![Complex64::new(0.0, 0.0); len];
        let (m, n) = (point.phi.len(), point.theta.len());
        let dims = point.schedule.dim();
        let dirs = [
            (
                "phi",
                TangentTriple {
                    d_phi: random_ambient(&mut rng, m),
                    d_theta: zeros(n),
                    d_x: Array2::zeros(dims),
                },
            ),
            (
                "theta",
                TangentTriple {
                    d_phi: zeros(m),
                    d_theta: random_ambient(&mut rng, n),
                    d_x: Array2::zeros(dims),
                },
            ),
            (
                "schedule",
                TangentTriple {
                    d_phi: zeros(m),
                    d_theta: zeros(n),
                    d_x: Array2::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0)),
                },
            ),
        ];
        for (factor, dir) in dirs {
            cases.push(GradientCase {
                instance,
                m,
                n,
                users: problem.users(),
                factor,
                check: check_gradient(&problem, &point, mu, &dir, step),
            });
        }
    }
    Ok(cases)
}
