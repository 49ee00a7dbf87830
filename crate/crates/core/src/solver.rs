//! Riemannian conjugate gradient with a smoothing-parameter anneal.
//!
//! The outer loop shrinks `mu` geometrically; each inner loop maximizes the
//! log-sum-exp surrogate over the product manifold with Polak-Ribiere (PR+)
//! directions, vector transport, Armijo backtracking along a single shared step,
//! and the factor retractions. The relaxed schedule is thresholded to one-hot
//! rows at the end and the true worst-case SNR is reported.
//!
//! Internally the cost being minimized is `-f`; gradients passed to
//! [`pr_beta`] and [`conjugate_direction`] are gradients of that cost.

use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::manifolds::{
    circle_inner, frobenius_inner, grad_norm, project_tangent, retract, transport, TangentTriple,
};
use crate::objective::{lse, Problem, ProductPoint, SmoothingState};

/// How the first smoothing parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MuInit {
    /// `max_k g_k - min_k g_k + 1e-3 max_k g_k` at the starting point.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub mu_init: MuInit,
    /// Anneal rate, `mu <- mu / delta`.
    pub delta: f64,
    /// Absolute floor for `mu`; `None` means `1e-6` times the largest initial `g_k`.
    pub mu_min: Option<f64>,
    /// Stop annealing once `mu ln K` drops below this fraction of the worst-case SNR.
    pub gap_rel_tol: f64,
    pub inner_grad_tol: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    /// Length of the first trial step of each inner loop, measured in the product metric.
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Clamp Polak-Ribiere coefficients at zero.
    pub pr_plus: bool,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu_init: MuInit::Auto,
            delta: 2.0,
            mu_min: None,
            gap_rel_tol: 1e-4,
            inner_grad_tol: 1e-6,
            max_inner_iters: 300,
            max_outer_iters: 30,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            max_backtracks: 50,
            pr_plus: true,
            restarts: 8,
            seed: 0,
        }
    }
}

impl SolverConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        fn bad(key: &'static str, reason: String) -> Result<()> {
            Err(Error::InvalidConfig { key, reason })
        }
        if let MuInit::Fixed(mu) = self.mu_init {
            if !(mu.is_finite() && mu > 0.0) {
                return bad("mu_init", format!("must be positive, got {mu}"));
            }
        }
        if !(self.delta.is_finite() && self.delta > 1.0) {
            return bad("delta", format!("must exceed 1, got {}", self.delta));
        }
        if let Some(m) = self.mu_min {
            if !(m.is_finite() && m > 0.0) {
                return bad("mu_min", format!("must be positive, got {m}"));
            }
        }
        if !(self.gap_rel_tol >= 0.0) {
            return bad(
                "gap_rel_tol",
                format!("must be non-negative, got {}", self.gap_rel_tol),
            );
        }
        if !(self.inner_grad_tol.is_finite() && self.inner_grad_tol > 0.0) {
            return bad(
                "inner_grad_tol",
                format!("must be positive, got {}", self.inner_grad_tol),
            );
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return bad(
                "armijo_c1",
                format!("must lie in (0, 1), got {}", self.armijo_c1),
            );
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad(
                "backtrack_factor",
                format!("must lie in (0, 1), got {}", self.backtrack_factor),
            );
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return bad(
                "initial_step",
                format!("must be positive, got {}", self.initial_step),
            );
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters", "must be at least 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts", "must be at least 1".into());
        }
        Ok(())
    }
}

/// One accepted inner iterate (inner index 0 is the start of an inner loop).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner: usize,
    pub mu: f64,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    /// Binary `K x U` schedule.
    pub schedule: Array2<f64>,
    pub per_user_snr: Vec<f64>,
    pub worst_snr: f64,
    pub worst_snr_db: f64,
    /// 1-based shift position serving each user.
    pub selected_patterns: Vec<usize>,
    pub trace: Vec<IterationRecord>,
    pub mu_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub evaluations: usize,
    /// Index of the winning start (warm starts first, then random restarts).
    pub start_index: usize,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Equality ignores `wall_time`.
impl PartialEq for SolveReport {
    fn eq(&self, o: &Self) -> bool {
        self.phi == o.phi
            && self.theta == o.theta
            && self.schedule == o.schedule
            && self.per_user_snr == o.per_user_snr
            && self.worst_snr == o.worst_snr
            && self.worst_snr_db == o.worst_snr_db
            && self.selected_patterns == o.selected_patterns
            && self.trace == o.trace
            && self.mu_trace == o.mu_trace
            && self.outer_iterations == o.outer_iterations
            && self.inner_iterations == o.inner_iterations
            && self.evaluations == o.evaluations
            && self.start_index == o.start_index
            && self.seed == o.seed
    }
}

impl SolveReport {
    pub fn users(&self) -> usize {
        self.per_user_snr.len()
    }

    /// True when the surrogate never decreases between accepted iterates of
    /// the same inner loop.
    pub fn trace_is_monotone(&self) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[0].outer != w[1].outer || w[1].objective >= w[0].objective)
    }

    /// The binary point as a product-manifold point.
    pub fn point(&self) -> ProductPoint {
        ProductPoint {
            phi: self.phi.clone(),
            theta: self.theta.clone(),
            schedule: self.schedule.clone(),
        }
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Per-factor Polak-Ribiere coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas {
    pub phi: f64,
    pub theta: f64,
    pub schedule: f64,
}

/// Below this squared norm the previous gradient triggers a steepest-descent restart.
const BETA_GUARD: f64 = 1e-30;

fn pr_ratio(num: f64, den: f64, pr_plus: bool) -> f64 {
    if den < BETA_GUARD {
        return 0.0;
    }
    let beta = num / den;
    if pr_plus {
        beta.max(0.0)
    } else {
        beta
    }
}

/// `beta = <g_new, g_new - T(g_old)> / <g_old, g_old>` per factor, clamped at zero.
pub fn pr_beta(
    g_new: &TangentTriple,
    g_old: &TangentTriple,
    g_old_transported: &TangentTriple,
) -> Betas {
    pr_beta_with(g_new, g_old, g_old_transported, true)
}

fn pr_beta_with(
    g_new: &TangentTriple,
    g_old: &TangentTriple,
    g_old_tr: &TangentTriple,
    pr_plus: bool,
) -> Betas {
    let phi_num =
        circle_inner(&g_new.d_phi, &g_new.d_phi) - circle_inner(&g_new.d_phi, &g_old_tr.d_phi);
    let theta_num = circle_inner(&g_new.d_theta, &g_new.d_theta)
        - circle_inner(&g_new.d_theta, &g_old_tr.d_theta);
    let x_num =
        frobenius_inner(&g_new.d_x, &g_new.d_x) - frobenius_inner(&g_new.d_x, &g_old_tr.d_x);
    Betas {
        phi: pr_ratio(phi_num, circle_inner(&g_old.d_phi, &g_old.d_phi), pr_plus),
        theta: pr_ratio(
            theta_num,
            circle_inner(&g_old.d_theta, &g_old.d_theta),
            pr_plus,
        ),
        schedule: pr_ratio(x_num, frobenius_inner(&g_old.d_x, &g_old.d_x), pr_plus),
    }
}

/// `-g + beta * prev` per factor; falls back to `-g` without a predecessor or
/// when the combination is not a descent direction.
pub fn conjugate_direction(
    g: &TangentTriple,
    prev: Option<&TangentTriple>,
    betas: Betas,
) -> TangentTriple {
    let steepest = g.scaled(-1.0);
    let Some(prev) = prev else {
        return steepest;
    };
    let dir = TangentTriple {
        d_phi: steepest
            .d_phi
            .iter()
            .zip(&prev.d_phi)
            .map(|(s, p)| s + p * betas.phi)
            .collect(),
        d_theta: steepest
            .d_theta
            .iter()
            .zip(&prev.d_theta)
            .map(|(s, p)| s + p * betas.theta)
            .collect(),
        d_x: &steepest.d_x + &(&prev.d_x * betas.schedule),
    };
    if dir.inner(&steepest) <= 0.0 {
        steepest
    } else {
        dir
    }
}

/// Armijo backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub c1: f64,
    pub factor: f64,
    pub max_backtracks: usize,
}

impl From<&SolverConfig> for LineSearchParams {
    fn from(c: &SolverConfig) -> Self {
        Self {
            c1: c.armijo_c1,
            factor: c.backtrack_factor,
            max_backtracks: c.max_backtracks,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    /// Accepted step, or 0 when the search stalled.
    pub alpha: f64,
    pub point: ProductPoint,
    pub value: f64,
    pub evaluations: usize,
    pub stalled: bool,
}

/// Backtracking search for the largest `alpha0 * factor^j` with
/// `f(R(x, alpha d)) >= f(x) + c1 alpha slope`, where `slope = <grad f, d> > 0`.
///
/// Retractions that hit a degenerate entry count as rejected trials.
pub fn line_search<F>(
    objective: F,
    point: &ProductPoint,
    value: f64,
    dir: &TangentTriple,
    slope: f64,
    alpha0: f64,
    params: LineSearchParams,
) -> LineSearchOutcome
where
    F: Fn(&ProductPoint) -> f64,
{
    if dir.is_zero() {
        return LineSearchOutcome {
            alpha: alpha0,
            point: point.clone(),
            value,
            evaluations: 0,
            stalled: false,
        };
    }
    let mut alpha = alpha0;
    let mut evaluations = 0;
    for _ in 0..=params.max_backtracks {
        if let Ok(trial) = retract(point, dir, alpha) {
            let trial_value = objective(&trial);
            evaluations += 1;
            if trial_value >= value + params.c1 * alpha * slope {
                return LineSearchOutcome {
                    alpha,
                    point: trial,
                    value: trial_value,
                    evaluations,
                    stalled: false,
                };
            }
        }
        alpha *= params.factor;
    }
    LineSearchOutcome {
        alpha: 0.0,
        point: point.clone(),
        value,
        evaluations,
        stalled: true,
    }
}

/// Result of one fixed-`mu` inner loop.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub point: ProductPoint,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stalled: bool,
}

fn riemannian_cost_grad(problem: &Problem, point: &ProductPoint, mu: f64) -> (f64, TangentTriple) {
    let eval = problem.evaluate(point);
    let f = lse(&eval.g, mu);
    let egrad = problem.egrad_from(point, &eval, mu);
    let rgrad = project_tangent(point, &egrad).expect("dimensions checked by caller");
    (f, rgrad.scaled(-1.0))
}

/// RCG at fixed `mu` until the Riemannian gradient norm falls below tolerance.
///
/// Accepted iterates are appended to `trace` under the given outer index.
pub fn inner_solve(
    problem: &Problem,
    start: ProductPoint,
    mu: f64,
    outer: usize,
    config: &SolverConfig,
    trace: &mut Vec<IterationRecord>,
) -> InnerOutcome {
    let params = LineSearchParams::from(config);
    let objective = |p: &ProductPoint| problem.lse_objective(p, mu);
    let mut point = start;
    let (mut value, mut grad) = riemannian_cost_grad(problem, &point, mu);
    let mut evaluations = 1;
    let mut gnorm = grad_norm(&grad);
    trace.push(IterationRecord {
        outer,
        inner: 0,
        mu,
        objective: value,
        grad_norm: gnorm,
    });
    let mut outcome = InnerOutcome {
        point: point.clone(),
        iterations: 0,
        evaluations,
        converged: gnorm < config.inner_grad_tol,
        stalled: false,
    };
    if outcome.converged {
        return outcome;
    }

    let mut dir = conjugate_direction(
        &grad,
        None,
        Betas {
            phi: 0.0,
            theta: 0.0,
            schedule: 0.0,
        },
    );
    let mut alpha0 = config.initial_step / grad_norm(&dir);
    let mut consecutive_stalls = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_inner_iters {
        let slope = -grad.inner(&dir);
        let ls = line_search(objective, &point, value, &dir, slope, alpha0, params);
        evaluations += ls.evaluations;
        if ls.stalled {
            consecutive_stalls += 1;
            if consecutive_stalls >= 2 {
                break;
            }
            // Retry once along steepest descent.
            dir = grad.scaled(-1.0);
            alpha0 = config.initial_step / grad_norm(&dir);
            continue;
        }
        consecutive_stalls = 0;
        iterations += 1;

        let (new_value, new_grad) = riemannian_cost_grad(problem, &ls.point, mu);
        evaluations += 1;
        point = ls.point;
        value = new_value;
        gnorm = grad_norm(&new_grad);
        trace.push(IterationRecord {
            outer,
            inner: iterations,
            mu,
            objective: value,
            grad_norm: gnorm,
        });
        if gnorm < config.inner_grad_tol {
            converged = true;
            break;
        }

        let grad_tr = transport(&point, &grad).expect("dimensions fixed");
        let dir_tr = transport(&point, &dir).expect("dimensions fixed");
        let betas = pr_beta_with(&new_grad, &grad, &grad_tr, config.pr_plus);
        let new_dir = conjugate_direction(&new_grad, Some(&dir_tr), betas);

        let new_slope = -new_grad.inner(&new_dir);
        let guess = 2.0 * ls.alpha * slope / new_slope;
        alpha0 = if guess.is_finite() && guess > 0.0 {
            guess
        } else {
            config.initial_step / grad_norm(&new_dir)
        };
        grad = new_grad;
        dir = new_dir;
    }

    outcome.point = point;
    outcome.iterations = iterations;
    outcome.evaluations = evaluations;
    outcome.converged = converged;
    outcome.stalled = consecutive_stalls >= 2;
    outcome
}

/// Row-argmax one-hot rounding; ties go to the smallest pattern index.
pub fn threshold_schedule(x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.dim());
    for (k, row) in x.rows().into_iter().enumerate() {
        let mut best = 0;
        for (u, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = u;
            }
        }
        out[[k, best]] = 1.0;
    }
    out
}

fn random_circle(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Random phases on both circles with the uniform schedule `1/U`.
pub fn random_start(problem: &Problem, seed: u64, restart: usize) -> ProductPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let geom = problem.geometry();
    let mut point = ProductPoint::identity(
        geom.ms1_len(),
        geom.ms2_len(),
        problem.users(),
        problem.patterns(),
    );
    point.phi = random_circle(&mut rng, geom.ms1_len());
    point.theta = random_circle(&mut rng, geom.ms2_len());
    point
}

struct Checkpoint {
    point: ProductPoint,
    per_user: Vec<f64>,
    worst: f64,
}

fn checkpoint(problem: &Problem, point: &ProductPoint) -> Checkpoint {
    let binary = ProductPoint {
        phi: point.phi.clone(),
        theta: point.theta.clone(),
        schedule: threshold_schedule(&point.schedule),
    };
    let per_user = problem.evaluate(&binary).g;
    let worst = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    Checkpoint {
        point: binary,
        per_user,
        worst,
    }
}

/// Full anneal from one starting point.
///
/// The returned binary point is the best thresholded checkpoint over the
/// start and the end of every inner loop.
pub fn solve_from(
    problem: &Problem,
    start: ProductPoint,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    problem.check_dims(&start)?;
    start.check_feasible(1e-9)?;
    let timer = Instant::now();

    let g0 = problem.evaluate(&start).g;
    let g_max = g0
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let g_min = g0.iter().copied().fold(f64::INFINITY, f64::min);
    let mu0 = match config.mu_init {
        MuInit::Auto => (g_max - g_min) + 1e-3 * g_max,
        MuInit::Fixed(mu) => mu,
    };
    let mu_min = config.mu_min.unwrap_or(1e-6 * g_max).min(mu0);
    let mut smoothing = SmoothingState::new(mu0, config.delta, mu_min)?;
    let ln_k = (problem.users() as f64).ln();

    let mut best = checkpoint(problem, &start);
    let mut trace = Vec::new();
    let mut mu_trace = Vec::new();
    let mut point = start;
    let mut inner_iterations = 0;
    let mut evaluations = 1;
    let mut outer_iterations = 0;

    while outer_iterations < config.max_outer_iters {
        let mu = smoothing.mu;
        mu_trace.push(mu);
        let inner = inner_solve(problem, point, mu, outer_iterations, config, &mut trace);
        outer_iterations += 1;
        inner_iterations += inner.iterations;
        evaluations += inner.evaluations;
        point = inner.point;

        let cp = checkpoint(problem, &point);
        if cp.worst > best.worst {
            best = cp;
        }
        let relaxed_min = problem.min_snr(&point);
        if mu * ln_k < config.gap_rel_tol * relaxed_min || !smoothing.advance() {
            break;
        }
    }

    let selected_patterns = best
        .point
        .schedule
        .rows()
        .into_iter()
        .map(|row| row.iter().position(|&x| x == 1.0).expect("one-hot") + 1)
        .collect();
    Ok(SolveReport {
        phi: best.point.phi,
        theta: best.point.theta,
        schedule: best.point.schedule,
        worst_snr_db: to_db(best.worst),
        worst_snr: best.worst,
        per_user_snr: best.per_user,
        selected_patterns,
        trace,
        mu_trace,
        outer_iterations,
        inner_iterations,
        evaluations,
        start_index: 0,
        seed: config.seed,
        wall_time: timer.elapsed(),
    })
}

/// Multi-start solve: every warm start plus `config.restarts` random starts,
/// run in parallel; the best worst-case SNR wins, ties to the lowest start index.
pub fn solve_problem(
    problem: &Problem,
    config: &SolverConfig,
    warm_starts: &[ProductPoint],
) -> Result<SolveReport> {
    config.validate()?;
    let timer = Instant::now();
    let starts: Vec<ProductPoint> = warm_starts
        .iter()
        .cloned()
        .chain((0..config.restarts).map(|r| random_start(problem, config.seed, r)))
        .collect();
    let reports: Vec<SolveReport> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| {
            solve_from(problem, start, config).map(|mut r| {
                r.start_index = i;
                r
            })
        })
        .collect::<Result<_>>()?;
    let mut best = reports
        .into_iter()
        .reduce(|a, b| if b.worst_snr > a.worst_snr { b } else { a })
        .expect("at least one start");
    best.wall_time = timer.elapsed();
    Ok(best)
}

/// Solves the max-min scheduling problem for a scenario.
pub fn solve(scenario: &Scenario, config: &SolverConfig) -> Result<SolveReport> {
    let problem = Problem::new(scenario)?;
    solve_problem(&problem, config, &[])
}

/// Embeds a single-layer solution into a two-layer geometry: MS 1 carries the
/// combined phases, MS 2 is all ones, the schedule is uniform.
pub fn lift_single_layer(sms: &SolveReport, problem: &Problem) -> Result<ProductPoint> {
    let geom = problem.geometry();
    crate::error::check_len("single-layer phases", geom.ms1_len(), sms.phi.len())?;
    crate::error::check_len("single-layer phases", geom.ms1_len(), sms.theta.len())?;
    let mut point = ProductPoint::identity(
        geom.ms1_len(),
        geom.ms2_len(),
        problem.users(),
        problem.patterns(),
    );
    point.phi = sms.phi.iter().zip(&sms.theta).map(|(p, t)| p * t).collect();
    Ok(point)
}
