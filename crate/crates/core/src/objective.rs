//! Smoothed max-min objective over the product manifold and its Euclidean gradients.
//!
//! For a point `(phi, theta, X)` the per-pattern SNRs are
//! `gamma[k, u] = iota_k |q[k, u]|^2` with `q[k, u] = (theta_bar_u . phi)^T c_k`,
//! the scheduled SNRs are `g_k = sum_u X[k, u] gamma[k, u]`, and the surrogate is
//! the log-sum-exp soft minimum `f = -mu ln sum_k exp(-g_k / mu)`, which obeys
//! `f <= min_k g_k <= f + mu ln K`.
//!
//! Gradients of real functions of complex vectors follow the convention
//! `d/de f(z + e t) |_0 = Re(g^H t)`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{cascaded_channels, CascadedChannel, Scenario};
use crate::error::{check_len, Error, Result};
use crate::geometry::{MisGeometry, SelectionOperator};
use crate::manifolds::TangentTriple;

/// Optimization state: MS 1 phases, MS 2 phases and the relaxed `K x U` schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductPoint {
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    pub schedule: Array2<f64>,
}

impl ProductPoint {
    /// Largest violation of the unit-modulus and row-stochastic constraints.
    pub fn feasibility_error(&self) -> f64 {
        let circle = self
            .phi
            .iter()
            .chain(&self.theta)
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        let rows = self
            .schedule
            .rows()
            .into_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let negative = self
            .schedule
            .iter()
            .map(|&x| (-x).max(0.0))
            .fold(0.0, f64::max);
        circle.max(rows).max(negative)
    }

    pub fn check_feasible(&self, tol: f64) -> Result<()> {
        let err = self.feasibility_error();
        if err > tol {
            return Err(Error::Infeasible(format!(
                "constraint violation {err:e} > {tol:e}"
            )));
        }
        if self.schedule.iter().any(|&x| x <= 0.0) {
            return Err(Error::Infeasible(
                "schedule entries must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// All-ones phases with a uniform schedule.
    pub fn identity(m: usize, n: usize, users: usize, patterns: usize) -> Self {
        Self {
            phi: vec![Complex64::new(1.0, 0.0); m],
            theta: vec![Complex64::new(1.0, 0.0); n],
            schedule: Array2::from_elem((users, patterns), 1.0 / patterns as f64),
        }
    }
}

/// Annealing state for the smoothing parameter: `mu <- mu / delta` down to `mu_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingState {
    pub mu: f64,
    pub delta: f64,
    pub mu_min: f64,
}

impl SmoothingState {
    pub fn new(mu: f64, delta: f64, mu_min: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidConfig {
                key: "mu_init",
                reason: format!("must be positive, got {mu}"),
            });
        }
        if !(delta.is_finite() && delta > 1.0) {
            return Err(Error::InvalidConfig {
                key: "delta",
                reason: format!("must exceed 1, got {delta}"),
            });
        }
        if !(mu_min.is_finite() && mu_min > 0.0) {
            return Err(Error::InvalidConfig {
                key: "mu_min",
                reason: format!("must be positive, got {mu_min}"),
            });
        }
        Ok(Self { mu, delta, mu_min })
    }

    /// Shrinks `mu` by `delta`; returns false once the result would fall below `mu_min`.
    pub fn advance(&mut self) -> bool {
        let next = self.mu / self.delta;
        if next < self.mu_min {
            return false;
        }
        self.mu = next;
        true
    }
}

/// Numerically stable soft minimum `-mu ln sum_k exp(-g_k / mu)`.
pub fn lse(g: &[f64], mu: f64) -> f64 {
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = g.iter().map(|&gk| (-(gk - g_min) / mu).exp()).sum();
    g_min - mu * s.ln()
}

/// Soft-min weights `v_k = exp(-g_k / mu) / sum_i exp(-g_i / mu)`.
pub fn softmin(g: &[f64], mu: f64) -> Vec<f64> {
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = g.iter().map(|&gk| (-(gk - g_min) / mu).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Per-point intermediate quantities shared by the objective and its gradients.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `q[k, u]`.
    pub q: Array2<Complex64>,
    /// `gamma[k, u] = iota_k |q[k, u]|^2`.
    pub gamma: Array2<f64>,
    /// Scheduled SNR per user.
    pub g: Vec<f64>,
}

/// Channels and selection operators for one scenario.
#[derive(Debug, Clone)]
pub struct Problem {
    geom: MisGeometry,
    channels: Vec<CascadedChannel>,
    selections: Vec<SelectionOperator>,
}

impl Problem {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        Self::from_parts(scenario.geom, cascaded_channels(scenario))
    }

    pub fn from_parts(geom: MisGeometry, channels: Vec<CascadedChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidConfig {
                key: "users",
                reason: "at least one user is required".into(),
            });
        }
        for ch in &channels {
            check_len("channel", geom.ms1_len(), ch.c.len())?;
        }
        Ok(Self {
            geom,
            selections: geom.selections(),
            channels,
        })
    }

    pub fn geometry(&self) -> &MisGeometry {
        &self.geom
    }
    pub fn channels(&self) -> &[CascadedChannel] {
        &self.channels
    }
    pub fn selections(&self) -> &[SelectionOperator] {
        &self.selections
    }
    pub fn users(&self) -> usize {
        self.channels.len()
    }
    pub fn patterns(&self) -> usize {
        self.selections.len()
    }

    pub fn check_dims(&self, point: &ProductPoint) -> Result<()> {
        check_len("phi", self.geom.ms1_len(), point.phi.len())?;
        check_len("theta", self.geom.ms2_len(), point.theta.len())?;
        check_len("schedule rows", self.users(), point.schedule.nrows())?;
        check_len("schedule cols", self.patterns(), point.schedule.ncols())
    }

    /// Computes `q`, `gamma` and the scheduled SNRs in `O(K (M + U N))`.
    pub fn evaluate(&self, point: &ProductPoint) -> Evaluation {
        let (k_len, u_len) = (self.users(), self.patterns());
        let mut q = Array2::zeros((k_len, u_len));
        let mut gamma = Array2::zeros((k_len, u_len));
        let mut g = vec![0.0; k_len];
        let mut w = vec![Complex64::new(0.0, 0.0); point.phi.len()];
        for (k, ch) in self.channels.iter().enumerate() {
            for ((wm, p), c) in w.iter_mut().zip(&point.phi).zip(&ch.c) {
                *wm = p * c;
            }
            let total: Complex64 = w.iter().sum();
            for (u, sel) in self.selections.iter().enumerate() {
                let correction: Complex64 = sel
                    .overlap_map()
                    .iter()
                    .zip(&point.theta)
                    .map(|(&m, t)| (t - 1.0) * w[m])
                    .sum();
                let quk = total + correction;
                let gk = ch.iota * quk.norm_sqr();
                q[[k, u]] = quk;
                gamma[[k, u]] = gk;
                g[k] += point.schedule[[k, u]] * gk;
            }
        }
        Evaluation { q, gamma, g }
    }

    /// `g_k`, the schedule-weighted SNR of user `k`.
    pub fn scheduled_snr(&self, point: &ProductPoint, k: usize) -> Result<f64> {
        if k >= self.users() {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: k,
                len: self.users(),
            });
        }
        self.check_dims(point)?;
        Ok(self.evaluate(point).g[k])
    }

    pub fn lse_objective(&self, point: &ProductPoint, mu: f64) -> f64 {
        lse(&self.evaluate(point).g, mu)
    }

    pub fn softmin_weights(&self, point: &ProductPoint, mu: f64) -> Vec<f64> {
        softmin(&self.evaluate(point).g, mu)
    }

    /// Worst scheduled SNR `min_k g_k` (the unsmoothed objective).
    pub fn min_snr(&self, point: &ProductPoint) -> f64 {
        self.evaluate(point)
            .g
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean gradients of the surrogate with respect to `phi`, `theta` and `X`.
    pub fn egrad(&self, point: &ProductPoint, mu: f64) -> TangentTriple {
        let eval = self.evaluate(point);
        self.egrad_from(point, &eval, mu)
    }

    /// Same as [`Problem::egrad`], reusing an existing evaluation at `point`.
    pub fn egrad_from(&self, point: &ProductPoint, eval: &Evaluation, mu: f64) -> TangentTriple {
        let (k_len, u_len) = (self.users(), self.patterns());
        let m_len = point.phi.len();
        let v = softmin(&eval.g, mu);

        let mut d_phi = vec![Complex64::new(0.0, 0.0); m_len];
        let mut d_theta = vec![Complex64::new(0.0, 0.0); point.theta.len()];
        let mut d_x = Array2::zeros((k_len, u_len));
        let theta_conj_minus_one: Vec<Complex64> =
            point.theta.iter().map(|t| t.conj() - 1.0).collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); m_len];

        for (k, ch) in self.channels.iter().enumerate() {
            // coef[u] = 2 iota_k v_k x[k,u] q[k,u]
            let coefs: Vec<Complex64> = (0..u_len)
                .map(|u| eval.q[[k, u]] * (2.0 * ch.iota * v[k] * point.schedule[[k, u]]))
                .collect();
            let coef_sum: Complex64 = coefs.iter().sum();
            acc.iter_mut().for_each(|a| *a = coef_sum);
            for (sel, &coef) in self.selections.iter().zip(&coefs) {
                for (n, &m) in sel.overlap_map().iter().enumerate() {
                    acc[m] += coef * theta_conj_minus_one[n];
                    d_theta[n] += coef * (point.phi[m] * ch.c[m]).conj();
                }
            }
            for ((d, a), c) in d_phi.iter_mut().zip(&acc).zip(&ch.c) {
                *d += a * c.conj();
            }
            for u in 0..u_len {
                d_x[[k, u]] = v[k] * eval.gamma[[k, u]];
            }
        }
        TangentTriple {
            d_phi,
            d_theta,
            d_x,
        }
    }
}
