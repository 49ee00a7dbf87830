//! Complex-circle and multinomial manifold primitives.
//!
//! The phase vectors live on complex circle manifolds `{z : |z_i| = 1}` with the
//! real inner product `Re(a^H b)`. The relaxed schedule lives on the product of
//! open simplices (each row strictly positive and summing to one) with the
//! Euclidean/Frobenius metric; its tangent vectors are matrices whose rows sum
//! to zero, and vector transport on it is the identity.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::objective::ProductPoint;

/// Floor applied to simplex projections so the schedule stays in the open simplex.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

/// Below this modulus an entry of `base + alpha t` cannot be normalized.
pub const DEGENERATE_MODULUS: f64 = 1e-14;

/// A vector in the (ambient or tangent) space of the product manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentTriple {
    pub d_phi: Vec<Complex64>,
    pub d_theta: Vec<Complex64>,
    pub d_x: Array2<f64>,
}

impl TangentTriple {
    pub fn zeros_like(point: &ProductPoint) -> Self {
        Self {
            d_phi: vec![Complex64::new(0.0, 0.0); point.phi.len()],
            d_theta: vec![Complex64::new(0.0, 0.0); point.theta.len()],
            d_x: Array2::zeros(point.schedule.dim()),
        }
    }

    /// Product-metric inner product: sum of the three factor inner products.
    pub fn inner(&self, other: &Self) -> f64 {
        circle_inner(&self.d_phi, &other.d_phi)
            + circle_inner(&self.d_theta, &other.d_theta)
            + frobenius_inner(&self.d_x, &other.d_x)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            d_phi: self.d_phi.iter().map(|z| z * s).collect(),
            d_theta: self.d_theta.iter().map(|z| z * s).collect(),
            d_x: &self.d_x * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.d_phi
            .iter()
            .chain(&self.d_theta)
            .all(|z| z.norm_sqr() == 0.0)
            && self.d_x.iter().all(|&x| x == 0.0)
    }
}

/// `Re(a^H b)`.
pub fn circle_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn frobenius_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `(|d_phi|^2 + |d_theta|^2 + |d_X|_F^2)^(1/2)`.
pub fn grad_norm(t: &TangentTriple) -> f64 {
    t.inner(t).sqrt()
}

/// Removes the component of `g` along `base`: `g - Re(g . conj(base)) . base`.
pub fn project_circle_tangent(base: &[Complex64], g: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len("tangent", base.len(), g.len())?;
    Ok(base
        .iter()
        .zip(g)
        .map(|(b, gi)| gi - b * (gi * b.conj()).re)
        .collect())
}

/// Subtracts each row's mean so every row sums to zero.
pub fn project_multinomial_tangent(g: &Array2<f64>) -> Array2<f64> {
    let mut out = g.clone();
    let cols = g.ncols() as f64;
    for mut row in out.rows_mut() {
        let mean = row.sum() / cols;
        row.mapv_inplace(|x| x - mean);
    }
    out
}

/// Elementwise normalization of `base + alpha t`.
pub fn retract_circle(base: &[Complex64], t: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
    check_len("tangent", base.len(), t.len())?;
    base.iter()
        .zip(t)
        .enumerate()
        .map(|(index, (b, ti))| {
            let z = b + ti * alpha;
            let magnitude = z.norm();
            if magnitude < DEGENERATE_MODULUS {
                Err(Error::DegenerateRetraction { index, magnitude })
            } else {
                Ok(z / magnitude)
            }
        })
        .collect()
}

/// Euclidean projection onto the probability simplex (sort-and-threshold),
/// followed by flooring at [`SIMPLEX_FLOOR`].
///
/// The floor's excess mass is taken from the largest entry, so the output
/// sums to one and every entry is at least the floor.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if x - candidate > 0.0 {
            threshold = candidate;
        }
    }
    let mut out: Vec<f64> = y
        .iter()
        .map(|&v| (v - threshold).max(SIMPLEX_FLOOR))
        .collect();
    let excess = out.iter().sum::<f64>() - 1.0;
    let (imax, _) = out
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    out[imax] -= excess;
    out
}

/// Row-wise simplex projection of `X + alpha D`.
pub fn retract_multinomial(x: &Array2<f64>, d: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let mut out = x + &(d * alpha);
    for mut row in out.rows_mut() {
        let projected = project_simplex(row.as_slice().expect("standard layout"));
        row.iter_mut().zip(projected).for_each(|(r, p)| *r = p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Circle,
    Multinomial,
}

/// Moves a circle tangent vector into the tangent space at `new_base`.
pub fn transport_circle(new_base: &[Complex64], t: &[Complex64]) -> Result<Vec<Complex64>> {
    project_circle_tangent(new_base, t)
}

/// Identity transport on the multinomial factor.
pub fn transport_multinomial(t: &Array2<f64>) -> Array2<f64> {
    t.clone()
}

/// Riemannian gradient: each Euclidean factor projected onto its tangent space.
pub fn project_tangent(point: &ProductPoint, egrad: &TangentTriple) -> Result<TangentTriple> {
    Ok(TangentTriple {
        d_phi: project_circle_tangent(&point.phi, &egrad.d_phi)?,
        d_theta: project_circle_tangent(&point.theta, &egrad.d_theta)?,
        d_x: project_multinomial_tangent(&egrad.d_x),
    })
}

/// Transports a tangent vector of the previous point to `point`.
pub fn transport(point: &ProductPoint, t: &TangentTriple) -> Result<TangentTriple> {
    Ok(TangentTriple {
        d_phi: transport_circle(&point.phi, &t.d_phi)?,
        d_theta: transport_circle(&point.theta, &t.d_theta)?,
        d_x: transport_multinomial(&t.d_x),
    })
}

/// Retraction of the product manifold with one shared step size.
pub fn retract(point: &ProductPoint, dir: &TangentTriple, alpha: f64) -> Result<ProductPoint> {
    Ok(ProductPoint {
        phi: retract_circle(&point.phi, &dir.d_phi, alpha)?,
        theta: retract_circle(&point.theta, &dir.d_theta, alpha)?,
        schedule: retract_multinomial(&point.schedule, &dir.d_x, alpha),
    })
}
