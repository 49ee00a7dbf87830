#![allow(dead_code)]

use std::f64::consts::TAU;

use mis_core::{ArrayAngles, MisGeometry, Problem, ProductPoint, Scenario, TangentTriple, User};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))
        .collect()
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_angles(rng: &mut ChaCha8Rng) -> ArrayAngles {
    ArrayAngles::new(rng.random_range(-3.0..3.0), rng.random_range(0.0..1.5)).unwrap()
}

pub fn random_geometry(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> MisGeometry {
    loop {
        let mr = rng.random_range(1..=max_m);
        let mc = rng.random_range(1..=max_m / mr);
        let nr = rng.random_range(1..=mr);
        let nc = rng.random_range(1..=mc);
        if nr * nc <= max_n {
            return MisGeometry::new(mr, mc, nr, nc).unwrap();
        }
    }
}

pub fn random_scenario(rng: &mut ChaCha8Rng, geom: MisGeometry, users: usize) -> Scenario {
    let users = (0..users)
        .map(|_| User {
            angles: random_angles(rng),
            iota: rng.random_range(0.005..0.02),
        })
        .collect();
    let arrival = random_angles(rng);
    Scenario::new(geom, arrival, users).unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng, geom: MisGeometry, users: usize) -> Problem {
    Problem::new(&random_scenario(rng, geom, users)).unwrap()
}

pub fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.05..1.0));
    for mut row in x.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    x
}

pub fn random_point(rng: &mut ChaCha8Rng, p: &Problem) -> ProductPoint {
    let g = p.geometry();
    ProductPoint {
        phi: unit_vec(rng, g.ms1_len()),
        theta: unit_vec(rng, g.ms2_len()),
        schedule: random_stochastic(rng, p.users(), p.patterns()),
    }
}

/// Ambient direction with independent real and imaginary parts.
pub fn random_direction(rng: &mut ChaCha8Rng, point: &ProductPoint) -> TangentTriple {
    let (k, u) = point.schedule.dim();
    TangentTriple {
        d_phi: gauss_vec(rng, point.phi.len()),
        d_theta: gauss_vec(rng, point.theta.len()),
        d_x: Array2::from_shape_fn((k, u), |_| rng.random_range(-1.0..1.0)),
    }
}

/// Direction restricted to one factor: 0 = phi, 1 = theta, 2 = schedule.
pub fn factor_only(t: &TangentTriple, factor: usize) -> TangentTriple {
    let zero = |v: &[Complex64]| vec![Complex64::new(0.0, 0.0); v.len()];
    TangentTriple {
        d_phi: if factor == 0 {
            t.d_phi.clone()
        } else {
            zero(&t.d_phi)
        },
        d_theta: if factor == 1 {
            t.d_theta.clone()
        } else {
            zero(&t.d_theta)
        },
        d_x: if factor == 2 {
            t.d_x.clone()
        } else {
            Array2::zeros(t.d_x.dim())
        },
    }
}
