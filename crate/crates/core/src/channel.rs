//! Line-of-sight channel model and per-user SNR under maximum-ratio transmission.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::geometry::MisGeometry;

/// Azimuth/elevation pair in radians. Elevation is measured from the array normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrayAngles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl ArrayAngles {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(-PI..=PI).contains(&azimuth) {
            return Err(Error::InvalidConfig {
                key: "azimuth",
                reason: format!("{azimuth} is outside [-pi, pi]"),
            });
        }
        if !(0.0..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::InvalidConfig {
                key: "elevation",
                reason: format!("{elevation} is outside [0, pi/2]"),
            });
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn broadside() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
        }
    }
}

/// A served direction with its linear SNR scale `iota = P_max * L / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct User {
    pub angles: ArrayAngles,
    pub iota: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub geom: MisGeometry,
    pub bs_rows: usize,
    pub bs_cols: usize,
    pub bs_spacing_over_lambda: f64,
    pub mis_arrival: ArrayAngles,
    pub users: Vec<User>,
}

impl Scenario {
    pub fn new(geom: MisGeometry, mis_arrival: ArrayAngles, users: Vec<User>) -> Result<Self> {
        let scenario = Self {
            geom,
            bs_rows: 4,
            bs_cols: 4,
            bs_spacing_over_lambda: 0.5,
            mis_arrival,
            users,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidConfig {
                key: "users",
                reason: "at least one user is required".into(),
            });
        }
        if let Some(u) = self
            .users
            .iter()
            .find(|u| !(u.iota.is_finite() && u.iota > 0.0))
        {
            return Err(Error::InvalidConfig {
                key: "iota",
                reason: format!("must be positive, got {}", u.iota),
            });
        }
        if self.bs_rows == 0 || self.bs_cols == 0 {
            return Err(Error::InvalidConfig {
                key: "bs_rows",
                reason: "BS array dimensions must be positive".into(),
            });
        }
        Ok(())
    }

    /// Number of BS antennas `L`.
    pub fn bs_len(&self) -> usize {
        self.bs_rows * self.bs_cols
    }

    /// Same users and arrival angles on a different surface geometry.
    pub fn with_geometry(&self, geom: MisGeometry) -> Self {
        Self {
            geom,
            ..self.clone()
        }
    }
}

/// Cascaded BS-MIS-user channel `c_k = diag(h_k) a_MIS` and its SNR scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    pub c: Vec<Complex64>,
    pub iota: f64,
}

impl CascadedChannel {
    pub fn new(c: Vec<Complex64>, iota: f64) -> Self {
        Self { c, iota }
    }
}

/// UPA response: entry `(r, c)` (0-based, row-major) is
/// `exp(j 2 pi d/lambda (r cos(az) sin(el) + c sin(az) sin(el)))`.
pub fn upa_steering(
    rows: usize,
    cols: usize,
    spacing_over_lambda: f64,
    angles: ArrayAngles,
) -> Vec<Complex64> {
    let k = 2.0 * PI * spacing_over_lambda;
    let sin_el = angles.elevation.sin();
    let row_step = k * angles.azimuth.cos() * sin_el;
    let col_step = k * angles.azimuth.sin() * sin_el;
    (0..rows)
        .flat_map(|r| {
            (0..cols)
                .map(move |c| Complex64::from_polar(1.0, r as f64 * row_step + c as f64 * col_step))
        })
        .collect()
}

pub fn cascaded_channels(scenario: &Scenario) -> Vec<CascadedChannel> {
    let g = &scenario.geom;
    let a_mis = upa_steering(
        g.m_rows(),
        g.m_cols(),
        g.spacing_over_lambda(),
        scenario.mis_arrival,
    );
    scenario
        .users
        .iter()
        .map(|user| {
            let h = upa_steering(g.m_rows(), g.m_cols(), g.spacing_over_lambda(), user.angles);
            let c = h.iter().zip(&a_mis).map(|(h, a)| h * a).collect();
            CascadedChannel::new(c, user.iota)
        })
        .collect()
}

/// `iota * |sum_m theta_bar[m] phi[m] c[m]|^2`.
pub fn snr(phi: &[Complex64], theta_bar: &[Complex64], chan: &CascadedChannel) -> Result<f64> {
    check_len("phi", chan.c.len(), phi.len())?;
    check_len("theta_bar", chan.c.len(), theta_bar.len())?;
    let q: Complex64 = phi
        .iter()
        .zip(theta_bar)
        .zip(&chan.c)
        .map(|((p, t), c)| p * t * c)
        .sum();
    Ok(chan.iota * q.norm_sqr())
}

/// SNR through the explicit BS-MIS-user path with an MRT beamformer.
///
/// Builds `G = a_MIS a_BS^T` for the given BS departure angles, the effective
/// channel `v = h_k^T diag(theta_bar) diag(phi) G`, the beamformer
/// `w = sqrt(P) v^H / |v|`, and returns `|v w|^2 / sigma^2` with `P = 1` and
/// `sigma^2 = L / iota_k`.
pub fn snr_full_path(
    phi: &[Complex64],
    theta_bar: &[Complex64],
    scenario: &Scenario,
    user_index: usize,
    bs_angles: ArrayAngles,
) -> Result<f64> {
    let g = &scenario.geom;
    let m = g.ms1_len();
    check_len("phi", m, phi.len())?;
    check_len("theta_bar", m, theta_bar.len())?;
    let user = scenario
        .users
        .get(user_index)
        .ok_or(Error::IndexOutOfRange {
            what: "user",
            index: user_index,
            len: scenario.users.len(),
        })?;

    let a_mis = upa_steering(
        g.m_rows(),
        g.m_cols(),
        g.spacing_over_lambda(),
        scenario.mis_arrival,
    );
    let a_bs = upa_steering(
        scenario.bs_rows,
        scenario.bs_cols,
        scenario.bs_spacing_over_lambda,
        bs_angles,
    );
    let h = upa_steering(g.m_rows(), g.m_cols(), g.spacing_over_lambda(), user.angles);
    let l = a_bs.len();

    let big_g: Vec<Vec<Complex64>> = a_mis
        .iter()
        .map(|am| a_bs.iter().map(|ab| am * ab).collect())
        .collect();
    let row: Vec<Complex64> = (0..m).map(|i| h[i] * theta_bar[i] * phi[i]).collect();
    let v: Vec<Complex64> = (0..l)
        .map(|col| (0..m).map(|i| row[i] * big_g[i][col]).sum())
        .collect();
    let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if v_norm == 0.0 {
        return Ok(0.0);
    }

    let p_max: f64 = 1.0;
    let sigma2 = l as f64 / user.iota;
    let w: Vec<Complex64> = v
        .iter()
        .map(|z| z.conj() * (p_max.sqrt() / v_norm))
        .collect();
    let y: Complex64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok(y.norm_sqr() / sigma2)
}
