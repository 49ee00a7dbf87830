//! Scenario builders and sweeps comparing two-layer surfaces against the
//! single-layer baseline.
//!
//! Users sit on an arc of azimuths at a common elevation, each with the same
//! SNR scale. Defaults: azimuths spanning [-pi/3, pi/3] inclusive, elevation
//! pi/4, `iota = 0.01` (-20 dB reference), MIS illuminated from broadside.
//!
//! Note: published descriptions of this arc call the azimuth `psi_k` as well
//! as the elevation; here the arc always varies the azimuth.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ArrayAngles, Scenario, User};
use crate::error::{Error, Result};
use crate::geometry::MisGeometry;
use crate::objective::Problem;
use crate::oracle::gamma_table;
use crate::solver::{lift_single_layer, solve_problem, to_db, SolveReport, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcScenarioSpec {
    pub users: usize,
    pub azimuth_lo: f64,
    pub azimuth_hi: f64,
    pub elevation: f64,
    pub iota: f64,
    pub mis_arrival: ArrayAngles,
    pub geom: MisGeometry,
}

impl ArcScenarioSpec {
    pub fn new(geom: MisGeometry, users: usize) -> Self {
        Self {
            users,
            azimuth_lo: -FRAC_PI_3,
            azimuth_hi: FRAC_PI_3,
            elevation: FRAC_PI_4,
            iota: 0.01,
            mis_arrival: ArrayAngles::broadside(),
            geom,
        }
    }

    pub fn with_geometry(&self, geom: MisGeometry) -> Self {
        Self {
            geom,
            ..self.clone()
        }
    }

    pub fn with_users(&self, users: usize) -> Self {
        Self {
            users,
            ..self.clone()
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::InvalidConfig {
                key: "users",
                reason: "at least one user is required".into(),
            });
        }
        if !(self.azimuth_lo < self.azimuth_hi) {
            return Err(Error::InvalidConfig {
                key: "azimuth_lo",
                reason: format!(
                    "must be below azimuth_hi ({} >= {})",
                    self.azimuth_lo, self.azimuth_hi
                ),
            });
        }
        Ok(())
    }

    /// User azimuths, evenly spaced and including both endpoints.
    /// A single user sits at the midpoint.
    pub fn azimuths(&self) -> Vec<f64> {
        if self.users == 1 {
            return vec![0.5 * (self.azimuth_lo + self.azimuth_hi)];
        }
        let step = (self.azimuth_hi - self.azimuth_lo) / (self.users - 1) as f64;
        (0..self.users)
            .map(|k| {
                if k + 1 == self.users {
                    self.azimuth_hi
                } else {
                    self.azimuth_lo + step * k as f64
                }
            })
            .collect()
    }
}

pub fn build_arc_scenario(spec: &ArcScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let users = spec
        .azimuths()
        .into_iter()
        .map(|az| {
            Ok(User {
                angles: ArrayAngles::new(az, spec.elevation)?,
                iota: spec.iota,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(spec.geom, spec.mis_arrival, users)
}

/// Single-layer solve over the same MS 1 (`N = M`, one pattern).
pub fn sms_baseline(spec: &ArcScenarioSpec, config: &SolverConfig) -> Result<SolveReport> {
    let scenario = build_arc_scenario(&spec.with_geometry(spec.geom.to_single_layer()))?;
    solve_problem(&Problem::new(&scenario)?, config, &[])
}

/// Two-layer solve that also starts from the lifted single-layer solution,
/// so the result is never worse than `sms`.
pub fn mis_over_baseline(
    spec: &ArcScenarioSpec,
    sms: &SolveReport,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let problem = Problem::new(&build_arc_scenario(spec)?)?;
    let warm = lift_single_layer(sms, &problem)?;
    solve_problem(&problem, config, &[warm])
}

/// One configuration in a sweep. `n_rows = n_cols = 0` marks a single-layer surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub m_rows: usize,
    pub m_cols: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub users: usize,
    pub seed: u64,
    pub patterns: usize,
    pub baseline_snr: f64,
    pub mis_snr: f64,
    pub gain: f64,
    /// Both solver traces behind this cell are monotone within each inner loop.
    pub monotone: bool,
}

impl SweepCell {
    pub fn ms2_len(&self) -> usize {
        self.n_rows * self.n_cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub label: String,
    pub users: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn best_cell(&self) -> Option<&SweepCell> {
        self.cells
            .iter()
            .reduce(|a, b| if b.gain > a.gain { b } else { a })
    }
}

/// Gain of every MS 2 size `1x1 ..= M_r x M_c` over the single-layer surface of
/// the same MS 1. Cells are solved in parallel and returned row-major in
/// `(n_rows, n_cols)`.
pub fn sweep_ms2_sizes(spec: &ArcScenarioSpec, config: &SolverConfig) -> Result<SweepResult> {
    spec.validate()?;
    let (mr, mc) = (spec.geom.m_rows(), spec.geom.m_cols());
    let spacing = spec.geom.spacing_over_lambda();
    let sms = sms_baseline(spec, config)?;
    let sizes: Vec<(usize, usize)> = (1..=mr)
        .flat_map(|r| (1..=mc).map(move |c| (r, c)))
        .collect();
    let cells = sizes
        .into_par_iter()
        .map(|(nr, nc)| {
            let geom = MisGeometry::with_spacing(mr, mc, nr, nc, spacing)?;
            let (mis_snr, monotone) = if nr == mr && nc == mc {
                (sms.worst_snr, sms.trace_is_monotone())
            } else {
                let mis = mis_over_baseline(&spec.with_geometry(geom), &sms, config)?;
                (mis.worst_snr, mis.trace_is_monotone() && sms.trace_is_monotone())
            };
            Ok(SweepCell {
                m_rows: mr,
                m_cols: mc,
                n_rows: nr,
                n_cols: nc,
                users: spec.users,
                seed: config.seed,
                patterns: geom.pattern_count(),
                baseline_snr: sms.worst_snr,
                mis_snr,
                monotone,
                gain: if nr == mr && nc == mc {
                    1.0
                } else {
                    mis_snr / sms.worst_snr
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        label: format!("ms2-size M={mr}x{mc}"),
        users: spec.users,
        cells,
    })
}

/// Element allocation scheme under a fixed total `M + N = s^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AllocationScheme {
    /// MS 1 keeps its `s` rows and gives up columns; MS 2 has `s/2` columns.
    Columns,
    /// MS 1 keeps its `s` columns and gives up rows; MS 2 has `s/2` rows.
    Rows,
}

impl AllocationScheme {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::Columns),
            2 => Ok(Self::Rows),
            other => Err(Error::InvalidConfig {
                key: "scheme",
                reason: format!("must be 1 or 2, got {other}"),
            }),
        }
    }
}

/// `(m_rows, m_cols, n_rows, n_cols)` for each allocation step, starting from
/// the single-layer `s x s` surface (`N = 0`).
pub fn allocation_steps(
    total_elements: usize,
    scheme: AllocationScheme,
) -> Result<Vec<(usize, usize, usize, usize)>> {
    let side = (total_elements as f64).sqrt().round() as usize;
    if side * side != total_elements || side < 2 || side % 2 != 0 {
        return Err(Error::InvalidConfig {
            key: "total_elements",
            reason: format!("{total_elements} is not the square of an even side length"),
        });
    }
    let half = side / 2;
    Ok((0..=half)
        .map(|j| match scheme {
            AllocationScheme::Columns => (side, side - j, 2 * j, half),
            AllocationScheme::Rows => (side - j, side, half, 2 * j),
        })
        .map(|(mr, mc, nr, nc)| {
            if nr * nc == 0 {
                (mr, mc, 0, 0)
            } else {
                (mr, mc, nr, nc)
            }
        })
        .collect())
}

/// Worst-case SNR of each allocation step, normalized by the `N = 0` step.
pub fn sweep_allocation(
    total_elements: usize,
    scheme: AllocationScheme,
    spec: &ArcScenarioSpec,
    config: &SolverConfig,
) -> Result<SweepResult> {
    spec.validate()?;
    let spacing = spec.geom.spacing_over_lambda();
    let steps = allocation_steps(total_elements, scheme)?;
    let snrs = steps
        .par_iter()
        .map(|&(mr, mc, nr, nc)| {
            let geom = if nr == 0 {
                MisGeometry::with_spacing(mr, mc, mr, mc, spacing)?
            } else {
                MisGeometry::with_spacing(mr, mc, nr, nc, spacing)?
            };
            let problem = Problem::new(&build_arc_scenario(&spec.with_geometry(geom))?)?;
            let report = solve_problem(&problem, config, &[])?;
            Ok((report.worst_snr, geom.pattern_count(), report.trace_is_monotone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = snrs[0].0;
    let cells = steps
        .iter()
        .zip(&snrs)
        .enumerate()
        .map(|(i, (&(mr, mc, nr, nc), &(snr, patterns, monotone)))| SweepCell {
            m_rows: mr,
            m_cols: mc,
            n_rows: nr,
            n_cols: nc,
            users: spec.users,
            seed: config.seed,
            patterns,
            baseline_snr: baseline,
            mis_snr: snr,
            gain: if i == 0 { 1.0 } else { snr / baseline },
            monotone: monotone && snrs[0].2,
        })
        .collect();
    let tag = match scheme {
        AllocationScheme::Columns => 1,
        AllocationScheme::Rows => 2,
    };
    Ok(SweepResult {
        label: format!("allocation total={total_elements} scheme={tag}"),
        users: spec.users,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsersSweepRow {
    pub label: String,
    pub geom: MisGeometry,
    pub patterns: usize,
    pub users: usize,
    pub worst_snr: f64,
    pub worst_snr_db: f64,
    pub monotone: bool,
}

/// The 1D (1x64 over 1x36) and 2D (8x8 over 6x6) configurations.
pub fn default_1d2d_geometries() -> Vec<(String, MisGeometry)> {
    vec![
        (
            "1D".to_string(),
            MisGeometry::new(1, 64, 1, 36).expect("valid"),
        ),
        (
            "2D".to_string(),
            MisGeometry::new(8, 8, 6, 6).expect("valid"),
        ),
    ]
}

/// Worst-case SNR versus user count for each labelled geometry.
pub fn sweep_users_1d2d(
    geometries: &[(String, MisGeometry)],
    user_counts: &[usize],
    template: &ArcScenarioSpec,
    config: &SolverConfig,
) -> Result<Vec<UsersSweepRow>> {
    let jobs: Vec<(&String, MisGeometry, usize)> = geometries
        .iter()
        .flat_map(|(label, g)| user_counts.iter().map(move |&k| (label, *g, k)))
        .collect();
    jobs.into_par_iter()
        .map(|(label, geom, users)| {
            let spec = template.with_geometry(geom).with_users(users);
            let problem = Problem::new(&build_arc_scenario(&spec)?)?;
            let report = solve_problem(&problem, config, &[])?;
            Ok(UsersSweepRow {
                label: label.clone(),
                geom,
                patterns: geom.pattern_count(),
                users,
                worst_snr: report.worst_snr,
                worst_snr_db: report.worst_snr_db,
                monotone: report.trace_is_monotone(),
            })
        })
        .collect()
}

/// One (surface, user, pattern) entry of a case-study table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRow {
    pub surface: &'static str,
    pub user: usize,
    pub azimuth: f64,
    pub pattern: usize,
    pub snr: f64,
    pub snr_db: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudy {
    pub figure: u8,
    pub spec: ArcScenarioSpec,
    pub mis: SolveReport,
    pub sms: SolveReport,
    pub rows: Vec<CaseRow>,
}

impl CaseStudy {
    /// Patterns chosen by at least one user, ascending.
    pub fn used_patterns(&self) -> Vec<usize> {
        let mut used = self.mis.selected_patterns.clone();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Arc spec for the small case studies: figure 6 is MS 1 = 2x1 with a single
/// MS 2 element, figure 7 is MS 1 = 2x2; four users in both.
pub fn case_study_spec(figure: u8) -> Result<ArcScenarioSpec> {
    let geom = match figure {
        6 => MisGeometry::new(2, 1, 1, 1)?,
        7 => MisGeometry::new(2, 2, 1, 1)?,
        other => {
            return Err(Error::InvalidConfig {
                key: "figure",
                reason: format!("must be 6 or 7, got {other}"),
            })
        }
    };
    Ok(ArcScenarioSpec::new(geom, 4))
}

/// Solves the single-layer and two-layer surfaces for `spec` and tabulates
/// every user's SNR under every pattern.
pub fn case_study(figure: u8, spec: &ArcScenarioSpec, config: &SolverConfig) -> Result<CaseStudy> {
    let sms = sms_baseline(spec, config)?;
    let mis = mis_over_baseline(spec, &sms, config)?;
    let azimuths = spec.azimuths();

    let mut rows = Vec::new();
    for (surface, report, geom) in [
        ("mis", &mis, spec.geom),
        ("sms", &sms, spec.geom.to_single_layer()),
    ] {
        let problem = Problem::new(&build_arc_scenario(&spec.with_geometry(geom))?)?;
        let table = gamma_table(&problem, &report.phi, &report.theta);
        for (k, row) in table.iter().enumerate() {
            for (u, &snr) in row.iter().enumerate() {
                rows.push(CaseRow {
                    surface,
                    user: k + 1,
                    azimuth: azimuths[k],
                    pattern: u + 1,
                    snr,
                    snr_db: to_db(snr),
                    selected: report.selected_patterns[k] == u + 1,
                });
            }
        }
    }
    Ok(CaseStudy {
        figure,
        spec: spec.clone(),
        mis,
        sms,
        rows,
    })
}
