//! Flat JSON run configuration, command-specific defaults and validation.

use std::path::{Path, PathBuf};

use mis_core::experiments::{AllocationScheme, ArcScenarioSpec};
use mis_core::oracle::BruteForceConfig;
use mis_core::solver::MuInit;
use mis_core::{ArrayAngles, MisGeometry, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepMs2,
    SweepAlloc,
    SweepUsers,
    CaseStudy,
    OracleCheck,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::SweepMs2 => "sweep-ms2",
            Self::SweepAlloc => "sweep-alloc",
            Self::SweepUsers => "sweep-users",
            Self::CaseStudy => "case-study",
            Self::OracleCheck => "oracle-check",
            Self::Selftest => "selftest",
        }
    }
}

/// Every key is optional; absent keys take the command's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Subset of `["csv", "json"]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iota: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival_azimuth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival_elevation: Option<f64>,

    /// Absent means the automatic spread-based start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_inner_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub armijo_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backtrack_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_backtracks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr_plus: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_search_space: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_instances: Option<usize>,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub out: Option<PathBuf>,
    pub figure: Option<u8>,
}

/// Reads a flat config, or the `config` member of a run manifest.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))?;
    let body = match value {
        serde_json::Value::Object(ref map) if map.contains_key("results_digest") => {
            map.get("config").cloned().ok_or_else(|| {
                CliError::Validation("manifest has no `config` key".into())
            })?
        }
        other => other,
    };
    serde_json::from_value(body).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("invalid `{key}`: {reason}"))
}

impl RunConfig {
    /// Fills every key the command uses, applying overrides first.
    pub fn resolve(mut self, command: Command, overrides: &Overrides) -> Result<Self, CliError> {
        if let Some(c) = &self.command {
            if c != command.name() {
                return Err(invalid("command", format!("config is for `{c}`, not `{}`", command.name())));
            }
        }
        self.command = Some(command.name().to_string());
        macro_rules! fill {
            ($field:ident, $value:expr) => {
                if self.$field.is_none() {
                    self.$field = Some($value);
                }
            };
        }
        if overrides.seed.is_some() {
            self.seed = overrides.seed;
        }
        if overrides.restarts.is_some() {
            self.restarts = overrides.restarts;
        }
        if overrides.out.is_some() {
            self.out = overrides.out.clone();
        }
        if overrides.figure.is_some() {
            if command != Command::CaseStudy {
                return Err(invalid("figure", "only applies to case-study"));
            }
            self.figure = overrides.figure;
        }

        self.check_applicable(command)?;
        let d = SolverConfig::default();
        fill!(seed, d.seed);
        fill!(restarts, d.restarts);
        fill!(out, PathBuf::from("out"));
        fill!(formats, vec!["csv".into(), "json".into()]);
        if command == Command::Selftest {
            return Ok(self);
        }
        fill!(delta, d.delta);
        fill!(gap_rel_tol, d.gap_rel_tol);
        fill!(inner_grad_tol, d.inner_grad_tol);
        fill!(max_inner_iters, d.max_inner_iters);
        fill!(max_outer_iters, d.max_outer_iters);
        fill!(armijo_c1, d.armijo_c1);
        fill!(backtrack_factor, d.backtrack_factor);
        fill!(initial_step, d.initial_step);
        fill!(max_backtracks, d.max_backtracks);
        fill!(pr_plus, d.pr_plus);

        let arc = ArcScenarioSpec::new(MisGeometry::new(1, 1, 1, 1).expect("valid"), 1);
        fill!(spacing, mis_core::geometry::DEFAULT_SPACING);
        fill!(azimuth_lo, arc.azimuth_lo);
        fill!(azimuth_hi, arc.azimuth_hi);
        fill!(elevation, arc.elevation);
        fill!(iota, arc.iota);
        fill!(arrival_azimuth, arc.mis_arrival.azimuth);
        fill!(arrival_elevation, arc.mis_arrival.elevation);

        match command {
            Command::Solve => {
                fill!(m_rows, 4);
                fill!(m_cols, 4);
                fill!(n_rows, 2);
                fill!(n_cols, 2);
                fill!(users, 4);
            }
            Command::SweepMs2 => {
                fill!(m_rows, 6);
                fill!(m_cols, 6);
                fill!(users, 8);
            }
            Command::SweepAlloc => {
                fill!(total_elements, 64);
                fill!(scheme, 1);
                fill!(users, 8);
            }
            Command::SweepUsers => {
                fill!(user_counts, vec![4, 8, 16, 32]);
            }
            Command::CaseStudy => {
                fill!(figure, 6);
                fill!(users, 4);
            }
            Command::OracleCheck => {
                fill!(m_rows, 2);
                fill!(m_cols, 1);
                fill!(n_rows, 1);
                fill!(n_cols, 1);
                fill!(users, 2);
                let b = BruteForceConfig::default();
                fill!(phase_levels, b.phase_levels);
                fill!(max_search_space, b.max_search_space as u64);
                fill!(fd_instances, 20);
            }
            Command::Selftest => unreachable!(),
        }
        self.validate()?;
        Ok(self)
    }

    /// Rejects keys that the command would otherwise silently ignore.
    fn check_applicable(&self, command: Command) -> Result<(), CliError> {
        let set = [
            ("m_rows", self.m_rows.is_some()),
            ("m_cols", self.m_cols.is_some()),
            ("n_rows", self.n_rows.is_some()),
            ("n_cols", self.n_cols.is_some()),
            ("users", self.users.is_some()),
            ("user_counts", self.user_counts.is_some()),
            ("total_elements", self.total_elements.is_some()),
            ("scheme", self.scheme.is_some()),
            ("figure", self.figure.is_some()),
            ("phase_levels", self.phase_levels.is_some()),
            ("max_search_space", self.max_search_space.is_some()),
            ("fd_instances", self.fd_instances.is_some()),
        ];
        let allowed: &[&str] = match command {
            Command::Solve => &["m_rows", "m_cols", "n_rows", "n_cols", "users"],
            Command::SweepMs2 => &["m_rows", "m_cols", "users"],
            Command::SweepAlloc => &["total_elements", "scheme", "users"],
            Command::SweepUsers => &["m_rows", "m_cols", "n_rows", "n_cols", "user_counts"],
            Command::CaseStudy => &["figure", "users"],
            Command::OracleCheck => &[
                "m_rows",
                "m_cols",
                "n_rows",
                "n_cols",
                "users",
                "phase_levels",
                "max_search_space",
                "fd_instances",
            ],
            Command::Selftest => &[],
        };
        match set.iter().find(|(key, present)| *present && !allowed.contains(key)) {
            Some((key, _)) => Err(invalid(key, format!("does not apply to {}", command.name()))),
            None => Ok(()),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(formats) = &self.formats {
            if let Some(f) = formats.iter().find(|f| *f != "csv" && *f != "json") {
                return Err(invalid("formats", format!("unknown format `{f}`, expected csv or json")));
            }
        }
        if let Some(users) = self.users {
            if users == 0 {
                return Err(invalid("users", "at least one user is required"));
            }
        }
        if let Some(counts) = &self.user_counts {
            if counts.is_empty() || counts.contains(&0) {
                return Err(invalid("user_counts", "must be a non-empty list of positive counts"));
            }
        }
        if let Some(s) = self.spacing {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("spacing", format!("must be positive, got {s}")));
            }
        }
        if let Some(levels) = self.phase_levels {
            if levels < 2 {
                return Err(invalid("phase_levels", format!("must be at least 2, got {levels}")));
            }
        }
        if let Some(scheme) = self.scheme {
            AllocationScheme::from_number(scheme)?;
        }
        if let Some(figure) = self.figure {
            mis_core::experiments::case_study_spec(figure)?;
        }
        self.solver()?.validate()?;
        self.arc_template()?.validate()?;
        if self.n_rows.is_some() || self.n_cols.is_some() {
            self.geometry()?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved")
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().expect("resolved")
    }

    pub fn wants(&self, format: &str) -> bool {
        self.formats.as_ref().is_some_and(|f| f.iter().any(|x| x == format))
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let d = SolverConfig::default();
        Ok(SolverConfig {
            mu_init: self.mu_init.map_or(MuInit::Auto, MuInit::Fixed),
            delta: self.delta.unwrap_or(d.delta),
            mu_min: self.mu_min,
            gap_rel_tol: self.gap_rel_tol.unwrap_or(d.gap_rel_tol),
            inner_grad_tol: self.inner_grad_tol.unwrap_or(d.inner_grad_tol),
            max_inner_iters: self.max_inner_iters.unwrap_or(d.max_inner_iters),
            max_outer_iters: self.max_outer_iters.unwrap_or(d.max_outer_iters),
            armijo_c1: self.armijo_c1.unwrap_or(d.armijo_c1),
            backtrack_factor: self.backtrack_factor.unwrap_or(d.backtrack_factor),
            initial_step: self.initial_step.unwrap_or(d.initial_step),
            max_backtracks: self.max_backtracks.unwrap_or(d.max_backtracks),
            pr_plus: self.pr_plus.unwrap_or(d.pr_plus),
            restarts: self.restarts.unwrap_or(d.restarts),
            seed: self.seed.unwrap_or(d.seed),
        })
    }

    /// MS 1 / MS 2 geometry; a missing MS 2 size means a single-layer surface.
    pub fn geometry(&self) -> Result<MisGeometry, CliError> {
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| invalid(key, "is required"));
        let mr = need(self.m_rows, "m_rows")?;
        let mc = need(self.m_cols, "m_cols")?;
        let spacing = self.spacing.unwrap_or(mis_core::geometry::DEFAULT_SPACING);
        Ok(MisGeometry::with_spacing(
            mr,
            mc,
            self.n_rows.unwrap_or(mr),
            self.n_cols.unwrap_or(mc),
            spacing,
        )?)
    }

    /// Arc template with a placeholder geometry when none is configured.
    pub fn arc_template(&self) -> Result<ArcScenarioSpec, CliError> {
        let geom = match (self.m_rows, self.m_cols) {
            (Some(_), Some(_)) => self.geometry()?,
            _ => MisGeometry::new(1, 1, 1, 1).expect("valid"),
        };
        let mut spec = ArcScenarioSpec::new(geom, self.users.unwrap_or(1));
        spec.azimuth_lo = self.azimuth_lo.unwrap_or(spec.azimuth_lo);
        spec.azimuth_hi = self.azimuth_hi.unwrap_or(spec.azimuth_hi);
        spec.elevation = self.elevation.unwrap_or(spec.elevation);
        spec.iota = self.iota.unwrap_or(spec.iota);
        spec.mis_arrival = ArrayAngles::new(
            self.arrival_azimuth.unwrap_or(spec.mis_arrival.azimuth),
            self.arrival_elevation.unwrap_or(spec.mis_arrival.elevation),
        )?;
        if !(spec.iota.is_finite() && spec.iota > 0.0) {
            return Err(invalid("iota", format!("must be positive, got {}", spec.iota)));
        }
        ArrayAngles::new(spec.azimuth_lo, spec.elevation)?;
        ArrayAngles::new(spec.azimuth_hi, spec.elevation)?;
        Ok(spec)
    }

    pub fn brute_force(&self) -> BruteForceConfig {
        let d = BruteForceConfig::default();
        BruteForceConfig {
            phase_levels: self.phase_levels.unwrap_or(d.phase_levels),
            max_search_space: self.max_search_space.map_or(d.max_search_space, u128::from),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse(r#"{"m_rows": 2, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn manifest_config_is_extracted() {
        let cfg = parse(r#"{"config": {"seed": 7}, "seed": 7, "tool_version": "x", "results_digest": "ab"}"#).unwrap();
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn overrides_win_and_defaults_fill() {
        let cfg = parse(r#"{"seed": 3, "restarts": 5}"#).unwrap();
        let o = Overrides { seed: Some(9), ..Default::default() };
        let r = cfg.resolve(Command::CaseStudy, &o).unwrap();
        assert_eq!((r.seed, r.restarts, r.figure), (Some(9), Some(5), Some(6)));
        assert_eq!(r.resolve(Command::CaseStudy, &Overrides::default()).unwrap().seed, Some(9));
    }

    #[test]
    fn geometry_errors_name_constraint() {
        let cfg = parse(r#"{"m_rows": 2, "m_cols": 2, "n_rows": 3, "n_cols": 1}"#).unwrap();
        let err = cfg.resolve(Command::Solve, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("must fit inside MS 1"), "{err}");
    }

    #[test]
    fn inapplicable_keys_are_rejected() {
        let cfg = parse(r#"{"m_rows": 3}"#).unwrap();
        let err = cfg.resolve(Command::CaseStudy, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("m_rows"), "{err}");
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let cfg = parse(r#"{"command": "solve"}"#).unwrap();
        assert!(cfg.resolve(Command::SweepMs2, &Overrides::default()).is_err());
    }
}
