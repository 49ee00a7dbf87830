//! Subcommand bodies. Each returns the CSV table, a serializable result and
//! the lines printed to stdout.

use mis_core::experiments::{
    build_arc_scenario, case_study, case_study_spec, default_1d2d_geometries, sweep_allocation,
    sweep_ms2_sizes, sweep_users_1d2d, AllocationScheme, SweepResult,
};
use mis_core::oracle::{brute_force_solve, gradient_suite, BruteForceResult, GradientCase};
use mis_core::solver::solve_problem;
use mis_core::{MisGeometry, Problem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{db, flag, lin, Table};

/// Solver with 8 restarts must reach this fraction of the lattice optimum.
pub const ORACLE_RATIO: f64 = 0.95;
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;

pub struct Outcome {
    pub table: Table,
    pub results: Value,
    pub summary: Vec<String>,
    /// Names of failed checks; non-empty turns into a runtime error after output is written.
    pub failures: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.arc_template()?;
    let problem = Problem::new(&build_arc_scenario(&spec)?)?;
    let report = solve_problem(&problem, &cfg.solver()?, &[])?;
    let mut table = Table::new(vec!["user", "azimuth", "elevation", "pattern", "snr", "snr_db"]);
    for (k, az) in spec.azimuths().iter().enumerate() {
        table.push(vec![
            (k + 1).to_string(),
            lin(*az),
            lin(spec.elevation),
            report.selected_patterns[k].to_string(),
            lin(report.per_user_snr[k]),
            db(report.per_user_snr[k]),
        ]);
    }
    let summary = vec![format!(
        "worst-case SNR {} ({} dB) over {} patterns, start {}",
        lin(report.worst_snr),
        db(report.worst_snr),
        problem.patterns(),
        report.start_index
    )];
    Ok(Outcome {
        table,
        results: to_value(&report)?,
        summary,
        failures: Vec::new(),
    })
}

const SWEEP_HEADER: [&str; 13] = [
    "step",
    "m_rows",
    "m_cols",
    "n_rows",
    "n_cols",
    "patterns",
    "users",
    "seed",
    "baseline_snr",
    "baseline_snr_db",
    "mis_snr",
    "mis_snr_db",
    "gain",
];

fn sweep_table(sweep: &SweepResult) -> Table {
    let mut table = Table::new(SWEEP_HEADER.to_vec());
    for (i, c) in sweep.cells.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            c.m_rows.to_string(),
            c.m_cols.to_string(),
            c.n_rows.to_string(),
            c.n_cols.to_string(),
            c.patterns.to_string(),
            c.users.to_string(),
            c.seed.to_string(),
            lin(c.baseline_snr),
            db(c.baseline_snr),
            lin(c.mis_snr),
            db(c.mis_snr),
            lin(c.gain),
        ]);
    }
    table
}

fn sweep_summary(sweep: &SweepResult) -> Vec<String> {
    let mut lines = vec![format!("{}: {} cells, K = {}", sweep.label, sweep.cells.len(), sweep.users)];
    if let Some(best) = sweep.best_cell() {
        lines.push(format!(
            "best gain {:.4} at MS 1 {}x{}, MS 2 {}x{} ({} dB)",
            best.gain,
            best.m_rows,
            best.m_cols,
            best.n_rows,
            best.n_cols,
            db(best.mis_snr)
        ));
    }
    lines
}

pub fn sweep_ms2(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.arc_template()?;
    let sweep = sweep_ms2_sizes(&spec, &cfg.solver()?)?;
    Ok(Outcome {
        table: sweep_table(&sweep),
        summary: sweep_summary(&sweep),
        results: to_value(&sweep)?,
        failures: Vec::new(),
    })
}

pub fn sweep_alloc(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.arc_template()?;
    let scheme = AllocationScheme::from_number(cfg.scheme.expect("resolved"))?;
    let total = cfg.total_elements.expect("resolved");
    let sweep = sweep_allocation(total, scheme, &spec, &cfg.solver()?)?;
    Ok(Outcome {
        table: sweep_table(&sweep),
        summary: sweep_summary(&sweep),
        results: to_value(&sweep)?,
        failures: Vec::new(),
    })
}

pub fn sweep_users(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let geometries: Vec<(String, MisGeometry)> = match (cfg.m_rows, cfg.m_cols) {
        (Some(_), Some(_)) => vec![("custom".to_string(), cfg.geometry()?)],
        (None, None) => default_1d2d_geometries(),
        _ => return Err(CliError::Validation("invalid `m_rows`: m_rows and m_cols must be given together".into())),
    };
    let counts = cfg.user_counts.clone().expect("resolved");
    let rows = sweep_users_1d2d(&geometries, &counts, &cfg.arc_template()?, &cfg.solver()?)?;
    let mut table = Table::new(vec![
        "label",
        "m_rows",
        "m_cols",
        "n_rows",
        "n_cols",
        "patterns",
        "users",
        "seed",
        "worst_snr",
        "worst_snr_db",
    ]);
    let mut summary = Vec::new();
    for r in &rows {
        table.push(vec![
            r.label.clone(),
            r.geom.m_rows().to_string(),
            r.geom.m_cols().to_string(),
            r.geom.n_rows().to_string(),
            r.geom.n_cols().to_string(),
            r.patterns.to_string(),
            r.users.to_string(),
            cfg.seed().to_string(),
            lin(r.worst_snr),
            db(r.worst_snr),
        ]);
        summary.push(format!("{} K={}: {} dB", r.label, r.users, db(r.worst_snr)));
    }
    Ok(Outcome {
        table,
        results: to_value(&rows)?,
        summary,
        failures: Vec::new(),
    })
}

pub fn case_study_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let figure = cfg.figure.expect("resolved");
    let template = cfg.arc_template()?;
    let spec = case_study_spec(figure)?;
    let spec = template.with_geometry(spec.geom).with_users(cfg.users.unwrap_or(spec.users));
    let study = case_study(figure, &spec, &cfg.solver()?)?;
    let mut table = Table::new(vec!["surface", "user", "azimuth", "pattern", "snr", "snr_db", "selected"]);
    for r in &study.rows {
        table.push(vec![
            r.surface.to_string(),
            r.user.to_string(),
            lin(r.azimuth),
            r.pattern.to_string(),
            lin(r.snr),
            db(r.snr),
            flag(r.selected),
        ]);
    }
    let summary = vec![
        format!("MIS worst-case SNR {} ({} dB)", lin(study.mis.worst_snr), db(study.mis.worst_snr)),
        format!("SMS worst-case SNR {} ({} dB)", lin(study.sms.worst_snr), db(study.sms.worst_snr)),
        format!("patterns used: {:?}", study.used_patterns()),
    ];
    Ok(Outcome {
        table,
        results: to_value(&study)?,
        summary,
        failures: Vec::new(),
    })
}

#[derive(Serialize)]
struct OracleResults<'a> {
    brute_force: &'a BruteForceResult,
    solver_worst_snr: f64,
    ratio: f64,
    gradient: &'a [GradientCase],
}

pub fn oracle_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.arc_template()?;
    let problem = Problem::new(&build_arc_scenario(&spec)?)?;
    let oracle = brute_force_solve(&problem, &cfg.brute_force())?;
    let report = solve_problem(&problem, &cfg.solver()?, &[])?;
    let ratio = report.worst_snr / oracle.value;
    let cases = gradient_suite(cfg.seed(), cfg.fd_instances.expect("resolved"), FD_STEP)?;

    let mut table = Table::new(vec![
        "check",
        "instance",
        "factor",
        "value",
        "reference",
        "relative_error",
        "pass",
    ]);
    let mut failures = Vec::new();
    let oracle_pass = ratio >= ORACLE_RATIO;
    if !oracle_pass {
        failures.push("brute_force".to_string());
    }
    table.push(vec![
        "brute_force".into(),
        "0".into(),
        "".into(),
        lin(report.worst_snr),
        lin(oracle.value),
        format!("{:e}", (report.worst_snr - oracle.value) / oracle.value),
        flag(oracle_pass),
    ]);
    for c in &cases {
        let pass = c.check.relative_error < FD_TOLERANCE;
        if !pass {
            failures.push(format!("gradient {} {}", c.instance, c.factor));
        }
        table.push(vec![
            "gradient".into(),
            c.instance.to_string(),
            c.factor.to_string(),
            lin(c.check.predicted),
            lin(c.check.finite_difference),
            format!("{:e}", c.check.relative_error),
            flag(pass),
        ]);
    }
    let worst_fd = cases.iter().map(|c| c.check.relative_error).fold(0.0, f64::max);
    let summary = vec![
        format!(
            "brute force {} ({} dB), solver {} ({} dB), ratio {:.6}",
            lin(oracle.value),
            db(oracle.value),
            lin(report.worst_snr),
            db(report.worst_snr),
            ratio
        ),
        format!("{} gradient checks, worst relative error {worst_fd:e}", cases.len()),
    ];
    let results = to_value(&OracleResults {
        brute_force: &oracle,
        solver_worst_snr: report.worst_snr,
        ratio,
        gradient: &cases,
    })?;
    Ok(Outcome {
        table,
        results,
        summary,
        failures,
    })
}

pub fn selftest(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let checks = crate::selftest::run(cfg.seed())?;
    let mut table = Table::new(vec!["check", "pass", "detail"]);
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for c in &checks {
        if !c.pass {
            failures.push(c.name.to_string());
        }
        summary.push(format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
        table.push(vec![c.name.to_string(), flag(c.pass), c.detail.clone()]);
    }
    Ok(Outcome {
        table,
        results: json!(checks),
        summary,
        failures,
    })
}
