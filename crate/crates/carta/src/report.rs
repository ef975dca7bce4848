//! Convergence logs and per-problem metrics tables, both CSV.

use std::path::Path;

use carta_core::metrics::ProblemMetrics;
use carta_core::planner::EmissionRecord;
use serde::Serialize;

use crate::FileError;

#[derive(Debug, Serialize)]
struct LogRow {
    elapsed_s: f64,
    length_rad: f64,
    length_m: f64,
    max_pos_err_m: f64,
    max_rot_err_rad: f64,
    valid: bool,
}

/// One row per optimizer emission.
pub fn convergence_log_csv(emissions: &[EmissionRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if emissions.is_empty() {
        w.write_record(["elapsed_s", "length_rad", "length_m", "max_pos_err_m", "max_rot_err_rad", "valid"])
            .expect("in-memory write");
    }
    for e in emissions {
        w.serialize(LogRow {
            elapsed_s: e.time,
            length_rad: e.length_rad,
            length_m: e.length_m,
            max_pos_err_m: e.report.max_pos_err,
            max_rot_err_rad: e.report.max_rot_err,
            valid: e.valid,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf8")
}

#[derive(Debug, Serialize)]
struct MetricsRow<'a> {
    problem: &'a str,
    runs: usize,
    median_time_to_valid_s: f64,
    median_initial_solution_time_s: f64,
    cutoff_s: f64,
    success_rate_cutoff: f64,
    mean_length_rad_cutoff: Option<f64>,
    mean_length_m_cutoff: Option<f64>,
    budget_s: f64,
    success_rate_budget: f64,
    mean_length_rad_budget: Option<f64>,
    mean_length_m_budget: Option<f64>,
}

/// One row per problem. Failed runs make medians `inf`; lengths with no
/// successful run are left empty.
pub fn metrics_table_csv(rows: &[ProblemMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in rows {
        w.serialize(MetricsRow {
            problem: &m.name,
            runs: m.runs,
            median_time_to_valid_s: m.median_time_to_valid,
            median_initial_solution_time_s: m.median_initial_solution_time,
            cutoff_s: m.cutoff_s,
            success_rate_cutoff: m.success_rate_cutoff,
            mean_length_rad_cutoff: m.mean_length_rad_cutoff,
            mean_length_m_cutoff: m.mean_length_m_cutoff,
            budget_s: m.budget_s,
            success_rate_budget: m.success_rate_budget,
            mean_length_rad_budget: m.mean_length_rad_budget,
            mean_length_m_budget: m.mean_length_m_budget,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf8")
}

pub fn save_convergence_log(path: &Path, emissions: &[EmissionRecord]) -> Result<(), FileError> {
    crate::write_text(path, &convergence_log_csv(emissions))
}

pub fn save_metrics_table(path: &Path, rows: &[ProblemMetrics]) -> Result<(), FileError> {
    crate::write_text(path, &metrics_table_csv(rows))
}
