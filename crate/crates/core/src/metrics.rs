//! Per-problem summaries over repeated planning runs. Failed runs count as
//! infinite time.

use alloc::string::String;
use alloc::vec::Vec;

use crate::planner::PlanResult;

/// Median with infinities allowed; the mean of the two middle values for an
/// even count. `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else if v[mid - 1] == v[mid] {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMetrics {
    pub name: String,
    pub runs: usize,
    pub median_time_to_valid: f64,
    pub median_initial_solution_time: f64,
    pub cutoff_s: f64,
    pub budget_s: f64,
    pub success_rate_cutoff: f64,
    pub success_rate_budget: f64,
    /// Mean over runs with a valid trajectory by the cutoff.
    pub mean_length_rad_cutoff: Option<f64>,
    pub mean_length_m_cutoff: Option<f64>,
    pub mean_length_rad_budget: Option<f64>,
    pub mean_length_m_budget: Option<f64>,
}

pub fn summarize(name: &str, runs: &[PlanResult], cutoff_s: f64, budget_s: f64) -> ProblemMetrics {
    let inf = f64::INFINITY;
    let ttv: Vec<f64> = runs.iter().map(|r| r.time_to_valid.unwrap_or(inf)).collect();
    let init: Vec<f64> = runs.iter().map(|r| r.initial_solution_time.unwrap_or(inf)).collect();
    let at = |cutoff: f64| -> (f64, Vec<(f64, f64)>) {
        let lengths: Vec<(f64, f64)> = runs.iter().filter_map(|r| r.best_length_at(cutoff)).collect();
        let rate = if runs.is_empty() {
            0.0
        } else {
            lengths.len() as f64 / runs.len() as f64
        };
        (rate, lengths)
    };
    let (rate_cut, len_cut) = at(cutoff_s);
    let (rate_budget, len_budget) = at(budget_s);
    let rad = |l: &[(f64, f64)]| mean(&l.iter().map(|x| x.0).collect::<Vec<_>>());
    let m = |l: &[(f64, f64)]| mean(&l.iter().map(|x| x.1).collect::<Vec<_>>());
    ProblemMetrics {
        name: String::from(name),
        runs: runs.len(),
        median_time_to_valid: if runs.is_empty() { inf } else { median(&ttv) },
        median_initial_solution_time: if runs.is_empty() { inf } else { median(&init) },
        cutoff_s,
        budget_s,
        success_rate_cutoff: rate_cut,
        success_rate_budget: rate_budget,
        mean_length_rad_cutoff: rad(&len_cut),
        mean_length_m_cutoff: m(&len_cut),
        mean_length_rad_budget: rad(&len_budget),
        mean_length_m_budget: m(&len_budget),
    }
}
