//! Scenario-driven batch runs, excitation analysis of logs and plot scripts.

pub mod batch;
pub mod plot;
pub mod scenario;

pub use batch::{run, BatchSummary, Manifest, RunRecord};
pub use plot::{emit_plot_script, Figure};
pub use scenario::{parse_scenario, ExcitationSpec, RunSpec, Scenario};

use crate::engine::TrajectoryLog;
use crate::error::{Error, Result};
use crate::excitation::{
    conservative_check, interval_excitation, pe_report, ExcitationReport, RegressorSeries,
};

/// Builds the regressor from a log's `t` and `hat_x2` columns.
pub fn regressor_from_log(log: &TrajectoryLog, vartheta: f64) -> Result<RegressorSeries> {
    let t = log.require("t")?.to_vec();
    let x2hat = log.require("hat_x2")?;
    RegressorSeries::from_velocity_estimates(t, x2hat, vartheta)
}

/// Windows `(t_k, width)` with `t_k = start + k(width+gap)`, all inside `[start, end]`.
pub fn interval_windows(start: f64, end: f64, width: f64, gap: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let tol = 1e-9 * end.abs().max(1.0);
    let mut k = 0usize;
    loop {
        let t0 = start + k as f64 * (width + gap);
        if t0 + width > end + tol {
            break;
        }
        out.push((t0, width));
        k += 1;
    }
    out
}

/// Uniform partition `start, start+step, …` up to `end`.
pub fn uniform_partition(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Runs the requested excitation analysis on a regressor series.
pub fn analyze(rs: &RegressorSeries, spec: &ExcitationSpec) -> Result<ExcitationReport> {
    let (t0, t1) = rs.span();
    match *spec {
        ExcitationSpec::Pe { window, mu, stride } => pe_report(rs, window, mu, stride),
        ExcitationSpec::Intervals { width, start, gap } => {
            let windows = interval_windows(start.max(t0), t1, width, gap);
            if windows.is_empty() {
                return Err(Error::Excitation(format!(
                    "no window of width {width} fits in [{start}, {t1}]"
                )));
            }
            interval_excitation(rs, &windows)
        }
        ExcitationSpec::Conservative { step, start } => {
            let partition = uniform_partition(start.max(t0), t1, step);
            if partition.len() < 2 {
                return Err(Error::Excitation(format!(
                    "partition step {step} is longer than the log"
                )));
            }
            conservative_check(rs, &partition)
        }
    }
}
