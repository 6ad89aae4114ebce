//! Executes a scenario: one run directory per gain, a comparison table for
//! sweeps, optional plot scripts, and a hash manifest written last.
//!
//! ```text
//! <out>/
//!   k1_1/log.csv  k1_1/metrics.json  [k1_1/excitation.csv]
//!   k1_3/...
//!   [comparison.json]  [plots/*.gp]
//!   manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::plot::{emit_plot_script, Figure};
use super::scenario::{RunSpec, Scenario};
use super::{analyze, regressor_from_log};
use crate::engine::{self, Metrics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub k1: f64,
    /// Paths relative to the output directory.
    pub log: String,
    pub metrics: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<String>,
    pub metrics_window: [f64; 2],
    pub diverged_at: Option<f64>,
    /// `None` when the run diverged before the metrics window.
    pub summary: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub runs: Vec<RunRecord>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path)?;
        Ok(serde_json::from_slice(&text)?)
    }
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub out_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl BatchSummary {
    pub fn diverged(&self) -> Vec<&RunRecord> {
        self.manifest
            .runs
            .iter()
            .filter(|r| r.diverged_at.is_some())
            .collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(out_dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = out_dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    label: &'a str,
    k1: f64,
    window: [f64; 2],
    diverged_at: Option<f64>,
    metrics: Option<&'a Metrics>,
}

fn execute(scenario: &Scenario, spec: &RunSpec, out_dir: &Path) -> Result<RunRecord> {
    info!("{}: starting {}", scenario.name, spec.label);
    let mut log = engine::run(&spec.system, &spec.config, &spec.init)?;
    log.comments.splice(
        0..0,
        [
            "fricobs trajectory log".to_string(),
            format!("scenario: {}", serde_json::to_string(scenario)?),
            format!("run: {} (k1={:?})", spec.label, spec.k1),
        ],
    );
    if let Some(t) = log.diverged_at {
        warn!("{}: {} diverged at t={t}", scenario.name, spec.label);
    }

    let dir = &spec.label;
    let log_rel = format!("{dir}/log.csv");
    let mut buf = Vec::new();
    log.write_csv(&mut buf)?;
    write_file(out_dir, &log_rel, &buf)?;

    let (w0, w1) = scenario.metrics_window();
    let summary = match engine::metrics(&log, (w0, w1)) {
        Ok(m) => Some(m),
        Err(e) if log.diverged_at.is_some() => {
            warn!("{}: no metrics ({e})", spec.label);
            None
        }
        Err(e) => return Err(e),
    };
    let metrics_rel = format!("{dir}/metrics.json");
    let body = MetricsFile {
        label: &spec.label,
        k1: spec.k1,
        window: [w0, w1],
        diverged_at: log.diverged_at,
        metrics: summary.as_ref(),
    };
    write_file(out_dir, &metrics_rel, serde_json::to_string_pretty(&body)?.as_bytes())?;

    let excitation = match &scenario.output.excitation {
        Some(spec_x) if log.diverged_at.is_none() => {
            let rs = regressor_from_log(&log, scenario.observer.vartheta)?;
            let report = analyze(&rs, spec_x)?;
            let rel = format!("{dir}/excitation.csv");
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            write_file(out_dir, &rel, &buf)?;
            Some(rel)
        }
        _ => None,
    };
    info!("{}: finished {}", scenario.name, spec.label);
    Ok(RunRecord {
        label: spec.label.clone(),
        k1: spec.k1,
        log: log_rel,
        metrics: metrics_rel,
        excitation,
        metrics_window: [w0, w1],
        diverged_at: log.diverged_at,
        summary,
    })
}

/// Runs every gain of `scenario` on at most `jobs` threads (all cores when
/// `None`) and writes the output tree. Diverged runs are recorded, not
/// raised; check [`BatchSummary::diverged`].
pub fn run(scenario: &Scenario, out_dir: Option<&Path>, jobs: Option<usize>) -> Result<BatchSummary> {
    scenario.validate()?;
    let out_dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&scenario.output.directory));
    fs::create_dir_all(&out_dir)?;
    let specs = scenario.runs()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| execute(scenario, spec, &out_dir))
            .collect::<Result<_>>()
    })?;

    let mut written: Vec<String> = runs
        .iter()
        .flat_map(|r| {
            [Some(r.log.clone()), Some(r.metrics.clone()), r.excitation.clone()]
                .into_iter()
                .flatten()
        })
        .collect();

    if runs.len() > 1 {
        let table: Vec<_> = runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "label": r.label,
                    "k1": r.k1,
                    "diverged_at": r.diverged_at,
                    "rms_e1": r.summary.map(|m| m.rms_e1),
                    "max_abs_e1": r.summary.map(|m| m.max_abs_e1),
                    "rms_x2tilde": r.summary.map(|m| m.rms_x2tilde),
                    "final_theta_errors": r.summary.map(|m| m.final_theta_errors),
                })
            })
            .collect();
        write_file(&out_dir, "comparison.json", serde_json::to_string_pretty(&table)?.as_bytes())?;
        written.push("comparison.json".into());
    }

    if scenario.output.emit_plots {
        let open_loop = scenario.controller.open_loop.is_some();
        for fig in Figure::ALL {
            if open_loop && matches!(fig, Figure::Tracking | Figure::TrackingError) {
                continue;
            }
            match emit_plot_script(&out_dir, &runs, fig) {
                Ok(script) => {
                    let rel = format!("plots/{}.gp", fig.name());
                    write_file(&out_dir, &rel, script.as_bytes())?;
                    written.push(rel);
                }
                Err(Error::MissingColumn(c)) => {
                    info!("skipping figure {}: logs lack `{c}`", fig.name())
                }
                Err(Error::Excitation(m)) => info!("skipping figure {}: {m}", fig.name()),
                Err(e) => return Err(e),
            }
        }
    }

    written.sort();
    let files = written
        .into_iter()
        .map(|path| {
            let bytes = fs::read(out_dir.join(&path))?;
            Ok(FileEntry {
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        scenario: scenario.clone(),
        seed: scenario.sim.seed,
        runs,
        files,
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(BatchSummary {
        out_dir,
        manifest_path,
        manifest,
    })
}
