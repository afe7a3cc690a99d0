//! Files written for a run and for a comparison.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use shapenewton::geometry::write_polyline;
use shapenewton::optimize::{IterationRecord, RunTrace, Termination};

use crate::config::ExperimentConfig;

pub const TRACE_FILE: &str = "trace.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARE_FILE: &str = "compare.csv";

pub fn interface_file(k: usize) -> String {
    format!("interface_{k}.gp")
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "absX")]
    abs_x: Option<f64>,
    #[serde(rename = "ratio_absX")]
    ratio_abs_x: Option<f64>,
    #[serde(rename = "Linf_L")]
    linf_l: f64,
    #[serde(rename = "L2sq_f_bnd")]
    l2sq_f_bnd: f64,
    #[serde(rename = "Linf_f_points")]
    linf_f_points: f64,
    n_points: usize,
    sigma: f64,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            j: r.j,
            abs_x: r.abs_x,
            ratio_abs_x: r.ratio_abs_x,
            linf_l: r.linf_load,
            l2sq_f_bnd: r.l2sq_f_boundary,
            linf_f_points: r.linf_f_points,
            n_points: r.n_points,
            sigma: r.sigma,
        }
    }
}

#[derive(Serialize)]
struct DiagnosticsRow {
    iter: usize,
    condition: Option<f64>,
    per_step_bound: Option<f64>,
    cumulative_bound: Option<f64>,
    apriori_bound: Option<f64>,
    q: Option<f64>,
    transport_discrepancy: Option<f64>,
    resampled: bool,
    accepted: bool,
}

impl From<&IterationRecord> for DiagnosticsRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            condition: r.condition,
            per_step_bound: r.metric.per_step_bound,
            cumulative_bound: r.metric.cumulative_bound,
            apriori_bound: r.metric.apriori_bound,
            q: r.metric.q,
            transport_discrepancy: r.transport_discrepancy,
            resampled: r.resampled,
            accepted: r.accepted,
        }
    }
}

/// Final state of a run, as listed in the manifest and the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub method: String,
    pub test: String,
    pub termination: Termination,
    pub iterations: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Linf_L")]
    pub linf_l: f64,
    #[serde(rename = "L2sq_f_bnd")]
    pub l2sq_f_bnd: f64,
    #[serde(rename = "Linf_f_points")]
    pub linf_f_points: f64,
}

impl Summary {
    pub fn new(config: &ExperimentConfig, trace: &RunTrace) -> Self {
        let last = trace.last();
        Self {
            method: trace.method.name().into(),
            test: config.field.name().into(),
            termination: trace.termination.clone(),
            iterations: trace.iterations(),
            j: last.j,
            linf_l: last.linf_load,
            l2sq_f_bnd: last.l2sq_f_boundary,
            linf_f_points: last.linf_f_points,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    config_path: &'a Path,
    version: &'static str,
    started: String,
    finished: String,
    files: Vec<String>,
    summary: Summary,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row).map_err(std::io::Error::other)?;
    }
    w.flush()
}

/// Times of a run, formatted for the manifest.
pub struct Timing {
    pub started: chrono::DateTime<chrono::Utc>,
    pub finished: chrono::DateTime<chrono::Utc>,
}

/// Writes every file of a run into `dir` and returns the summary.
pub fn write_run(dir: &Path, config_path: &Path, config: &ExperimentConfig, trace: &RunTrace, timing: &Timing) -> std::io::Result<Summary> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![TRACE_FILE.to_string(), DIAGNOSTICS_FILE.to_string()];
    write_csv(&dir.join(TRACE_FILE), trace.records.iter().map(TraceRow::from))?;
    write_csv(&dir.join(DIAGNOSTICS_FILE), trace.records.iter().map(DiagnosticsRow::from))?;
    for (k, shape) in &trace.snapshots {
        let name = interface_file(*k);
        let mut out = BufWriter::new(File::create(dir.join(&name))?);
        write_polyline(shape, &mut out)?;
        out.flush()?;
        files.push(name);
    }
    files.push(MANIFEST_FILE.to_string());
    let summary = Summary::new(config, trace);
    let manifest = Manifest {
        config,
        config_path,
        version: env!("CARGO_PKG_VERSION"),
        started: timing.started.to_rfc3339(),
        finished: timing.finished.to_rfc3339(),
        files,
        summary: summary.clone(),
    };
    let mut out = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(std::io::Error::other)?;
    writeln!(out)?;
    out.flush()?;
    Ok(summary)
}

/// One line of the comparison table; failed runs keep only the config and
/// the error message.
#[derive(Serialize)]
pub struct CompareRow {
    pub config: PathBuf,
    pub status: &'static str,
    pub method: Option<String>,
    pub test: Option<String>,
    pub termination: String,
    pub iterations: Option<usize>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[serde(rename = "Linf_L")]
    pub linf_l: Option<f64>,
    #[serde(rename = "L2sq_f_bnd")]
    pub l2sq_f_bnd: Option<f64>,
    #[serde(rename = "Linf_f_points")]
    pub linf_f_points: Option<f64>,
}

impl CompareRow {
    pub fn ok(config: PathBuf, s: &Summary) -> Self {
        Self {
            config,
            status: "ok",
            method: Some(s.method.clone()),
            test: Some(s.test.clone()),
            termination: termination_label(&s.termination),
            iterations: Some(s.iterations),
            j: Some(s.j),
            linf_l: Some(s.linf_l),
            l2sq_f_bnd: Some(s.l2sq_f_bnd),
            linf_f_points: Some(s.linf_f_points),
        }
    }

    pub fn failed(config: PathBuf, message: String) -> Self {
        Self {
            config,
            status: "FAILED",
            method: None,
            test: None,
            termination: message,
            iterations: None,
            j: None,
            linf_l: None,
            l2sq_f_bnd: None,
            linf_f_points: None,
        }
    }
}

pub fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "max_iterations".into(),
        Termination::NoSufficientDecrease => "no_sufficient_decrease".into(),
        Termination::Stalled => "stalled".into(),
        Termination::Failed { message } => format!("failed: {message}"),
    }
}

pub fn write_compare(path: &Path, rows: &[CompareRow]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_csv(path, rows)
}
