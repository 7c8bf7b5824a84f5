//! File emission for experiment runs: the per-interval CSV, the summary JSON,
//! a gnuplot-ready response-time series and q-table snapshots.
//!
//! All floats are written in shortest round-trip form, so rerunning the same
//! config produces byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::QTableSnapshot;
use crate::experiment::{ExperimentOutput, RunSummary, StepRecord};

/// Column order of `steps.csv`; matches the `StepRecord` field names.
pub const STEPS_CSV_HEADER: &str =
    "t,w,rt,vm_active,vm_total,action_crisp,action_applied,reward,epsilon,q_delta_max";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serializing {what}: {source}")]
    Json {
        what: &'static str,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_steps_csv(path: &Path, records: &[StepRecord]) -> Result<(), OutputError> {
    let mut out = String::with_capacity(records.len() * 64 + 128);
    out.push_str(STEPS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.w,
            r.rt,
            r.vm_active,
            r.vm_total,
            r.action_crisp,
            r.action_applied,
            r.reward,
            r.epsilon,
            r.q_delta_max
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<(), OutputError> {
    let mut body = serde_json::to_string_pretty(summary).map_err(|source| OutputError::Json {
        what: "summary",
        source,
    })?;
    body.push('\n');
    fs::write(path, body).map_err(io_err(path))
}

/// Two-column `t rt` series, ready for `plot "rt_vs_t.dat" with lines`.
pub fn write_rt_series(path: &Path, records: &[StepRecord]) -> Result<(), OutputError> {
    let mut out = String::with_capacity(records.len() * 24 + 16);
    out.push_str("# t rt_s\n");
    for r in records {
        out.push_str(&format!("{} {}\n", r.t, r.rt));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn write_qtable_snapshot(path: &Path, snapshot: &QTableSnapshot) -> Result<(), OutputError> {
    let mut body = serde_json::to_string_pretty(snapshot).map_err(|source| OutputError::Json {
        what: "q-table snapshot",
        source,
    })?;
    body.push('\n');
    fs::write(path, body).map_err(io_err(path))
}

/// The files one run leaves behind.
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub steps_csv: PathBuf,
    pub summary_json: PathBuf,
    pub rt_series: PathBuf,
    pub qtable_snapshots: Vec<PathBuf>,
    pub qtable_final: Option<PathBuf>,
}

/// Writes every artifact of a finished run into `dir` (created on demand).
pub fn emit_outputs(dir: &Path, output: &ExperimentOutput) -> Result<EmittedFiles, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let steps_csv = dir.join("steps.csv");
    write_steps_csv(&steps_csv, &output.records)?;

    let summary_json = dir.join("summary.json");
    write_summary_json(&summary_json, &output.summary)?;

    let rt_series = dir.join("rt_vs_t.dat");
    write_rt_series(&rt_series, &output.records)?;

    let mut qtable_snapshots = Vec::with_capacity(output.snapshots.len());
    for (t, snap) in &output.snapshots {
        let path = dir.join(format!("qtable_{t:06}.json"));
        write_qtable_snapshot(&path, snap)?;
        qtable_snapshots.push(path);
    }

    let qtable_final = match &output.final_table {
        Some(snap) => {
            let path = dir.join("qtable_final.json");
            write_qtable_snapshot(&path, snap)?;
            Some(path)
        }
        None => None,
    };

    Ok(EmittedFiles {
        steps_csv,
        summary_json,
        rt_series,
        qtable_snapshots,
        qtable_final,
    })
}
