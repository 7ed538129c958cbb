//! Metrics JSON, per-frame CSV tables and the JSONL run log.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use omnipose_core::pipeline::{FrameErrors, FrameLog, RenderMetrics, TrajectoryMetrics};
use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};

/// Status of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Frames whose pose was extrapolated after a solver failure.
    pub flagged: Vec<usize>,
    pub failed: bool,
    pub map_size: usize,
    pub held_out: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryMetrics>,
    /// Novel-view quality on held-out frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderMetrics>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(io(path))
}

pub fn read_metrics(path: &Path) -> Result<Metrics> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `frame,ate,rpe_t,rpe_r_deg`; RPE cells are empty for frame 0.
pub fn frame_errors_csv(rows: &[FrameErrors]) -> String {
    let mut s = String::from("frame,ate,rpe_t,rpe_r_deg\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.frame, r.ate, opt(r.rpe_t), opt(r.rpe_r_deg)).unwrap();
    }
    s
}

pub fn write_frame_errors_csv(path: &Path, rows: &[FrameErrors]) -> Result<()> {
    fs::write(path, frame_errors_csv(rows)).map_err(io(path))
}

pub fn log_jsonl(log: &[FrameLog]) -> String {
    let mut s = String::new();
    for entry in log {
        s.push_str(&serde_json::to_string(entry).expect("log serializes"));
        s.push('\n');
    }
    s
}

pub fn write_log_jsonl(path: &Path, log: &[FrameLog]) -> Result<()> {
    fs::write(path, log_jsonl(log)).map_err(io(path))
}
