//! TUM trajectories: `stamp tx ty tz qx qy qz qw` per line, `#` comments.
//! The stamp column holds the frame index for trajectories written here.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use omnipose_core::sphere::PoseSE3;

use crate::error::{format, io, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub stamps: Vec<f64>,
    pub poses: Vec<PoseSE3>,
}

pub fn encode_tum(poses: &[PoseSE3]) -> String {
    let mut s = String::new();
    for (i, p) in poses.iter().enumerate() {
        let (t, q) = p.to_tum();
        writeln!(s, "{i} {} {} {} {} {} {} {}", t[0], t[1], t[2], q[0], q[1], q[2], q[3]).unwrap();
    }
    s
}

pub fn write_tum(path: &Path, poses: &[PoseSE3]) -> Result<()> {
    fs::write(path, encode_tum(poses)).map_err(io(path))
}

pub fn decode_tum(text: &str) -> Result<Trajectory, String> {
    let mut out = Trajectory {
        stamps: Vec::new(),
        poses: Vec::new(),
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        if v.len() != 8 {
            return Err(format!("line {}: expected 8 columns, found {}", n + 1, v.len()));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(format!("line {}: non-finite value", n + 1));
        }
        if out.stamps.last().is_some_and(|s| *s >= v[0]) {
            return Err(format!("line {}: stamps must increase", n + 1));
        }
        let qn = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if !(qn > 0.5 && qn < 2.0) {
            return Err(format!("line {}: quaternion norm {qn} is far from 1", n + 1));
        }
        out.stamps.push(v[0]);
        out.poses
            .push(PoseSE3::from_translation_quaternion([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]]));
    }
    Ok(out)
}

pub fn read_tum(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    decode_tum(&text).map_err(|m| format(path, m))
}
