//! Single-channel PFM depth maps.
//!
//! Header `Pf\n<width> <height>\n<scale>\n`, then `f32` samples with rows
//! stored bottom to top. A negative scale means little-endian. Invalid depth
//! is written as `+inf`.

use std::fs;
use std::io::Write;
use std::path::Path;

use omnipose_core::pano::{DepthPano, Pano};
use omnipose_core::sphere::EquirectGrid;

use crate::error::{format, io, Error, Result};

pub fn encode_pfm(depth: &DepthPano, out: &mut impl Write) -> std::io::Result<()> {
    let g = depth.grid();
    write!(out, "Pf\n{} {}\n-1.0\n", g.width(), g.height())?;
    let mut buf = Vec::with_capacity(g.len() * 4);
    for r in (0..g.height()).rev() {
        for c in 0..g.width() {
            let d = *depth.get(r, c);
            let v = if d.is_nan() { f32::INFINITY } else { d as f32 };
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
}

/// Parses a PFM image into `(height, width, row-major samples top to bottom)`.
pub fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), String> {
    let mut pos = 0;
    let mut token = || -> Result<&str, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        std::str::from_utf8(&bytes[start..pos]).map_err(|_| "header is not ASCII".to_string())
    };
    match token()? {
        "Pf" => {}
        "PF" => return Err("three-channel PFM is not a depth map".into()),
        other => return Err(format!("bad magic `{other}`")),
    }
    let width: usize = token()?.parse().map_err(|e| format!("bad width: {e}"))?;
    let height: usize = token()?.parse().map_err(|e| format!("bad height: {e}"))?;
    let scale: f64 = token()?.parse().map_err(|e| format!("bad scale: {e}"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("scale must be non-zero".into());
    }
    // Exactly one whitespace byte separates the header from the samples.
    pos += 1;
    let n = width.checked_mul(height).ok_or("image too large")?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n * 4 {
        return Err(format!("expected {} sample bytes, found {}", n * 4, body.len()));
    }
    let mut data = vec![0f32; n];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (r, c) = (height - 1 - i / width, i % width);
        data[r * width + c] = v;
    }
    Ok((height, width, data))
}

pub fn write_pfm(path: &Path, depth: &DepthPano) -> Result<()> {
    let mut buf = Vec::new();
    encode_pfm(depth, &mut buf).map_err(io(path))?;
    fs::write(path, buf).map_err(io(path))
}

/// Reads a depth map. Non-finite and non-positive samples become `+inf`.
pub fn read_pfm(path: &Path) -> Result<DepthPano> {
    let bytes = fs::read(path).map_err(io(path))?;
    let (h, w, data) = decode_pfm(&bytes).map_err(|m| format(path, m))?;
    let grid = EquirectGrid::new(h, w).map_err(Error::from)?;
    let data = data
        .into_iter()
        .map(|v| {
            let d = v as f64;
            if d.is_finite() && d > 0.0 {
                d
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(Pano::from_vec(grid, data)?)
}
