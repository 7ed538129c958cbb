//! ASCII PLY snapshots of the surfel map.
//!
//! Besides the fields viewers expect (`x y z`, `nx ny nz`, `red green blue`
//! as bytes) each vertex carries the full surfel: tangent axis, both radii,
//! exact float color, opacity and source frame, so a snapshot reloads into
//! the same map.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use omnipose_core::sphere::{Point3, Vec3};
use omnipose_core::splat::{Surfel, SurfelMap};

use crate::error::{format, io, Result};

const FLOATS: [&str; 16] = [
    "x", "y", "z", "nx", "ny", "nz", "tx", "ty", "tz", "radius_u", "radius_v", "r", "g", "b", "opacity", "radius",
];

pub fn encode_ply(map: &SurfelMap) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\ncomment omnipose surfel map\n");
    writeln!(s, "element vertex {}", map.len()).unwrap();
    for name in FLOATS {
        writeln!(s, "property double {name}").unwrap();
    }
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    s.push_str("property uint source_frame\nend_header\n");
    for f in map.surfels() {
        let p = f.position;
        let byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8;
        writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            p.x,
            p.y,
            p.z,
            f.normal.x,
            f.normal.y,
            f.normal.z,
            f.tangent.x,
            f.tangent.y,
            f.tangent.z,
            f.radii[0],
            f.radii[1],
            f.color[0],
            f.color[1],
            f.color[2],
            f.opacity,
            f.radius(),
            byte(f.color[0]),
            byte(f.color[1]),
            byte(f.color[2]),
            f.source_frame
        )
        .unwrap();
    }
    s
}

/// Parses an ASCII PLY written by [`encode_ply`]. Extra properties are
/// ignored; property order may differ.
pub fn decode_ply(text: &str) -> Result<SurfelMap, String> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err("missing `ply` magic".into());
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        let Some((n, line)) = lines.next() else {
            return Err("header has no end_header".into());
        };
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] if *fmt != "ascii" => return Err(format!("unsupported format `{fmt}`")),
            ["element", "vertex", c] => {
                count = Some(c.parse::<usize>().map_err(|e| format!("line {}: {e}", n + 1))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] if in_vertex => return Err("list properties are not supported".into()),
            ["property", _, name] if in_vertex => props.push((*name).to_string()),
            _ => {}
        }
    }
    let count = count.ok_or("no vertex element")?;
    let col = |name: &str| props.iter().position(|p| p == name).ok_or(format!("missing property `{name}`"));
    let idx: Vec<usize> = FLOATS[..15].iter().map(|n| col(n)).collect::<Result<_, _>>()?;
    let src = col("source_frame")?;

    let mut surfels = Vec::with_capacity(count);
    for (n, line) in lines.by_ref().take(count) {
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != props.len() {
            return Err(format!("line {}: expected {} values, found {}", n + 1, props.len(), v.len()));
        }
        let f: Vec<f64> = idx
            .iter()
            .map(|i| v[*i].parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        surfels.push(Surfel {
            position: Point3::new(f[0], f[1], f[2]),
            normal: Vec3::new(f[3], f[4], f[5]),
            tangent: Vec3::new(f[6], f[7], f[8]),
            radii: [f[9], f[10]],
            color: [f[11], f[12], f[13]],
            opacity: f[14],
            source_frame: v[src].parse().map_err(|e| format!("line {}: {e}", n + 1))?,
        });
    }
    if surfels.len() != count {
        return Err(format!("expected {count} vertices, found {}", surfels.len()));
    }
    Ok(SurfelMap::from_surfels(surfels))
}

pub fn write_ply(path: &Path, map: &SurfelMap) -> Result<()> {
    fs::write(path, encode_ply(map)).map_err(io(path))
}

pub fn read_ply(path: &Path) -> Result<SurfelMap> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    decode_ply(&text).map_err(|m| format(path, m))
}
