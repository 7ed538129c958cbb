//! Dataset directories.
//!
//! ```text
//! DIR/frames/00000.color.png   8-bit RGB panorama
//! DIR/frames/00000.mono.pfm    monocular depth (input to the pipeline)
//! DIR/frames/00000.depth.pfm   ground-truth ray depth (optional)
//! DIR/matches/00000_00001.csv  pixel matches from frame k into frame t > k
//! DIR/gt_trajectory.txt        ground-truth poses, TUM (optional)
//! ```
//!
//! Frames are numbered from 0 without gaps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use omnipose_core::dataset::{Dataset, Frame};

use crate::error::{format, io, Result};
use crate::formats::matches::{pair_name, parse_pair_name};
use crate::formats::{read_color_png, read_matches, read_pfm, read_tum, write_color_png, write_matches, write_pfm, write_tum};

pub const FRAMES_DIR: &str = "frames";
pub const MATCHES_DIR: &str = "matches";
pub const GT_TRAJECTORY: &str = "gt_trajectory.txt";

pub fn color_name(i: usize) -> String {
    format!("{i:05}.color.png")
}

pub fn mono_name(i: usize) -> String {
    format!("{i:05}.mono.pfm")
}

pub fn depth_name(i: usize) -> String {
    format!("{i:05}.depth.pfm")
}

pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    let frames = dir.join(FRAMES_DIR);
    let matches = dir.join(MATCHES_DIR);
    fs::create_dir_all(&frames).map_err(io(&frames))?;
    fs::create_dir_all(&matches).map_err(io(&matches))?;
    for (i, f) in ds.frames.iter().enumerate() {
        write_color_png(&frames.join(color_name(i)), &f.color)?;
        write_pfm(&frames.join(mono_name(i)), &f.mono_depth)?;
    }
    if let Some(depths) = &ds.gt_depths {
        for (i, d) in depths.iter().enumerate() {
            write_pfm(&frames.join(depth_name(i)), d)?;
        }
    }
    for ((k, t), m) in &ds.matches {
        write_matches(&matches.join(pair_name(*k, *t)), m)?;
    }
    if let Some(poses) = &ds.gt_poses {
        write_tum(&dir.join(GT_TRAJECTORY), poses)?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let frames_dir = dir.join(FRAMES_DIR);
    let mut frames = Vec::new();
    while frames_dir.join(color_name(frames.len())).is_file() {
        let i = frames.len();
        let color = read_color_png(&frames_dir.join(color_name(i)))?;
        let mono_depth = read_pfm(&frames_dir.join(mono_name(i)))?;
        if i > 0 && color.grid() != frames.first().map(|f: &Frame| f.color.grid()).unwrap() {
            return Err(format(&frames_dir.join(color_name(i)), "frame size differs from frame 0"));
        }
        color.ensure_same_grid(&mono_depth)?;
        frames.push(Frame { color, mono_depth });
    }
    let Some(first) = frames.first() else {
        return Err(format(&frames_dir, "no frames (expected 00000.color.png)"));
    };
    let grid = *first.color.grid();
    let n = frames.len();

    let depth_paths: Vec<_> = (0..n).map(|i| frames_dir.join(depth_name(i))).collect();
    let gt_depths = if depth_paths.iter().all(|p| p.is_file()) {
        let mut v = Vec::with_capacity(n);
        for p in &depth_paths {
            let d = read_pfm(p)?;
            d.ensure_same_grid(&frames[0].color)?;
            v.push(d);
        }
        Some(v)
    } else {
        None
    };

    let mut matches = BTreeMap::new();
    let mdir = dir.join(MATCHES_DIR);
    if mdir.is_dir() {
        for entry in fs::read_dir(&mdir).map_err(io(&mdir))? {
            let entry = entry.map_err(io(&mdir))?;
            let name = entry.file_name();
            let Some((k, t)) = name.to_str().and_then(parse_pair_name) else {
                continue;
            };
            if k >= t || t >= n {
                return Err(format(&entry.path(), format!("pair ({k}, {t}) is not k < t < {n}")));
            }
            matches.insert((k, t), read_matches(&entry.path())?);
        }
    }

    let gt_path = dir.join(GT_TRAJECTORY);
    let gt_poses = if gt_path.is_file() {
        let tr = read_tum(&gt_path)?;
        if tr.poses.len() != n {
            return Err(format(&gt_path, format!("{} poses for {n} frames", tr.poses.len())));
        }
        Some(tr.poses)
    } else {
        None
    };

    Ok(Dataset {
        grid,
        frames,
        matches,
        gt_poses,
        gt_depths,
    })
}
