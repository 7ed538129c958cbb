use alloc::vec::Vec;

use super::PoseError;
use crate::pano::{DepthPano, MaskPano};
use crate::sim::PixelMatch;
use crate::sphere::{polar_weight, Point3, PoseSE3, UnitDir};

/// A world point and the direction it is observed along in the new frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Correspondence2D3D {
    pub point: Point3,
    pub observed: UnitDir,
    /// Static part of the weight: polar weight of the observation times the
    /// consistency mask. The solver multiplies in the polar weight of the
    /// reprojected direction at each iterate.
    pub weight: f64,
    pub source_frame: usize,
}

/// Matches from visited frame `frame` into the new frame.
#[derive(Debug, Clone, Copy)]
pub struct MatchSet<'a> {
    pub frame: usize,
    pub matches: &'a [PixelMatch],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CorrespondenceOptions {
    /// Drop matches whose source pixel fails the cross-frame consistency mask.
    pub use_mask: bool,
    /// Weight by the sine of the observed colatitude.
    pub polar_weighting: bool,
}

impl Default for CorrespondenceOptions {
    fn default() -> Self {
        Self {
            use_mask: true,
            polar_weighting: true,
        }
    }
}

/// Lifts each match's source pixel to a world point through the rendered
/// depth of its frame.
///
/// Matches are dropped where the depth is missing or, with `use_mask`, where
/// the mask is 0 at the nearest pixel. `masks` may be empty when masks are
/// not used.
pub fn build_correspondences(
    sets: &[MatchSet<'_>],
    depths: &[DepthPano],
    masks: &[MaskPano],
    poses: &[PoseSE3],
    opts: &CorrespondenceOptions,
) -> Result<Vec<Correspondence2D3D>, PoseError> {
    let mut out = Vec::new();
    for set in sets {
        let k = set.frame;
        let (Some(depth), Some(pose)) = (depths.get(k), poses.get(k)) else {
            return Err(PoseError::UnknownFrame(k));
        };
        let mask = if opts.use_mask {
            let m = masks.get(k).ok_or(PoseError::UnknownFrame(k))?;
            m.ensure_same_grid(depth)?;
            Some(m)
        } else {
            None
        };
        let g = *depth.grid();
        for pm in set.matches {
            if !g.contains(&pm.src) || !g.contains(&pm.dst) {
                continue;
            }
            if let Some(m) = mask {
                let (r, c) = pm.src.nearest(&g);
                if !*m.get(r, c) {
                    continue;
                }
            }
            let Some(d) = depth.sample(pm.src.row, pm.src.col) else {
                continue;
            };
            let x = pose.transform(&Point3::from(g.dir_at(pm.src.row, pm.src.col) * d));
            let Some(observed) = UnitDir::normalize(g.dir_at(pm.dst.row, pm.dst.col)) else {
                continue;
            };
            let weight = if opts.polar_weighting { polar_weight(&observed) } else { 1.0 };
            out.push(Correspondence2D3D {
                point: x,
                observed,
                weight,
                source_frame: k,
            });
        }
    }
    if out.is_empty() {
        return Err(PoseError::InsufficientCorrespondences { got: 0, need: 1 });
    }
    Ok(out)
}
