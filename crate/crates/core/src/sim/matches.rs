//! Ground-truth correspondence provider with pixel noise and outliers.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{rng_for, SimError};
use crate::pano::DepthPano;
use crate::sphere::{PixelCoord, Point3, PoseSE3};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchSpec {
    /// Matches requested per frame pair.
    pub count: usize,
    /// Per-axis Gaussian noise on the destination pixel, in pixels.
    pub pixel_sigma: f64,
    /// Fraction of pairs whose destination is replaced by a uniform random pixel.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl MatchSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.pixel_sigma >= 0.0) {
            return Err(SimError::InvalidSpec("match pixel noise must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(SimError::InvalidSpec("outlier fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

impl Default for MatchSpec {
    fn default() -> Self {
        Self {
            count: 400,
            pixel_sigma: 0.1,
            outlier_fraction: 0.1,
            seed: 0,
        }
    }
}

/// A pixel in frame `k` paired with a pixel in frame `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelMatch {
    pub src: PixelCoord,
    pub dst: PixelCoord,
    /// True when `dst` was drawn at random. Only the simulator knows this.
    pub outlier: bool,
}

/// Relative depth agreement required for a reprojected source point to count
/// as visible in the destination frame.
const VISIBILITY_TOLERANCE: f64 = 0.01;

/// Samples up to `spec.count` covisible pixel pairs between frames `k` and `t`.
///
/// Sources are integer pixel centers off the two pole rows. A source is kept
/// only if its ground-truth reprojection into frame `t` lands on a surface at
/// the same distance (within 1%), so occluded points never become inliers.
/// An empty result means the frames share no visible surface.
pub fn inject_matches(k: usize, t: usize, poses: &[PoseSE3], depths: &[DepthPano], spec: &MatchSpec) -> Result<Vec<PixelMatch>, SimError> {
    spec.validate()?;
    let (Some(pose_k), Some(pose_t), Some(depth_k), Some(depth_t)) = (poses.get(k), poses.get(t), depths.get(k), depths.get(t)) else {
        return Err(SimError::InvalidSpec("match frames must index the supplied poses and depths"));
    };
    let grid = *depth_k.grid();
    if depth_t.grid() != &grid {
        return Err(SimError::InvalidSpec("match frames must share one grid"));
    }
    let (h, w) = (grid.height(), grid.width());
    let mut rng = rng_for(spec.seed, &[0x3a7c, k as u64, t as u64]);
    let noise = Normal::new(0.0, spec.pixel_sigma).map_err(|_| SimError::InvalidSpec("bad pixel noise"))?;
    let k_to_t = pose_t.inverse().compose(pose_k);

    let mut out = Vec::with_capacity(spec.count);
    let max_tries = 40 * spec.count.max(1);
    let mut tries = 0;
    while out.len() < spec.count && tries < max_tries && h > 2 {
        tries += 1;
        let r = rng.random_range(1..h - 1);
        let c = rng.random_range(0..w);
        let d = *depth_k.get(r, c);
        if !crate::pano::is_valid_depth(d) {
            continue;
        }
        let x = Point3::from(grid.dir_at(r as f64, c as f64) * d);
        let y = k_to_t.transform(&x);
        let dist = y.coords.norm();
        if !(dist > 0.0) {
            continue;
        }
        let (pr, pc) = grid.project(&y.coords);
        if pr < 0.0 || pr > (h - 1) as f64 {
            continue;
        }
        let Some(seen) = depth_t.sample(pr, pc) else {
            continue;
        };
        if (seen - dist).abs() > VISIBILITY_TOLERANCE * dist {
            continue;
        }
        let nr = (pr + noise.sample(&mut rng)).clamp(0.0, (h - 1) as f64);
        let nc = (pc + noise.sample(&mut rng)) % w as f64;
        let nc = if nc < 0.0 { nc + w as f64 } else { nc };
        out.push(PixelMatch {
            src: PixelCoord::new(r as f64, c as f64),
            dst: PixelCoord::new(nr, nc),
            outlier: false,
        });
    }

    let n_out = (spec.outlier_fraction * out.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..out.len()).collect();
    idx.shuffle(&mut rng);
    for &i in idx.iter().take(n_out) {
        out[i].dst = PixelCoord::new(rng.random_range(0.0..h as f64 - 1.0), rng.random_range(0.0..w as f64));
        out[i].outlier = true;
    }
    Ok(out)
}
