//! In-memory dataset: what the pipeline consumes, independent of file layout.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::pano::{ColorPano, DepthPano};
use crate::sim::PixelMatch;
use crate::sphere::{EquirectGrid, PoseSE3};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub color: ColorPano,
    /// Monocular depth prediction (arbitrary scale/shift depending on the model).
    pub mono_depth: DepthPano,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: EquirectGrid,
    pub frames: Vec<Frame>,
    /// Pixel matches keyed by `(k, t)` with `k < t`: `src` lies in frame `k`,
    /// `dst` in frame `t`.
    pub matches: BTreeMap<(usize, usize), Vec<PixelMatch>>,
    /// Ground-truth camera-to-world poses relative to frame 0, when known.
    pub gt_poses: Option<Vec<PoseSE3>>,
    /// Ground-truth ray depths, when known.
    pub gt_depths: Option<Vec<DepthPano>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn matches_between(&self, k: usize, t: usize) -> &[PixelMatch] {
        self.matches.get(&(k, t)).map_or(&[], |m| m.as_slice())
    }
}
