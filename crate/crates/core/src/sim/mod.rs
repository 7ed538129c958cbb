//! Synthetic ground truth: scenes, panoramic ray casting, trajectories,
//! monocular-depth corruption and correspondence injection.

mod corruption;
mod matches;
mod scene;
mod trajectory;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use corruption::{corrupt_depth, CorruptedDepth, DepthCorruption, DepthRegime};
pub use matches::{inject_matches, MatchSpec, PixelMatch};
pub use scene::{generate_scene, raycast_pano, Hit, ScenePreset, Sphere, SyntheticScene, Texture, Triangle};
pub use trajectory::{generate_trajectory, relative_to_first, TrajectoryMode, TrajectorySpec};

use crate::dataset::{Dataset, Frame};
use crate::pano::Pano;
use crate::sphere::{EquirectGrid, SphereError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown scene preset `{0}` (expected room or courtyard)")]
    UnknownPreset(String),
    #[error("unknown trajectory mode `{0}` (expected ego or nonego)")]
    UnknownTrajectory(String),
    #[error("unknown depth regime `{0}` (expected absolute, scale or affine)")]
    UnknownRegime(String),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(&'static str),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Deterministic generator for a seed and a stream label.
pub(crate) fn rng_for(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed ^ 0x6a09_e667_f3bc_c908);
    for s in stream {
        h = splitmix(h ^ s.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Everything needed to synthesize a dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub preset: ScenePreset,
    pub scene_seed: u64,
    /// Panorama height in pixels; width is twice this.
    pub height: usize,
    pub trajectory: TrajectorySpec,
    pub corruption: DepthCorruption,
    pub matches: MatchSpec,
    /// Matches are generated for every pair `(k, t)` with `t - window <= k < t`.
    pub match_window: usize,
}

impl SimConfig {
    pub fn new(preset: ScenePreset, mode: TrajectoryMode, regime: DepthRegime, frames: usize, seed: u64) -> Self {
        Self {
            preset,
            scene_seed: seed,
            height: 64,
            trajectory: TrajectorySpec::for_mode(mode, frames, seed),
            corruption: DepthCorruption::preset(regime, seed),
            matches: MatchSpec {
                seed,
                ..MatchSpec::default()
            },
            match_window: 4,
        }
    }
}

/// Renders a full dataset.
///
/// Colors are quantized to 8 bits and depths to `f32` so the in-memory result
/// is exactly what a round trip through the on-disk format yields.
pub fn simulate(cfg: &SimConfig) -> Result<Dataset, SimError> {
    let grid = EquirectGrid::with_height(cfg.height)?;
    let scene = generate_scene(cfg.preset, cfg.scene_seed);
    let poses = generate_trajectory(&cfg.trajectory)?;
    let mut frames = Vec::with_capacity(poses.len());
    let mut gt_depths = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let (color, depth) = raycast_pano(&scene, pose, &grid);
        let depth = quantize_depth(&depth);
        let mono = corrupt_depth(&depth, &cfg.corruption, i)?.depth;
        frames.push(Frame {
            color: color.map(|c| c.map(quantize_channel)),
            mono_depth: quantize_depth(&mono),
        });
        gt_depths.push(depth);
    }
    let mut matches = BTreeMap::new();
    for t in 1..poses.len() {
        for k in t.saturating_sub(cfg.match_window)..t {
            let mut m = inject_matches(k, t, &poses, &gt_depths, &cfg.matches)?;
            for pm in &mut m {
                pm.src.row = pm.src.row as f32 as f64;
                pm.src.col = pm.src.col as f32 as f64;
                pm.dst.row = pm.dst.row as f32 as f64;
                pm.dst.col = pm.dst.col as f32 as f64;
            }
            matches.insert((k, t), m);
        }
    }
    Ok(Dataset {
        grid,
        frames,
        matches,
        gt_poses: Some(relative_to_first(&poses)),
        gt_depths: Some(gt_depths),
    })
}

/// Nearest 8-bit level, as stored in PNG.
pub fn quantize_channel(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() / 255.0
}

fn quantize_depth(d: &Pano<f64>) -> Pano<f64> {
    d.map(|v| *v as f32 as f64)
}
