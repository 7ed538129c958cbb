use alloc::vec::Vec;
use core::str::FromStr;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use super::{rng_for, SimError};
use crate::sphere::{PoseSE3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TrajectoryMode {
    /// Small loop around a point while turning: mostly rotation, short baselines.
    EgocentricOrbit,
    /// Straight walk with a lateral weave: large translation between frames.
    NonEgocentricSweep,
}

impl FromStr for TrajectoryMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ego" | "egocentric" | "egocentric-orbit" => Ok(TrajectoryMode::EgocentricOrbit),
            "nonego" | "non-egocentric" | "non-egocentric-sweep" => Ok(TrajectoryMode::NonEgocentricSweep),
            other => Err(SimError::UnknownTrajectory(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectorySpec {
    pub mode: TrajectoryMode,
    pub frames: usize,
    /// Distance travelled per frame, scene units.
    pub step: f64,
    /// Yaw added per frame, radians.
    pub rotation_per_frame: f64,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn egocentric(frames: usize, seed: u64) -> Self {
        Self {
            mode: TrajectoryMode::EgocentricOrbit,
            frames,
            step: 0.12,
            rotation_per_frame: 4f64.to_radians(),
            seed,
        }
    }

    pub fn non_egocentric(frames: usize, seed: u64) -> Self {
        Self {
            mode: TrajectoryMode::NonEgocentricSweep,
            frames,
            step: 0.3,
            rotation_per_frame: 2f64.to_radians(),
            seed,
        }
    }

    pub fn for_mode(mode: TrajectoryMode, frames: usize, seed: u64) -> Self {
        match mode {
            TrajectoryMode::EgocentricOrbit => Self::egocentric(frames, seed),
            TrajectoryMode::NonEgocentricSweep => Self::non_egocentric(frames, seed),
        }
    }
}

/// World-frame camera poses for a trajectory. Frame 0 starts at the origin.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<PoseSE3>, SimError> {
    if spec.frames == 0 {
        return Err(SimError::InvalidSpec("trajectory needs at least one frame"));
    }
    if !(spec.step >= 0.0) {
        return Err(SimError::InvalidSpec("trajectory step must be non-negative"));
    }
    let mut rng = rng_for(spec.seed, &[0x7a1, spec.mode as u64]);
    let phase: [f64; 4] = core::array::from_fn(|_| rng.random_range(0.0..core::f64::consts::TAU));
    let tilt = 2f64.to_radians();
    let mut poses = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let fi = i as f64;
        let position = match spec.mode {
            TrajectoryMode::EgocentricOrbit => {
                let radius = 0.6;
                let a = fi * spec.step / radius;
                Vec3::new(radius * (a.cos() - 1.0), radius * a.sin(), 0.04 * (0.7 * fi + phase[0]).sin())
            }
            TrajectoryMode::NonEgocentricSweep => {
                let start = -0.5 * spec.step * (spec.frames.saturating_sub(1)) as f64;
                Vec3::new(
                    start + fi * spec.step,
                    0.35 * (0.45 * fi + phase[0]).sin(),
                    0.08 * (0.6 * fi + phase[1]).sin(),
                )
            }
        };
        let roll = tilt * (0.5 * fi + phase[2]).sin();
        let pitch = tilt * (0.4 * fi + phase[3]).sin();
        let yaw = fi * spec.rotation_per_frame;
        let rotation = nalgebra::UnitQuaternion::from_euler_angles(roll, pitch, yaw);
        poses.push(PoseSE3::from_parts(rotation, position));
    }
    Ok(poses)
}

/// Re-expresses `poses` so that the first one is the identity.
pub fn relative_to_first(poses: &[PoseSE3]) -> Vec<PoseSE3> {
    let Some(first) = poses.first() else {
        return Vec::new();
    };
    let inv = first.inverse();
    let mut out: Vec<PoseSE3> = poses.iter().map(|p| inv.compose(p)).collect();
    out[0] = PoseSE3::identity();
    out
}
