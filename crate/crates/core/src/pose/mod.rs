//! Camera pose estimation: 2D-3D correspondences from rendered depth, a robust
//! spherical reprojection solver, and masked photometric refinement.

mod correspondence;
mod refine;
mod solver;
mod ssim;

pub use correspondence::{build_correspondences, Correspondence2D3D, CorrespondenceOptions, MatchSet};
pub use refine::{photometric_loss, refine_pose_photometric, RefineConfig, RefineOutcome, RefineStatus};
pub use solver::{objective, solve_pose, PoseEstimate, SolverConfig};
pub use ssim::{dssim, ssim, ssim_components, ssim_map, ssim_map_rgb, SsimComponents, SsimError};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("insufficient correspondences: {got} usable, {need} required")]
    InsufficientCorrespondences { got: usize, need: usize },
    #[error("match refers to frame {0}, which has no pose/depth/mask")]
    UnknownFrame(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Pano(#[from] crate::pano::PanoError),
}
