//! Geometric core for pose-free reconstruction from 360-degree video.
//!
//! The crate estimates camera poses for equirectangular frames one at a time
//! and grows a surfel map from monocular depth, keeping only depth that is
//! consistent across views. Everything here is `no_std` + `alloc`; file
//! formats and the command-line tool live in the `omnipose` crate.
//!
//! Modules, bottom-up:
//!
//! - [`sphere`]: equirectangular camera model, rigid poses, tangent error;
//! - [`pano`]: per-frame rasters (color, depth, masks);
//! - [`sim`]: synthetic scenes, trajectories, depth corruption, matches;
//! - [`splat`]: the surfel map, its renderer and bookkeeping;
//! - [`consistency`]: reprojection consistency, depth alignment, NCC masks;
//! - [`pose`]: correspondence construction, robust pose solver, photometric refinement;
//! - [`pipeline`]: the incremental frame loop and evaluation metrics.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod consistency;
pub mod dataset;
pub mod pano;
pub mod pipeline;
pub mod pose;
pub mod sim;
pub mod sphere;
pub mod splat;
