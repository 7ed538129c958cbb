//! Pinned tolerances and runtime budgets for the acceptance suite.
//!
//! Values come straight from the acceptance criteria; anything added here
//! beyond them (sample sizes, seeds, oracle settings) is marked as such.

use std::time::Duration;

// 1. Geometry
pub const TANGENT_SAMPLES: usize = 10_000;
pub const TANGENT_VS_ARCCOS: f64 = 1e-9;
pub const ROUND_TRIP_PX: f64 = 1e-6;
pub const GEOMETRY_BUDGET: Duration = Duration::from_secs(1);
/// The arccos oracle loses digits near antipodal pairs (its derivative blows
/// up), so pairs with u.v below this are resampled. Not part of the criterion.
pub const ORACLE_MIN_DOT: f64 = -0.999;

// 2. Consistency check
pub const EPS_TAN: f64 = 0.008;
pub const EPS_DEP: f64 = 0.05;
pub const DEPTH_SCALING: f64 = 1.06;
pub const CONSISTENCY_BUDGET: Duration = Duration::from_secs(1);

// 3. Solver
pub const SOLVER_SETS: usize = 200;
pub const NOISELESS_ROT: f64 = 1e-6;
pub const NOISELESS_TRANS: f64 = 1e-6;
pub const OUTLIER_FRACTION: f64 = 0.2;
pub const OUTLIER_ROT: f64 = 1e-3;
pub const OUTLIER_TRANS: f64 = 1e-3;
pub const SOLVER_BUDGET: Duration = Duration::from_secs(30);

// 4. Mask ablation
pub const CORRUPTED_PIXEL_FRACTION: f64 = 0.10;
pub const ABLATION_SEEDS: u64 = 5;
pub const ABLATION_BUDGET: Duration = Duration::from_secs(60);

// 5. Depth alignment
pub const AFFINE_SCALE: f64 = 0.5;
pub const AFFINE_SHIFT: f64 = -1.0;
pub const AFFINE_EXACT: f64 = 1e-9;
pub const AFFINE_SIM_ROUND_TRIP: f64 = 1e-3;
pub const ALIGNMENT_BUDGET: Duration = Duration::from_secs(5);

// 6. Accumulation and pruning
pub const PRUNE_INLIER: f64 = 0.8;
pub const RESET_INCONSISTENT: f64 = 0.8;
pub const ACCUMULATION_BUDGET: Duration = Duration::from_secs(1);

// 7. End-to-end benchmark
pub const BENCH_FRAMES: usize = 12;
pub const ABSOLUTE_SCALE_SIGMA: f64 = 0.02;
pub const EGO_ATE_OF_DIAMETER: f64 = 0.01;
pub const EGO_RPE_R_MEDIAN_DEG: f64 = 0.5;
pub const NONEGO_ATE_OF_DIAMETER: f64 = 0.02;
pub const BENCH_BUDGET: Duration = Duration::from_secs(300);
/// Grid oracle: half-width in steps of the first and later levels, initial
/// steps (radians, scene units) and number of halvings. Not part of the criterion.
pub const ORACLE_FIRST_LEVEL: i32 = 4;
pub const ORACLE_LEVEL: i32 = 2;
pub const ORACLE_LEVELS: usize = 28;
pub const ORACLE_ROT_STEP: f64 = 0.04;
pub const ORACLE_TRANS_STEP: f64 = 0.08;

// 8. Densification efficacy
pub const DIA_SEEDS: u64 = 3;
pub const DIA_BUDGET: Duration = Duration::from_secs(300);

// 9. Determinism. The criterion sets no budget; this one only catches hangs.
pub const DETERMINISM_BUDGET: Duration = Duration::from_secs(120);
