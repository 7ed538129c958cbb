//! The incremental frame loop and evaluation.
//!
//! Frame 0 fixes the world frame and seeds the map from its monocular depth.
//! Every later frame is tracked against renders of the map (consistency-masked
//! correspondences into the robust solver), after which the visited frames are
//! densified with depth inliers, recent poses are refined photometrically and
//! surfel colors are refreshed.

pub mod metrics;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use metrics::{
    align_similarity, eval_render, eval_trajectory, psnr_masked, ssim_masked, ErrorStats, FrameErrors, FrameRender, RenderMetrics,
    Similarity, TrajectoryMetrics,
};

use crate::consistency::{
    adjacent_mask, align_depth, cross_frame_mask, inconsistency_mask, inlier_mask, ncc_compare, pairwise_consistency, patch_ncc,
    warp_luminance, ConsistencyError, ConsistencyThresholds,
};
use crate::dataset::Dataset;
use crate::pano::{DepthPano, MaskPano, Pano, PanoError};
use crate::pose::{
    build_correspondences, refine_pose_photometric, solve_pose, Correspondence2D3D, CorrespondenceOptions, MatchSet, PoseError,
    RefineConfig, RefineStatus, SolverConfig,
};
use crate::sphere::PoseSE3;
use crate::splat::{init_from_depth, render, seeds_from_depth, MaskChannel, PruneThresholds, RenderOutput, SplatError, SurfelMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("dataset has no frames")]
    EmptyDataset,
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("frame {0} is missing")]
    MissingFrame(usize),
    #[error("trajectory lengths differ: {estimated} estimated vs {ground_truth} ground truth")]
    LengthMismatch { estimated: usize, ground_truth: usize },
    #[error(transparent)]
    Pano(#[from] PanoError),
    #[error(transparent)]
    Splat(#[from] SplatError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// How the solver is initialized for a new frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MotionModel {
    /// Previous pose.
    #[default]
    ConstantPosition,
    /// Previous pose advanced by the last relative motion.
    ConstantVelocity,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    /// Pixel stride for seeding surfels from depth (initial map and merges).
    pub stride: usize,
    pub consistency: ConsistencyThresholds,
    pub prune: PruneThresholds,
    /// Side of the square NCC patch (odd, at least 3).
    pub ncc_patch: usize,
    /// Uncovered pixels are filled from aligned depth when it is consistent
    /// with its neighbours and its warp scores at least this NCC.
    pub fill_ncc: f64,
    /// Merge depth inliers and prune superseded surfels. Off leaves the map as
    /// initialized from frame 0.
    pub densify: bool,
    pub correspondences: CorrespondenceOptions,
    pub solver: SolverConfig,
    pub motion_model: MotionModel,
    pub refine: RefineConfig,
    /// Number of most recent frames refined after each new frame; 0 disables refinement.
    pub refine_window: usize,
    /// Refine every visited frame instead of the window.
    pub refine_all: bool,
    /// Every `holdout`-th frame (indices `holdout-1, 2*holdout-1, ...`) is
    /// tracked but kept out of the map, for novel-view evaluation. 0 disables.
    pub holdout: usize,
    /// The run is marked failed when more than this fraction of frames had to
    /// be extrapolated.
    pub max_flagged_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stride: 2,
            consistency: ConsistencyThresholds::default(),
            prune: PruneThresholds::default(),
            ncc_patch: 7,
            fill_ncc: 0.5,
            densify: true,
            correspondences: CorrespondenceOptions::default(),
            solver: SolverConfig::default(),
            motion_model: MotionModel::default(),
            refine: RefineConfig::default(),
            refine_window: 5,
            refine_all: false,
            holdout: 8,
            max_flagged_fraction: 0.3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.stride == 0 {
            return Err(PipelineError::InvalidConfig("stride must be at least 1"));
        }
        if !(self.consistency.tangent > 0.0) || !(self.consistency.depth > 0.0) {
            return Err(PipelineError::InvalidConfig("consistency thresholds must be positive"));
        }
        if !(self.prune.inlier > 0.0) || !(self.prune.inconsistent > 0.0) {
            return Err(PipelineError::InvalidConfig("prune thresholds must be positive"));
        }
        if self.ncc_patch < 3 || self.ncc_patch.is_multiple_of(2) {
            return Err(PipelineError::InvalidConfig("ncc_patch must be odd and at least 3"));
        }
        if !(-1.0..=1.0).contains(&self.fill_ncc) {
            return Err(PipelineError::InvalidConfig("fill_ncc must lie in [-1, 1]"));
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return Err(PipelineError::InvalidConfig("max_flagged_fraction must lie in [0, 1]"));
        }
        self.solver.validate()?;
        self.refine.validate()?;
        Ok(())
    }

    pub fn is_held_out(&self, frame: usize) -> bool {
        self.holdout > 0 && frame % self.holdout == self.holdout - 1
    }

    pub fn held_out_frames(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| self.is_held_out(*i)).collect()
    }
}

/// Last known state of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub index: usize,
    pub pose: Option<PoseSE3>,
    /// Rendered depth at the frame's pose, as of the last time it was used.
    pub rendered_depth: Option<DepthPano>,
    pub m_con: Option<MaskPano>,
    pub m_inc: Option<MaskPano>,
    pub m_adj: Option<MaskPano>,
    pub m_inlier: Option<MaskPano>,
    pub held_out: bool,
    /// Pose came from the motion model because the solver failed.
    pub flagged: bool,
    pub refine: Option<RefineStatus>,
}

impl FrameState {
    fn new(index: usize, held_out: bool) -> Self {
        Self {
            index,
            pose: None,
            rendered_depth: None,
            m_con: None,
            m_inc: None,
            m_adj: None,
            m_inlier: None,
            held_out,
            flagged: false,
            refine: None,
        }
    }
}

/// One line of the per-frame log.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameLog {
    pub frame: usize,
    pub held_out: bool,
    pub flagged: bool,
    pub correspondences: usize,
    pub solver_iterations: usize,
    pub inliers: usize,
    pub objective: f64,
    pub converged: bool,
    /// Frames refined after this one was added.
    pub refined: usize,
    pub refine_improved: usize,
    pub merged: usize,
    pub pruned: usize,
    pub reset: usize,
    pub map_size: usize,
    /// Mean densities over the frames processed at this step.
    pub m_con_density: f64,
    pub m_inc_density: f64,
    pub m_inlier_density: f64,
    pub m_adj_density: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub map: SurfelMap,
    /// Camera-to-world pose of every frame, in input order.
    pub poses: Vec<PoseSE3>,
    pub states: Vec<FrameState>,
    pub log: Vec<FrameLog>,
    /// More than `max_flagged_fraction` of the frames were extrapolated.
    pub failed: bool,
}

fn render_all(map: &SurfelMap, poses: &[PoseSE3], ds: &Dataset) -> Vec<RenderOutput> {
    poses.iter().map(|p| render(map, p, &ds.grid)).collect()
}

/// `M_con^k` relative to the latest visited frame `t`.
fn con_mask(k: usize, t: usize, depths: &[DepthPano], poses: &[PoseSE3], th: &ConsistencyThresholds) -> Result<MaskPano, ConsistencyError> {
    if k < t {
        cross_frame_mask(k, t, depths, poses, th)
    } else if k > 0 {
        pairwise_consistency(&depths[k], &poses[k], &depths[k - 1], &poses[k - 1], th)
    } else {
        Ok(MaskPano::filled(*depths[k].grid(), true))
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct DiaStats {
    merged: usize,
    pruned: usize,
    reset: usize,
    con: Vec<f64>,
    inc: Vec<f64>,
    inlier: Vec<f64>,
}

/// Depth-inlier densification over the mapped frames among `0..=t`.
fn densify(
    map: &mut SurfelMap,
    ds: &Dataset,
    poses: &[PoseSE3],
    states: &mut [FrameState],
    t: usize,
    cfg: &PipelineConfig,
) -> Result<DiaStats, PipelineError> {
    let mut stats = DiaStats {
        merged: 0,
        pruned: 0,
        reset: 0,
        con: Vec::new(),
        inc: Vec::new(),
        inlier: Vec::new(),
    };
    let mapped: Vec<usize> = (0..=t).filter(|k| !cfg.is_held_out(*k)).collect();
    if mapped.len() < 2 {
        return Ok(stats);
    }
    let renders = render_all(map, &poses[..=t], ds);
    let depths: Vec<DepthPano> = renders.iter().map(|r| r.depth.clone()).collect();

    // Align every mapped frame's monocular depth to the current map scale.
    let mut aligned: Vec<Option<(DepthPano, MaskPano)>> = vec![None; t + 1];
    for &k in &mapped {
        let m_con = con_mask(k, t, &depths, poses, &cfg.consistency)?;
        match align_depth(&ds.frames[k].mono_depth, &depths[k], &m_con) {
            Ok((_, d_a)) => aligned[k] = Some((d_a, m_con)),
            Err(ConsistencyError::DegenerateFit { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let mut seeds = Vec::new();
    for (pos, &k) in mapped.iter().enumerate() {
        let Some((d_a, m_con)) = &aligned[k] else { continue };
        let neighbours: Vec<usize> = [pos.checked_sub(1), Some(pos + 1)]
            .into_iter()
            .flatten()
            .filter_map(|p| mapped.get(p).copied())
            .filter(|j| aligned[*j].is_some())
            .collect();
        let Some(&ncc_src) = neighbours.first() else { continue };
        let d_r = &depths[k];

        let mut m_con_a: Option<MaskPano> = None;
        for &j in &neighbours {
            let (d_aj, _) = aligned[j].as_ref().expect("filtered");
            let c = pairwise_consistency(d_a, &poses[k], d_aj, &poses[j], &cfg.consistency)?;
            m_con_a = Some(match m_con_a {
                None => c,
                Some(m) => m.and(&c)?,
            });
        }
        let m_con_a = m_con_a.expect("at least one neighbour");

        let lum = ds.frames[k].color.luminance();
        let src = &ds.frames[ncc_src].color;
        let via_a = patch_ncc(&lum, &warp_luminance(d_a, &poses[k], src, &poses[ncc_src])?, cfg.ncc_patch)?;
        let via_r = patch_ncc(&lum, &warp_luminance(d_r, &poses[k], src, &poses[ncc_src])?, cfg.ncc_patch)?;
        let m_ncc = ncc_compare(&via_a, &via_r);
        let m_inc = inconsistency_mask(m_con, d_r)?;
        let m_inlier = inlier_mask(&m_inc, &m_con_a, &m_ncc)?;
        let merge = Pano::from_fn(ds.grid, |r, c| {
            *m_inlier.get(r, c) || (!d_r.is_valid(r, c) && *m_con_a.get(r, c) && via_a.get(r, c).is_some_and(|v| v >= cfg.fill_ncc))
        });
        let s = seeds_from_depth(&ds.frames[k].color, d_a, &poses[k], Some(&merge), cfg.stride)?;
        stats.merged += s.len();
        seeds.push((k, s));

        map.accumulate_mask(&renders[k], &m_inlier, MaskChannel::Inlier)?;
        map.accumulate_mask(&renders[k], &m_inc, MaskChannel::Inconsistent)?;
        stats.con.push(m_con.density());
        stats.inc.push(m_inc.density());
        stats.inlier.push(m_inlier.density());
        let st = &mut states[k];
        st.rendered_depth = Some(d_r.clone());
        st.m_con = Some(m_con.clone());
        st.m_inc = Some(m_inc);
        st.m_inlier = Some(m_inlier);
    }
    // Merged surfels are appended, so render ids of existing surfels stay
    // valid for the accumulators until the prune.
    for (k, s) in &seeds {
        map.merge_points(s, *k);
    }
    let ps = map.prune_and_reset(&cfg.prune);
    stats.pruned = ps.pruned;
    stats.reset = ps.reset;
    Ok(stats)
}

/// What tracking frame `t` sees: the visited frames it has matches from,
/// their consistency masks (all zero when masks are disabled) and the
/// resulting correspondences.
pub struct Tracking {
    pub sources: Vec<usize>,
    pub masks: Vec<MaskPano>,
    pub correspondences: Result<Vec<Correspondence2D3D>, PoseError>,
}

/// Renders the visited frames `0..t` at `poses`, masks them and lifts the
/// matches into frame `t` to 2D-3D correspondences.
pub fn track_correspondences(
    map: &SurfelMap,
    ds: &Dataset,
    poses: &[PoseSE3],
    t: usize,
    cfg: &PipelineConfig,
) -> Result<Tracking, PipelineError> {
    if t == 0 || poses.len() < t || t >= ds.len() {
        return Err(PipelineError::MissingFrame(t));
    }
    let poses = &poses[..t];
    let depths: Vec<DepthPano> = render_all(map, poses, ds).into_iter().map(|r| r.depth).collect();
    let sources: Vec<usize> = (0..t).filter(|k| !ds.matches_between(*k, t).is_empty()).collect();
    let mut masks: Vec<MaskPano> = vec![MaskPano::filled(ds.grid, false); t];
    if cfg.correspondences.use_mask {
        for &k in &sources {
            masks[k] = con_mask(k, t - 1, &depths, poses, &cfg.consistency)?;
        }
    }
    let sets: Vec<MatchSet<'_>> = sources
        .iter()
        .map(|&k| MatchSet {
            frame: k,
            matches: ds.matches_between(k, t),
        })
        .collect();
    let correspondences = match build_correspondences(&sets, &depths, &masks, poses, &cfg.correspondences) {
        Err(PoseError::UnknownFrame(_)) | Err(PoseError::InvalidConfig(_)) | Err(PoseError::Pano(_)) => {
            return Err(PipelineError::MissingFrame(t))
        }
        other => other,
    };
    Ok(Tracking {
        sources,
        masks,
        correspondences,
    })
}

fn extrapolate(poses: &[PoseSE3], model: MotionModel) -> PoseSE3 {
    let n = poses.len();
    match (model, n) {
        (_, 0) => PoseSE3::identity(),
        (MotionModel::ConstantVelocity, n) if n >= 2 => {
            let rel = poses[n - 2].inverse().compose(&poses[n - 1]);
            poses[n - 1].compose(&rel)
        }
        _ => poses[n - 1],
    }
}

/// Runs the full incremental loop over `ds`.
pub fn run_incremental(ds: &Dataset, cfg: &PipelineConfig) -> Result<RunResult, PipelineError> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let n = ds.len();
    let mut states: Vec<FrameState> = (0..n).map(|i| FrameState::new(i, cfg.is_held_out(i))).collect();
    let first = &ds.frames[0];
    let mut map = init_from_depth(&first.color, &first.mono_depth, &PoseSE3::identity(), cfg.stride)?;
    let mut poses = vec![PoseSE3::identity()];
    states[0].pose = Some(PoseSE3::identity());
    let mut log = vec![FrameLog {
        frame: 0,
        held_out: states[0].held_out,
        flagged: false,
        correspondences: 0,
        solver_iterations: 0,
        inliers: 0,
        objective: 0.0,
        converged: true,
        refined: 0,
        refine_improved: 0,
        merged: map.len(),
        pruned: 0,
        reset: 0,
        map_size: map.len(),
        m_con_density: 0.0,
        m_inc_density: 0.0,
        m_inlier_density: 0.0,
        m_adj_density: 0.0,
    }];
    let mut flagged = 0usize;

    for t in 1..n {
        let latest = t - 1;
        let track = track_correspondences(&map, ds, &poses, t, cfg)?;
        let (sources, masks) = (&track.sources, &track.masks);
        let init = extrapolate(&poses, cfg.motion_model);
        let solved = match track.correspondences {
            Ok(c) => {
                let mut scfg = cfg.solver.clone();
                scfg.seed = cfg.solver.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                let count = c.len();
                solve_pose(&c, &init, &scfg).ok().map(|e| (e, count))
            }
            Err(PoseError::InsufficientCorrespondences { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let mut entry = FrameLog {
            frame: t,
            held_out: states[t].held_out,
            flagged: false,
            correspondences: 0,
            solver_iterations: 0,
            inliers: 0,
            objective: 0.0,
            converged: false,
            refined: 0,
            refine_improved: 0,
            merged: 0,
            pruned: 0,
            reset: 0,
            map_size: 0,
            m_con_density: mean(&sources.iter().map(|k| masks[*k].density()).collect::<Vec<_>>()),
            m_inc_density: 0.0,
            m_inlier_density: 0.0,
            m_adj_density: 0.0,
        };
        let pose = match solved {
            Some((est, count)) if est.pose.is_finite() => {
                entry.correspondences = count;
                entry.solver_iterations = est.iterations;
                entry.inliers = est.inliers;
                entry.objective = est.objective;
                entry.converged = est.converged;
                est.pose
            }
            _ => {
                flagged += 1;
                entry.flagged = true;
                states[t].flagged = true;
                extrapolate(&poses, cfg.motion_model)
            }
        };
        for &k in sources {
            if cfg.correspondences.use_mask {
                states[k].m_con = Some(masks[k].clone());
            }
        }
        poses.push(pose);
        states[t].pose = Some(pose);

        // Densify over the visited frames.
        if cfg.densify {
            let s = densify(&mut map, ds, &poses, &mut states, latest, cfg)?;
            entry.merged = s.merged;
            entry.pruned = s.pruned;
            entry.reset = s.reset;
            entry.m_inc_density = mean(&s.inc);
            entry.m_inlier_density = mean(&s.inlier);
            if !s.con.is_empty() {
                entry.m_con_density = mean(&s.con);
            }
        }

        // Refine recent poses against the updated map.
        if cfg.refine_window > 0 || cfg.refine_all {
            let renders = render_all(&map, &poses, ds);
            let depths: Vec<DepthPano> = renders.into_iter().map(|r| r.depth).collect();
            let lo = if cfg.refine_all {
                1
            } else {
                (t + 1).saturating_sub(cfg.refine_window).max(1)
            };
            let mut adj = Vec::new();
            for k in lo..=t {
                let m_adj = adjacent_mask(k, &depths, &poses, &cfg.consistency)?;
                let out = refine_pose_photometric(&map, &poses[k], &ds.frames[k].color, &m_adj, &cfg.refine)?;
                entry.refined += 1;
                if out.status == RefineStatus::Improved {
                    entry.refine_improved += 1;
                    poses[k] = out.pose;
                    states[k].pose = Some(out.pose);
                }
                adj.push(m_adj.density());
                states[k].refine = Some(out.status);
                states[k].m_adj = Some(m_adj);
                states[k].rendered_depth = Some(depths[k].clone());
            }
            entry.m_adj_density = mean(&adj);
        }

        // Refresh surfel colors from the mapped frames.
        let mapped: Vec<(&crate::pano::ColorPano, PoseSE3)> = (0..=t)
            .filter(|k| !cfg.is_held_out(*k))
            .map(|k| (&ds.frames[k].color, poses[k]))
            .collect();
        map.update_colors(&mapped)?;
        entry.map_size = map.len();
        log.push(entry);
    }

    Ok(RunResult {
        map,
        failed: flagged as f64 > cfg.max_flagged_fraction * n as f64,
        poses,
        states,
        log,
    })
}
