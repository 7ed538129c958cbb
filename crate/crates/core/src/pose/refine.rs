//! Masked photometric pose refinement against the surfel map.
//!
//! The loss mixes L1 and DSSIM over pixels that are both covered by the render
//! and set in the adjusted consistency mask. It is minimized with normalized
//! gradient steps over a right perturbation of the pose, with central-difference
//! gradients and backtracking; a step is taken only if it lowers the loss by an Armijo
//! margin, which keeps finite-difference noise from walking the pose around.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::ssim::ssim_map_rgb;
use super::PoseError;
use crate::pano::{is_valid_depth, ColorPano, MaskPano};
use crate::sphere::{PoseSE3, Vec3};
use crate::splat::{render, RenderOutput, SurfelMap};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Weight of DSSIM against L1.
    pub dssim_weight: f64,
    /// Finite-difference step, radians (translation is scaled by median depth).
    pub fd_step: f64,
    /// First trial step length along the normalized gradient.
    pub initial_step: f64,
    /// Halvings tried before giving up on an iteration.
    pub backtracks: usize,
    /// Frames whose render covers less than this fraction are left alone.
    pub min_coverage: f64,
    /// Armijo constant: a step of length `a` must lower the loss by at least
    /// `armijo * a * |grad|`. 0 accepts any strict decrease.
    pub armijo: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            dssim_weight: 0.2,
            fd_step: 1e-4,
            initial_step: 2e-3,
            backtracks: 6,
            min_coverage: 0.5,
            armijo: 0.5,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), PoseError> {
        if !(0.0..=1.0).contains(&self.dssim_weight) {
            return Err(PoseError::InvalidConfig("dssim_weight must lie in [0, 1]"));
        }
        if !(self.fd_step > 0.0) || !(self.initial_step > 0.0) {
            return Err(PoseError::InvalidConfig("fd_step and initial_step must be positive"));
        }
        if !(0.0..1.0).contains(&self.armijo) {
            return Err(PoseError::InvalidConfig("armijo must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(PoseError::InvalidConfig("min_coverage must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RefineStatus {
    Improved,
    /// No step lowered the loss.
    Unchanged,
    /// The mask selects no covered pixel, so there is nothing to fit.
    NoSignal,
    LowCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOutcome {
    pub pose: PoseSE3,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub iterations: usize,
    pub status: RefineStatus,
}

/// Masked `(1 - w) * L1 + w * DSSIM`, averaged over pixels that are set in
/// `mask` and covered by `rendered`. `None` if there are no such pixels.
pub fn photometric_loss(rendered: &RenderOutput, target: &ColorPano, mask: &MaskPano, dssim_weight: f64) -> Result<Option<f64>, PoseError> {
    rendered.color.ensure_same_grid(target)?;
    rendered.color.ensure_same_grid(mask)?;
    let sel: Vec<bool> = mask
        .data()
        .iter()
        .zip(rendered.depth.data())
        .map(|(m, d)| *m && is_valid_depth(*d))
        .collect();
    let n = sel.iter().filter(|s| **s).count();
    if n == 0 {
        return Ok(None);
    }
    let s = if dssim_weight > 0.0 {
        Some(ssim_map_rgb(&rendered.color, target).map_err(|e| match e {
            super::SsimError::Pano(p) => PoseError::Pano(p),
        })?)
    } else {
        None
    };
    let mut acc = 0.0;
    for (i, on) in sel.iter().enumerate() {
        if !on {
            continue;
        }
        let a = rendered.color.data()[i];
        let b = target.data()[i];
        let l1 = ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0;
        let d = s.as_ref().map_or(0.0, |m| ((1.0 - m.data()[i]) / 2.0).max(0.0));
        acc += (1.0 - dssim_weight) * l1 + dssim_weight * d;
    }
    Ok(Some(acc / n as f64))
}

fn perturb(pose: &PoseSE3, x: &[f64; 6], scale: f64) -> PoseSE3 {
    pose.compose(&PoseSE3::from_rotation_vector(
        Vec3::new(x[0], x[1], x[2]),
        Vec3::new(x[3], x[4], x[5]) * scale,
    ))
}

fn median_depth(out: &RenderOutput) -> Option<f64> {
    let mut d: Vec<f64> = out.depth.data().iter().copied().filter(|d| is_valid_depth(*d)).collect();
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Some(d[mid])
}

/// Refines `pose` so the map's render matches `target` on `mask`.
pub fn refine_pose_photometric(
    map: &SurfelMap,
    pose: &PoseSE3,
    target: &ColorPano,
    mask: &MaskPano,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, PoseError> {
    cfg.validate()?;
    target.ensure_same_grid(mask)?;
    let grid = *target.grid();
    let unchanged = |status, loss| RefineOutcome {
        pose: *pose,
        initial_loss: loss,
        final_loss: loss,
        iterations: 0,
        status,
    };
    let first = render(map, pose, &grid);
    if first.coverage() < cfg.min_coverage {
        return Ok(unchanged(RefineStatus::LowCoverage, None));
    }
    let Some(l0) = photometric_loss(&first, target, mask, cfg.dssim_weight)? else {
        return Ok(unchanged(RefineStatus::NoSignal, None));
    };
    let scale = median_depth(&first).unwrap_or(1.0);
    let loss_at = |x: &[f64; 6]| -> Result<f64, PoseError> {
        let p = perturb(pose, x, scale);
        let out = render(map, &p, &grid);
        Ok(photometric_loss(&out, target, mask, cfg.dssim_weight)?.unwrap_or(f64::INFINITY))
    };

    let mut x = [0.0; 6];
    let mut loss = l0;
    let mut step = cfg.initial_step;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut g = [0.0; 6];
        for i in 0..6 {
            let (mut xp, mut xm) = (x, x);
            xp[i] += cfg.fd_step;
            xm[i] -= cfg.fd_step;
            g[i] = (loss_at(&xp)? - loss_at(&xm)?) / (2.0 * cfg.fd_step);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        let mut accepted = false;
        let mut a = step;
        for _ in 0..=cfg.backtracks {
            let mut xn = x;
            for i in 0..6 {
                xn[i] -= a * g[i] / norm;
            }
            let ln = loss_at(&xn)?;
            if ln < loss && ln <= loss - cfg.armijo * a * norm {
                x = xn;
                loss = ln;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            break;
        }
        step = a * 1.5;
    }
    let improved = loss < l0;
    Ok(RefineOutcome {
        pose: if improved { perturb(pose, &x, scale) } else { *pose },
        initial_loss: Some(l0),
        final_loss: Some(loss),
        iterations,
        status: if improved {
            RefineStatus::Improved
        } else {
            RefineStatus::Unchanged
        },
    })
}
