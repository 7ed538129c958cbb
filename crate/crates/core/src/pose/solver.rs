//! Robust pose solver on the sphere.
//!
//! Each correspondence contributes the residual `e = 2 (u - m) / |u + m|`,
//! where `u` is the unit direction of the world point in the candidate camera
//! and `m` the observed direction. `|e|` is exactly the tangent error
//! `2 tan(angle / 2)`, and `e` is smooth everywhere except at antipodes, so the
//! solver can use analytic Jacobians. The objective is
//! `sum(lambda * huber(|e|))`, minimized by Levenberg-Marquardt with IRLS
//! weights over a left perturbation of the world-to-camera transform.

use alloc::vec::Vec;

use nalgebra::{Isometry3, Matrix3, Matrix3x6, Matrix6, Translation3, UnitQuaternion, Vector6};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::index::sample;

use super::{Correspondence2D3D, PoseError};
use crate::sim::rng_for;
use crate::sphere::{PoseSE3, Vec3};

/// Fewest correspondences that constrain a pose (with margin over the 3 needed
/// for 6 degrees of freedom).
pub const MIN_CORRESPONDENCES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once a proposed update is shorter than this (radians + scene units).
    pub tolerance: f64,
    /// Huber threshold on the tangent error.
    pub huber: f64,
    /// RANSAC rounds; 0 disables the consensus stage.
    pub ransac_rounds: usize,
    /// Tangent error below which a correspondence counts as an inlier.
    pub inlier_threshold: f64,
    /// The final fit uses correspondences within this multiple of the inlier threshold.
    pub refit_gate: f64,
    /// Multiply each weight by the polar weight of the reprojected direction.
    pub polar_weighting: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-12,
            huber: 0.016,
            ransac_rounds: 64,
            inlier_threshold: 0.008,
            refit_gate: 3.0,
            polar_weighting: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), PoseError> {
        if self.max_iterations == 0 {
            return Err(PoseError::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) || !(self.huber > 0.0) || !(self.inlier_threshold > 0.0) {
            return Err(PoseError::InvalidConfig("tolerance, huber and inlier_threshold must be positive"));
        }
        if !(self.refit_gate >= 1.0) {
            return Err(PoseError::InvalidConfig("refit_gate must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseEstimate {
    /// Camera-to-world pose.
    pub pose: PoseSE3,
    /// Robust objective over the correspondences used in the final fit.
    pub objective: f64,
    /// Correspondences within the inlier threshold at `pose`.
    pub inliers: usize,
    pub converged: bool,
    /// Iterations of the final refinement.
    pub iterations: usize,
}

fn huber(l: f64, k: f64) -> f64 {
    if l <= k {
        0.5 * l * l
    } else {
        k * (l - 0.5 * k)
    }
}

fn irls(l: f64, k: f64) -> f64 {
    if l <= k {
        1.0
    } else {
        k / l
    }
}

struct Residual {
    e: Vec3,
    l: f64,
    u: Vec3,
    xc: Vec3,
    s: f64,
}

fn residual(w2c: &Isometry3<f64>, c: &Correspondence2D3D) -> Option<Residual> {
    let xc = w2c.transform_point(&c.point).coords;
    let n = xc.norm();
    if !(n > 0.0) {
        return None;
    }
    let u = xc / n;
    let m = c.observed.as_vec();
    let sum = u + m;
    let s2 = sum.norm_squared();
    if s2 <= 2e-12 {
        return None;
    }
    let s = s2.sqrt();
    let e = (u - m) * (2.0 / s);
    Some(Residual { l: e.norm(), e, u, xc, s })
}

fn lambda(c: &Correspondence2D3D, u: &Vec3, polar: bool) -> f64 {
    if polar {
        c.weight * (u.x * u.x + u.y * u.y).sqrt().min(1.0)
    } else {
        c.weight
    }
}

fn eval(w2c: &Isometry3<f64>, corr: &[&Correspondence2D3D], cfg: &SolverConfig) -> f64 {
    corr.iter()
        .filter_map(|c| residual(w2c, c).map(|r| lambda(c, &r.u, cfg.polar_weighting) * huber(r.l, cfg.huber)))
        .sum()
}

/// Robust objective of `pose` (camera-to-world) over all correspondences.
pub fn objective(corr: &[Correspondence2D3D], pose: &PoseSE3, cfg: &SolverConfig) -> f64 {
    let refs: Vec<&Correspondence2D3D> = corr.iter().collect();
    eval(&pose.isometry().inverse(), &refs, cfg)
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Gauss-Newton system `(J^T W J, J^T W e)` and the objective at `w2c`.
fn normal_equations(w2c: &Isometry3<f64>, corr: &[&Correspondence2D3D], cfg: &SolverConfig) -> (Matrix6<f64>, Vector6<f64>, f64) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    let mut f = 0.0;
    for c in corr {
        let Some(r) = residual(w2c, c) else { continue };
        let lam = lambda(c, &r.u, cfg.polar_weighting);
        f += lam * huber(r.l, cfg.huber);
        let w = lam * irls(r.l, cfg.huber);
        if w <= 0.0 {
            continue;
        }
        let m = c.observed.as_vec();
        let d = r.u - m;
        let p = r.u + m;
        let de_du = Matrix3::identity() * (2.0 / r.s) - d * p.transpose() * (2.0 / (r.s * r.s * r.s));
        let du_dx = (Matrix3::identity() - r.u * r.u.transpose()) / r.xc.norm();
        let mut dx = Matrix3x6::zeros();
        dx.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&r.xc)));
        dx.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        let j = de_du * du_dx * dx;
        h += j.transpose() * j * w;
        g += j.transpose() * r.e * w;
    }
    (h, g, f)
}

fn apply(delta: &Vector6<f64>, w2c: &Isometry3<f64>) -> Isometry3<f64> {
    let rot = UnitQuaternion::from_scaled_axis(Vec3::new(delta[0], delta[1], delta[2]));
    let t = rot * w2c.translation.vector + Vec3::new(delta[3], delta[4], delta[5]);
    Isometry3::from_parts(Translation3::from(t), rot * w2c.rotation)
}

struct LmResult {
    w2c: Isometry3<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt(init: Isometry3<f64>, corr: &[&Correspondence2D3D], cfg: &SolverConfig, max_iterations: usize) -> LmResult {
    let mut w2c = init;
    let (mut h, mut g, mut f) = normal_equations(&w2c, corr, cfg);
    let mut mu = 1e-4;
    let mut converged = false;
    let mut it = 0;
    while it < max_iterations {
        it += 1;
        if f == 0.0 {
            converged = true;
            break;
        }
        let mut a = h;
        for i in 0..6 {
            a[(i, i)] += mu * h[(i, i)].max(1e-12);
        }
        let Some(chol) = a.cholesky() else {
            mu *= 4.0;
            continue;
        };
        let delta = chol.solve(&(-g));
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }
        let step = delta.norm();
        let cand = apply(&delta, &w2c);
        let fc = eval(&cand, corr, cfg);
        if fc < f {
            w2c = cand;
            (h, g, f) = normal_equations(&w2c, corr, cfg);
            mu = (mu / 3.0).max(1e-12);
        } else {
            mu *= 4.0;
        }
        if step < cfg.tolerance {
            converged = true;
            break;
        }
        if mu > 1e16 {
            // No descent direction left at working precision.
            converged = true;
            break;
        }
    }
    LmResult {
        w2c,
        objective: f,
        iterations: it,
        converged,
    }
}

fn count_inliers(w2c: &Isometry3<f64>, corr: &[&Correspondence2D3D], threshold: f64) -> usize {
    corr.iter().filter(|c| residual(w2c, c).is_some_and(|r| r.l <= threshold)).count()
}

fn within<'a>(w2c: &Isometry3<f64>, corr: &[&'a Correspondence2D3D], gate: f64) -> Vec<&'a Correspondence2D3D> {
    corr.iter()
        .copied()
        .filter(|c| residual(w2c, c).is_some_and(|r| r.l <= gate))
        .collect()
}

/// Estimates the camera-to-world pose that best explains `corr`, starting
/// from `init`.
///
/// Zero-weight correspondences are ignored entirely. With RANSAC enabled,
/// minimal 4-point fits started from `init` compete on consensus (the
/// initial pose itself is a candidate); the winner is refit twice on the
/// correspondences within `refit_gate * inlier_threshold`.
pub fn solve_pose(corr: &[Correspondence2D3D], init: &PoseSE3, cfg: &SolverConfig) -> Result<PoseEstimate, PoseError> {
    cfg.validate()?;
    let usable: Vec<&Correspondence2D3D> = corr
        .iter()
        .filter(|c| c.weight > 0.0 && c.weight.is_finite() && c.point.coords.iter().all(|v| v.is_finite()))
        .collect();
    if usable.len() < MIN_CORRESPONDENCES {
        return Err(PoseError::InsufficientCorrespondences {
            got: usable.len(),
            need: MIN_CORRESPONDENCES,
        });
    }
    let init_w2c = init.isometry().inverse();

    let fit = if cfg.ransac_rounds == 0 {
        levenberg_marquardt(init_w2c, &usable, cfg, cfg.max_iterations)
    } else {
        let mut rng = rng_for(cfg.seed, &[0x2a45, usable.len() as u64]);
        let mut best = init_w2c;
        let mut best_count = count_inliers(&init_w2c, &usable, cfg.inlier_threshold);
        let mut subset = Vec::with_capacity(MIN_CORRESPONDENCES);
        for _ in 0..cfg.ransac_rounds {
            subset.clear();
            subset.extend(sample(&mut rng, usable.len(), MIN_CORRESPONDENCES).iter().map(|i| usable[i]));
            let cand = levenberg_marquardt(init_w2c, &subset, cfg, 30).w2c;
            let n = count_inliers(&cand, &usable, cfg.inlier_threshold);
            if n > best_count {
                best = cand;
                best_count = n;
            }
        }
        let gate = cfg.refit_gate * cfg.inlier_threshold;
        let mut w2c = best;
        let mut last = None;
        for _ in 0..2 {
            let set = within(&w2c, &usable, gate);
            let set = if set.len() >= MIN_CORRESPONDENCES { set } else { usable.clone() };
            let r = levenberg_marquardt(w2c, &set, cfg, cfg.max_iterations);
            w2c = r.w2c;
            last = Some(r);
        }
        last.expect("two refits ran")
    };
    if !fit.w2c.translation.vector.iter().all(|v| v.is_finite()) {
        return Ok(PoseEstimate {
            pose: *init,
            objective: f64::INFINITY,
            inliers: 0,
            converged: false,
            iterations: fit.iterations,
        });
    }
    Ok(PoseEstimate {
        pose: PoseSE3::from_isometry(fit.w2c.inverse()),
        objective: fit.objective,
        inliers: count_inliers(&fit.w2c, &usable, cfg.inlier_threshold),
        converged: fit.converged,
        iterations: fit.iterations,
    })
}
