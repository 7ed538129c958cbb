//! Trajectory and held-out render metrics.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::PipelineError;
use crate::pano::{ColorPano, MaskPano};
use crate::pose::ssim_map_rgb;
use crate::sphere::{PoseSE3, Vec3};
use crate::splat::{render, SurfelMap};

/// Mean, median and maximum of a list of errors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            max: v[n - 1],
        })
    }
}

/// Similarity transform `x -> scale * R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Similarity {
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x * self.scale + self.translation
    }
}

/// Closed-form similarity mapping `src` onto `dst` in the least-squares sense
/// (Umeyama). Falls back to a pure translation when `src` has no spread.
pub fn align_similarity(src: &[Vec3], dst: &[Vec3]) -> Similarity {
    let n = src.len().min(dst.len());
    let nf = n.max(1) as f64;
    let mu_s = src[..n].iter().fold(Vec3::zeros(), |a, p| a + p) / nf;
    let mu_d = dst[..n].iter().fold(Vec3::zeros(), |a, p| a + p) / nf;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (p, q) in src[..n].iter().zip(&dst[..n]) {
        let a = p - mu_s;
        cov += (q - mu_d) * a.transpose();
        var += a.norm_squared();
    }
    cov /= nf;
    var /= nf;
    let scale_ref = mu_s.norm().max(mu_d.norm()).max(1.0);
    if !(var > 1e-18 * scale_ref * scale_ref) {
        return Similarity {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: mu_d - mu_s,
        };
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * vt.determinant() < 0.0 {
        s[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * vt;
    let scale = svd.singular_values.component_mul(&s).sum() / var;
    Similarity {
        scale,
        rotation,
        translation: mu_d - rotation * mu_s * scale,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryMetrics {
    /// Absolute trajectory error (RMS of camera-center residuals after
    /// similarity alignment), in ground-truth units.
    pub ate_rmse: f64,
    /// Scale of the alignment from estimated to ground-truth units.
    pub alignment_scale: f64,
    /// Translation error of consecutive relative poses, ground-truth units per
    /// frame pair. Absent with fewer than two frames.
    pub rpe_t: Option<ErrorStats>,
    /// Rotation error of consecutive relative poses, degrees.
    pub rpe_r_deg: Option<ErrorStats>,
}

/// Per-frame trajectory errors, for the optional CSV table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameErrors {
    pub frame: usize,
    pub ate: f64,
    /// Relative-pose errors of the pair `(frame - 1, frame)`.
    pub rpe_t: Option<f64>,
    pub rpe_r_deg: Option<f64>,
}

/// ATE and RPE of `est` against `gt` (both camera-to-world).
pub fn eval_trajectory(est: &[PoseSE3], gt: &[PoseSE3]) -> Result<(TrajectoryMetrics, Vec<FrameErrors>), PipelineError> {
    if est.len() != gt.len() {
        return Err(PipelineError::LengthMismatch {
            estimated: est.len(),
            ground_truth: gt.len(),
        });
    }
    if est.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let src: Vec<Vec3> = est.iter().map(|p| p.translation()).collect();
    let dst: Vec<Vec3> = gt.iter().map(|p| p.translation()).collect();
    let sim = align_similarity(&src, &dst);
    let mut rows = Vec::with_capacity(est.len());
    let mut sq = 0.0;
    for (i, (p, q)) in src.iter().zip(&dst).enumerate() {
        let e = (sim.apply(p) - q).norm();
        sq += e * e;
        rows.push(FrameErrors {
            frame: i,
            ate: e,
            rpe_t: None,
            rpe_r_deg: None,
        });
    }
    let (mut rt, mut rr) = (Vec::new(), Vec::new());
    for i in 1..est.len() {
        let rel_gt = gt[i - 1].inverse().compose(&gt[i]);
        let rel_est = est[i - 1].inverse().compose(&est[i]).scaled(sim.scale);
        let err = rel_gt.inverse().compose(&rel_est);
        let t = err.translation().norm();
        let r = err.rotation().angle().to_degrees();
        rows[i].rpe_t = Some(t);
        rows[i].rpe_r_deg = Some(r);
        rt.push(t);
        rr.push(r);
    }
    Ok((
        TrajectoryMetrics {
            ate_rmse: (sq / est.len() as f64).sqrt(),
            alignment_scale: sim.scale,
            rpe_t: ErrorStats::from_values(&rt),
            rpe_r_deg: ErrorStats::from_values(&rr),
        },
        rows,
    ))
}

/// PSNR (dynamic range 1) over pixels set in `mask`; `+inf` for identical
/// pixels, `None` if the mask is empty.
pub fn psnr_masked(a: &ColorPano, b: &ColorPano, mask: &MaskPano) -> Result<Option<f64>, PipelineError> {
    a.ensure_same_grid(b)?;
    a.ensure_same_grid(mask)?;
    let mut se = 0.0;
    let mut n = 0usize;
    for ((p, q), m) in a.data().iter().zip(b.data()).zip(mask.data()) {
        if !m {
            continue;
        }
        for ch in 0..3 {
            se += (p[ch] - q[ch]) * (p[ch] - q[ch]);
        }
        n += 3;
    }
    if n == 0 {
        return Ok(None);
    }
    let mse = se / n as f64;
    Ok(Some(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() }))
}

/// Mean SSIM over pixels set in `mask`.
pub fn ssim_masked(a: &ColorPano, b: &ColorPano, mask: &MaskPano) -> Result<Option<f64>, PipelineError> {
    a.ensure_same_grid(mask)?;
    let map = ssim_map_rgb(a, b).map_err(|e| match e {
        crate::pose::SsimError::Pano(p) => PipelineError::Pano(p),
    })?;
    let (mut s, mut n) = (0.0, 0usize);
    for (v, m) in map.data().iter().zip(mask.data()) {
        if *m {
            s += v;
            n += 1;
        }
    }
    Ok((n > 0).then(|| s / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameRender {
    pub frame: usize,
    #[cfg_attr(feature = "serde", serde(with = "non_finite"))]
    pub psnr: f64,
    pub ssim: f64,
    pub invalid_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RenderMetrics {
    /// Mean over evaluated frames; `+inf` if any frame renders perfectly.
    #[cfg_attr(feature = "serde", serde(with = "non_finite"))]
    pub psnr: f64,
    pub ssim: f64,
    /// Mean fraction of pixels the map leaves uncovered.
    pub invalid_fraction: f64,
    pub frames: Vec<FrameRender>,
    /// Frames with no rendered pixel; excluded from PSNR/SSIM but counted in
    /// `invalid_fraction`.
    pub skipped: Vec<usize>,
}

/// Renders the map at `poses[i]` for every `i` in `frames` and compares with
/// `images[i]` over the covered pixels.
pub fn eval_render(map: &SurfelMap, poses: &[PoseSE3], images: &[&ColorPano], frames: &[usize]) -> Result<RenderMetrics, PipelineError> {
    let mut out = RenderMetrics {
        psnr: f64::NAN,
        ssim: f64::NAN,
        invalid_fraction: f64::NAN,
        frames: Vec::new(),
        skipped: Vec::new(),
    };
    if frames.is_empty() {
        return Ok(out);
    }
    let mut invalid = 0.0;
    for &i in frames {
        let (Some(pose), Some(image)) = (poses.get(i), images.get(i)) else {
            return Err(PipelineError::MissingFrame(i));
        };
        let r = render(map, pose, image.grid());
        let valid = r.depth.valid_mask();
        let inv = r.depth.invalid_fraction();
        invalid += inv;
        match (psnr_masked(&r.color, image, &valid)?, ssim_masked(&r.color, image, &valid)?) {
            (Some(p), Some(s)) => out.frames.push(FrameRender {
                frame: i,
                psnr: p,
                ssim: s,
                invalid_fraction: inv,
            }),
            _ => out.skipped.push(i),
        }
    }
    out.invalid_fraction = invalid / frames.len() as f64;
    if !out.frames.is_empty() {
        let n = out.frames.len() as f64;
        out.psnr = out.frames.iter().map(|f| f.psnr).sum::<f64>() / n;
        out.ssim = out.frames.iter().map(|f| f.ssim).sum::<f64>() / n;
    }
    Ok(out)
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`,
/// which JSON cannot represent as numbers.
#[cfg(feature = "serde")]
pub mod non_finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<'a> {
        Num(f64),
        Str(&'a str),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str("inf") => Ok(f64::INFINITY),
            Repr::Str("-inf") => Ok(f64::NEG_INFINITY),
            Repr::Str("nan") => Ok(f64::NAN),
            Repr::Str(other) => Err(serde::de::Error::custom(alloc::format!("expected a number, got `{other}`"))),
        }
    }
}
