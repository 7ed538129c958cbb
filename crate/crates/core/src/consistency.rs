//! Multi-view depth masks: reprojection consistency between frames, affine
//! alignment of monocular depth, photometric (NCC) verification, and the
//! resulting inlier mask.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::pano::{is_valid_depth, ColorPano, DepthPano, MaskPano, Pano, PanoError};
use crate::sphere::{tangent_error_vec, Point3, PoseSE3};

/// Absolute slack on both consistency tests so that values landing exactly on
/// a threshold pass despite rounding in the reprojection.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsistencyError {
    #[error(transparent)]
    Pano(#[from] PanoError),
    #[error("frame {0} is missing")]
    MissingFrame(usize),
    #[error("cross-frame mask needs k < t, got k = {k}, t = {t}")]
    NotAfter { k: usize, t: usize },
    #[error("frame {0} has no neighbour")]
    NoNeighbor(usize),
    #[error("depth alignment is degenerate: {support} support pixels, monocular depth spread {spread:e}")]
    DegenerateFit { support: usize, spread: f64 },
    #[error("NCC patch size must be odd and at least 3, got {0}")]
    BadPatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ConsistencyThresholds {
    /// Bound on the tangent error between a pixel and its round-trip reprojection.
    pub tangent: f64,
    /// Bound on the relative ray-depth difference of the round trip.
    pub depth: f64,
}

impl Default for ConsistencyThresholds {
    fn default() -> Self {
        Self {
            tangent: 0.008,
            depth: 0.05,
        }
    }
}

impl ConsistencyThresholds {
    /// Both tests are inclusive.
    pub fn accepts(&self, tangent_err: f64, depth_err: f64) -> bool {
        tangent_err <= self.tangent + BOUNDARY_SLACK && depth_err <= self.depth + BOUNDARY_SLACK
    }
}

/// Round-trip errors `(tangent, relative depth)` for pixel `(r, c)` of the
/// source frame, or `None` where either depth is missing.
fn round_trip(d_src: &DepthPano, src_to_ref: &PoseSE3, d_ref: &DepthPano, r: usize, c: usize) -> Option<(f64, f64)> {
    let d = *d_src.get(r, c);
    if !is_valid_depth(d) {
        return None;
    }
    let g = d_src.grid();
    let m = g.dir_at(r as f64, c as f64);
    let x = m * d;
    let y = src_to_ref.transform(&Point3::from(x)).coords;
    let ny = y.norm();
    if !(ny > 0.0) {
        return None;
    }
    let (pr, pc) = d_ref.grid().project(&y);
    let dj = d_ref.sample(pr, pc)?;
    let xj = y * (dj / ny);
    let xp = src_to_ref.inverse_transform(&Point3::from(xj)).coords;
    let np = xp.norm();
    if !(np > 0.0) {
        return None;
    }
    let tan = tangent_error_vec(&m, &(xp / np)).ok()?;
    Some((tan, (d - np).abs() / d))
}

/// `C_{src,ref}`: 1 where a source pixel, pushed through its depth into the
/// reference frame and pulled back through the reference depth, lands on
/// itself (tangent error) at the same distance (relative depth error).
pub fn pairwise_consistency(
    d_src: &DepthPano,
    t_src: &PoseSE3,
    d_ref: &DepthPano,
    t_ref: &PoseSE3,
    th: &ConsistencyThresholds,
) -> Result<MaskPano, ConsistencyError> {
    d_src.ensure_same_grid(d_ref)?;
    let src_to_ref = t_ref.inverse().compose(t_src);
    Ok(Pano::from_fn(*d_src.grid(), |r, c| {
        round_trip(d_src, &src_to_ref, d_ref, r, c).is_some_and(|(t, d)| th.accepts(t, d))
    }))
}

fn frame<T>(items: &[T], i: usize) -> Result<&T, ConsistencyError> {
    items.get(i).ok_or(ConsistencyError::MissingFrame(i))
}

/// `M_con^k = C_{k,t} * C_{k,k-1}`; the adjacent factor is all ones for `k = 0`.
pub fn cross_frame_mask(
    k: usize,
    t: usize,
    depths: &[DepthPano],
    poses: &[PoseSE3],
    th: &ConsistencyThresholds,
) -> Result<MaskPano, ConsistencyError> {
    if t <= k {
        return Err(ConsistencyError::NotAfter { k, t });
    }
    let (dk, pk) = (frame(depths, k)?, frame(poses, k)?);
    let far = pairwise_consistency(dk, pk, frame(depths, t)?, frame(poses, t)?, th)?;
    if k == 0 {
        return Ok(far);
    }
    let adj = pairwise_consistency(dk, pk, frame(depths, k - 1)?, frame(poses, k - 1)?, th)?;
    Ok(far.and(&adj)?)
}

/// `M_adj^k = C_{k,k-1} * C_{k,k+1}`, using whichever neighbours exist in `depths`.
pub fn adjacent_mask(k: usize, depths: &[DepthPano], poses: &[PoseSE3], th: &ConsistencyThresholds) -> Result<MaskPano, ConsistencyError> {
    let (dk, pk) = (frame(depths, k)?, frame(poses, k)?);
    let n = depths.len().min(poses.len());
    let mut out: Option<MaskPano> = None;
    let neighbours = [k.checked_sub(1), Some(k + 1).filter(|j| *j < n)];
    for j in neighbours.into_iter().flatten() {
        let c = pairwise_consistency(dk, pk, &depths[j], &poses[j], th)?;
        out = Some(match out {
            None => c,
            Some(m) => m.and(&c)?,
        });
    }
    out.ok_or(ConsistencyError::NoNeighbor(k))
}

/// `M_inc`: rendered pixels that fail the cross-frame consistency test.
pub fn inconsistency_mask(m_con: &MaskPano, d_r: &DepthPano) -> Result<MaskPano, ConsistencyError> {
    m_con.ensure_same_grid(d_r)?;
    Ok(Pano::from_fn(*d_r.grid(), |r, c| d_r.is_valid(r, c) && !*m_con.get(r, c)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineDepthFit {
    pub scale: f64,
    pub shift: f64,
    /// RMS of `scale * D_m + shift - D_r` over the support.
    pub residual_rms: f64,
    pub support: usize,
}

impl AffineDepthFit {
    pub fn apply(&self, d: f64) -> f64 {
        self.scale * d + self.shift
    }
}

/// Least-squares `(scale, shift)` mapping `d_m` onto `d_r` over `mask`, and
/// the aligned depth `D_a` on every pixel where `d_m` is valid.
pub fn align_depth(d_m: &DepthPano, d_r: &DepthPano, mask: &MaskPano) -> Result<(AffineDepthFit, DepthPano), ConsistencyError> {
    d_m.ensure_same_grid(d_r)?;
    d_m.ensure_same_grid(mask)?;
    let pairs: Vec<(f64, f64)> = d_m
        .data()
        .iter()
        .zip(d_r.data())
        .zip(mask.data())
        .filter(|((m, r), on)| **on && is_valid_depth(**m) && is_valid_depth(**r))
        .map(|((m, r), _)| (*m, *r))
        .collect();
    let n = pairs.len();
    let nf = n as f64;
    let (mean_m, mean_r) = pairs.iter().fold((0.0, 0.0), |(a, b), (m, r)| (a + m / nf, b + r / nf));
    let (mut smm, mut smr) = (0.0, 0.0);
    for (m, r) in &pairs {
        smm += (m - mean_m) * (m - mean_m);
        smr += (m - mean_m) * (r - mean_r);
    }
    let spread = if n > 0 { (smm / nf).sqrt() } else { 0.0 };
    if n < 2 || !(spread > 1e-9 * mean_m.abs().max(1e-300)) {
        return Err(ConsistencyError::DegenerateFit { support: n, spread });
    }
    let scale = smr / smm;
    let shift = mean_r - scale * mean_m;
    let sse: f64 = pairs.iter().map(|(m, r)| (scale * m + shift - r).powi(2)).sum();
    let fit = AffineDepthFit {
        scale,
        shift,
        residual_rms: (sse / nf).sqrt(),
        support: n,
    };
    let aligned = d_m.map(|m| {
        let a = fit.apply(*m);
        if is_valid_depth(*m) && is_valid_depth(a) {
            a
        } else {
            f64::INFINITY
        }
    });
    Ok((fit, aligned))
}

/// Luminance of `src_image` warped into frame `k` through `depth_k`.
/// `None` where the depth is missing. Lookups beyond the pole rows clamp.
pub fn warp_luminance(
    depth_k: &DepthPano,
    pose_k: &PoseSE3,
    src_image: &ColorPano,
    pose_src: &PoseSE3,
) -> Result<Pano<Option<f64>>, ConsistencyError> {
    depth_k.ensure_same_grid(src_image)?;
    let g = *depth_k.grid();
    let k_to_src = pose_src.inverse().compose(pose_k);
    let lum = src_image.luminance();
    Ok(Pano::from_fn(g, |r, c| {
        let d = *depth_k.get(r, c);
        if !is_valid_depth(d) {
            return None;
        }
        let y = k_to_src.transform(&Point3::from(g.dir_at(r as f64, c as f64) * d)).coords;
        if !(y.norm() > 0.0) {
            return None;
        }
        let (pr, pc) = g.project(&y);
        let t = crate::pano::bilinear_taps(&g, pr, pc);
        let mut acc = 0.0;
        for i in 0..4 {
            acc += t.w[i] * lum.data()[t.idx[i]];
        }
        Some(acc)
    }))
}

/// Patch NCC between `reference` and `warped` around every pixel. `None`
/// where the patch leaves the grid vertically or touches an invalid warp;
/// zero-variance patches score -1.
pub fn patch_ncc(reference: &Pano<f64>, warped: &Pano<Option<f64>>, patch: usize) -> Result<Pano<Option<f64>>, ConsistencyError> {
    if patch < 3 || patch.is_multiple_of(2) {
        return Err(ConsistencyError::BadPatch(patch));
    }
    reference.ensure_same_grid(warped)?;
    let g = *reference.grid();
    let (h, w) = (g.height() as i64, g.width() as i64);
    let half = (patch / 2) as i64;
    let n = (patch * patch) as f64;
    let mut a = Vec::with_capacity(patch * patch);
    let mut b = Vec::with_capacity(patch * patch);
    Ok(Pano::from_fn(g, |r, c| {
        let (r, c) = (r as i64, c as i64);
        if r - half < 0 || r + half >= h {
            return None;
        }
        a.clear();
        b.clear();
        for dr in -half..=half {
            for dc in -half..=half {
                let (rr, cc) = ((r + dr) as usize, (c + dc).rem_euclid(w) as usize);
                a.push(*reference.get(rr, cc));
                b.push((*warped.get(rr, cc))?);
            }
        }
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        if saa <= 1e-12 || sbb <= 1e-12 {
            return Some(-1.0);
        }
        Some(sab / (saa * sbb).sqrt())
    }))
}

/// `M_ncc`: 1 where warping the neighbour image through the aligned depth
/// matches frame `k` strictly better than warping through the rendered depth.
pub fn ncc_mask(
    image_k: &ColorPano,
    pose_k: &PoseSE3,
    neighbour: &ColorPano,
    pose_neighbour: &PoseSE3,
    d_a: &DepthPano,
    d_r: &DepthPano,
    patch: usize,
) -> Result<MaskPano, ConsistencyError> {
    if patch < 3 || patch.is_multiple_of(2) {
        return Err(ConsistencyError::BadPatch(patch));
    }
    let lum = image_k.luminance();
    let via_a = patch_ncc(&lum, &warp_luminance(d_a, pose_k, neighbour, pose_neighbour)?, patch)?;
    let via_r = patch_ncc(&lum, &warp_luminance(d_r, pose_k, neighbour, pose_neighbour)?, patch)?;
    Ok(ncc_compare(&via_a, &via_r))
}

pub(crate) fn ncc_compare(via_a: &Pano<Option<f64>>, via_r: &Pano<Option<f64>>) -> MaskPano {
    Pano::from_fn(*via_a.grid(), |r, c| match (via_a.get(r, c), via_r.get(r, c)) {
        (Some(a), Some(b)) => a > b,
        _ => false,
    })
}

/// `M_inlier = M_inc & M_con,a & M_ncc`.
pub fn inlier_mask(m_inc: &MaskPano, m_con_a: &MaskPano, m_ncc: &MaskPano) -> Result<MaskPano, ConsistencyError> {
    Ok(m_inc.and(m_con_a)?.and(m_ncc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_scene, raycast_pano, ScenePreset};
    use crate::sphere::{EquirectGrid, Vec3};
    use proptest::prelude::*;

    fn grid() -> EquirectGrid {
        EquirectGrid::with_height(32).unwrap()
    }

    fn room_depth(g: &EquirectGrid, pose: &PoseSE3) -> DepthPano {
        raycast_pano(&generate_scene(ScenePreset::Room, 5), pose, g).1
    }

    fn th() -> ConsistencyThresholds {
        ConsistencyThresholds::default()
    }

    #[test]
    fn identical_inputs_are_consistent() {
        let g = grid();
        let p = PoseSE3::from_rotation_vector(Vec3::new(0.1, 0.0, 0.3), Vec3::new(0.2, 0.0, 0.1));
        let d = room_depth(&g, &p);
        let m = pairwise_consistency(&d, &p, &d, &p, &th()).unwrap();
        assert_eq!(m.count(), g.len());
    }

    #[test]
    fn six_percent_scaling_fails_depth_term() {
        let g = grid();
        let p = PoseSE3::identity();
        let d = room_depth(&g, &p);
        let scaled = d.map(|v| 1.06 * v);
        assert_eq!(pairwise_consistency(&d, &p, &scaled, &p, &th()).unwrap().count(), 0);
    }

    #[test]
    fn thresholds_are_inclusive() {
        let t = th();
        assert!(t.accepts(0.008, 0.05));
        assert!(!t.accepts(0.0081, 0.0));
        assert!(!t.accepts(0.0, 0.0501));
        let g = grid();
        let p = PoseSE3::identity();
        let d = DepthPano::filled(g, 20.0);
        let r = DepthPano::filled(g, 21.0);
        assert_eq!(pairwise_consistency(&d, &p, &r, &p, &t).unwrap().count(), g.len());
    }

    #[test]
    fn pure_rotation_with_constant_depth_is_consistent() {
        let g = grid();
        let d = DepthPano::filled(g, 1.0);
        let spin = PoseSE3::from_rotation_vector(Vec3::new(0.0, 0.0, 0.7), Vec3::zeros());
        let m = pairwise_consistency(&d, &PoseSE3::identity(), &d, &spin, &th()).unwrap();
        assert_eq!(m.count(), g.len());
    }

    #[test]
    fn invalid_depth_is_never_consistent() {
        let g = grid();
        let p = PoseSE3::identity();
        let mut d = DepthPano::filled(g, 2.0);
        d.set(5, 5, f64::INFINITY);
        let m = pairwise_consistency(&d, &p, &d, &p, &th()).unwrap();
        assert!(!*m.get(5, 5));
        assert!(pairwise_consistency(&d, &p, &DepthPano::filled(EquirectGrid::with_height(4).unwrap(), 1.0), &p, &th()).is_err());
    }

    fn gt_sequence(n: usize) -> (Vec<DepthPano>, Vec<PoseSE3>) {
        let g = EquirectGrid::with_height(64).unwrap();
        let poses: Vec<PoseSE3> = (0..n)
            .map(|i| {
                PoseSE3::from_rotation_vector(
                    Vec3::new(0.0, 0.0, 0.05 * i as f64),
                    Vec3::new(0.1 * i as f64, 0.05 * i as f64, 0.0),
                )
            })
            .collect();
        (poses.iter().map(|p| room_depth(&g, p)).collect(), poses)
    }

    #[test]
    fn gt_masks_are_dense() {
        let (d, p) = gt_sequence(4);
        let m = cross_frame_mask(1, 3, &d, &p, &th()).unwrap();
        assert!(m.density() >= 0.999, "{}", m.density());
        let a = adjacent_mask(1, &d, &p, &th()).unwrap();
        assert!(a.density() >= 0.999, "{}", a.density());
        assert!(adjacent_mask(3, &d, &p, &th()).unwrap().density() >= 0.999);
        assert!(matches!(
            cross_frame_mask(2, 2, &d, &p, &th()),
            Err(ConsistencyError::NotAfter { .. })
        ));
        assert!(matches!(
            adjacent_mask(0, &d[..1], &p[..1], &th()),
            Err(ConsistencyError::NoNeighbor(0))
        ));
    }

    #[test]
    fn cross_frame_mask_is_a_product() {
        let (mut d, p) = gt_sequence(3);
        // Frame 0 inconsistent with everything: frame 1's adjacent factor vanishes.
        d[0] = d[0].map(|v| 2.0 * v);
        let m = cross_frame_mask(1, 2, &d, &p, &th()).unwrap();
        assert!(m.density() < 0.01);
        let first = cross_frame_mask(0, 2, &d, &p, &th()).unwrap();
        let direct = pairwise_consistency(&d[0], &p[0], &d[2], &p[2], &th()).unwrap();
        assert_eq!(first, direct);
    }

    #[test]
    fn consistency_is_symmetric_on_gt() {
        let (d, p) = gt_sequence(3);
        let g = *d[0].grid();
        let ab = pairwise_consistency(&d[0], &p[0], &d[2], &p[2], &th()).unwrap();
        let ba = pairwise_consistency(&d[2], &p[2], &d[0], &p[0], &th()).unwrap();
        let (mut total, mut ok) = (0, 0);
        for r in 0..g.height() {
            for c in 0..g.width() {
                if !*ab.get(r, c) {
                    continue;
                }
                let x = p[0].transform(&Point3::from(g.dir_at(r as f64, c as f64) * *d[0].get(r, c)));
                let (pr, pc) = g.project(&p[2].inverse_transform(&x).coords);
                let (rr, cc) = crate::sphere::PixelCoord::new(pr, pc).nearest(&g);
                total += 1;
                if *ba.get(rr, cc) {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
    }

    #[test]
    fn align_exact_affine() {
        let g = EquirectGrid::with_height(2).unwrap();
        let inf = f64::INFINITY;
        let d_r = DepthPano::from_vec(g, vec![1.0, 2.0, 3.0, inf, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let d_m = DepthPano::from_vec(g, vec![4.0, 6.0, 8.0, 5.0, 9.0, 9.0, 9.0, 9.0]).unwrap();
        let mask = MaskPano::from_fn(g, |r, _| r == 0);
        let (fit, d_a) = align_depth(&d_m, &d_r, &mask).unwrap();
        assert!((fit.scale - 0.5).abs() < 1e-12);
        assert!((fit.shift + 1.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-9);
        assert_eq!(fit.support, 3);
        for i in 0..3 {
            assert!((d_a.data()[i] - d_r.data()[i]).abs() < 1e-12);
        }
        assert!((d_a.data()[3] - 1.5).abs() < 1e-12);

        let (same, _) = align_depth(&d_r, &d_r, &mask).unwrap();
        assert!((same.scale - 1.0).abs() < 1e-12 && same.shift.abs() < 1e-12);

        let flat = DepthPano::filled(g, 3.0);
        assert!(matches!(
            align_depth(&flat, &d_r, &mask),
            Err(ConsistencyError::DegenerateFit { .. })
        ));
        assert!(matches!(
            align_depth(&d_m, &d_r, &MaskPano::filled(g, false)),
            Err(ConsistencyError::DegenerateFit { support: 0, .. })
        ));
    }

    #[test]
    fn ncc_patch_validation_and_ties() {
        let g = grid();
        let p = PoseSE3::identity();
        let img = ColorPano::from_fn(g, |r, c| [((r * 7 + c * 3) % 11) as f64 / 10.0; 3]);
        let d = DepthPano::filled(g, 2.0);
        for bad in [1, 2, 4, 8] {
            assert_eq!(ncc_mask(&img, &p, &img, &p, &d, &d, bad), Err(ConsistencyError::BadPatch(bad)));
        }
        assert_eq!(ncc_mask(&img, &p, &img, &p, &d, &d, 7).unwrap().count(), 0);
    }

    #[test]
    fn flat_patches_never_win() {
        let g = grid();
        let lum = Pano::filled(g, 0.5);
        let warped = Pano::filled(g, Some(0.5));
        let s = patch_ncc(&lum, &warped, 3).unwrap();
        assert_eq!(*s.get(10, 10), Some(-1.0));
        assert_eq!(*s.get(0, 10), None);
    }

    #[test]
    fn ncc_prefers_true_depth() {
        let scene = generate_scene(ScenePreset::Room, 11);
        let g = EquirectGrid::with_height(64).unwrap();
        let p0 = PoseSE3::identity();
        let p1 = PoseSE3::from_rotation_vector(Vec3::new(0.0, 0.0, 0.05), Vec3::new(0.3, 0.2, 0.0));
        let (i0, _) = raycast_pano(&scene, &p0, &g);
        let (i1, d1) = raycast_pano(&scene, &p1, &g);
        let wrong = d1.map(|v| 1.2 * v);
        let m = ncc_mask(&i1, &p1, &i0, &p0, &d1, &wrong, 7).unwrap();
        let lum = i1.luminance();
        // Textured pixels: non-trivial local contrast.
        let support = Pano::from_fn(g, |r, c| {
            if r < 3 || r + 3 >= g.height() {
                return false;
            }
            let v = *lum.get(r, c);
            let n = *lum.get(r, (c + 1) % g.width());
            let s = *lum.get(r + 1, c);
            (v - n).abs() + (v - s).abs() > 0.01
        });
        let rate = m.density_within(&support);
        assert!(rate >= 0.9, "{rate}");
    }

    #[test]
    fn inlier_mask_is_an_and() {
        let g = EquirectGrid::with_height(2).unwrap();
        let ones = MaskPano::filled(g, true);
        assert_eq!(inlier_mask(&ones, &ones, &ones).unwrap().count(), g.len());
        let mut hole = ones.clone();
        hole.set(1, 2, false);
        for m in [
            inlier_mask(&hole, &ones, &ones),
            inlier_mask(&ones, &hole, &ones),
            inlier_mask(&ones, &ones, &hole),
        ] {
            let m = m.unwrap();
            assert!(!*m.get(1, 2));
            assert_eq!(m.count(), g.len() - 1);
        }
    }

    #[test]
    fn inconsistency_is_the_rendered_complement() {
        let g = EquirectGrid::with_height(2).unwrap();
        let mut d = DepthPano::filled(g, 1.0);
        d.set(0, 0, f64::INFINITY);
        let con = MaskPano::from_fn(g, |_, c| c < 2);
        let inc = inconsistency_mask(&con, &d).unwrap();
        assert!(!*inc.get(0, 0) && !*inc.get(0, 1) && *inc.get(0, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn masks_ignore_global_scale(
            exp in -2i32..3,
            tx in -0.5f64..0.5,
            ty in -0.5f64..0.5,
            yaw in -0.5f64..0.5,
        ) {
            let g = EquirectGrid::with_height(24).unwrap();
            let p0 = PoseSE3::identity();
            let p1 = PoseSE3::from_rotation_vector(Vec3::new(0.0, 0.0, yaw), Vec3::new(tx, ty, 0.0));
            let d0 = room_depth(&g, &p0);
            let d1 = room_depth(&g, &p1);
            let a = pairwise_consistency(&d0, &p0, &d1, &p1, &th()).unwrap();
            let s = 2f64.powi(exp);
            let b = pairwise_consistency(&d0.map(|v| s * v), &p0.scaled(s), &d1.map(|v| s * v), &p1.scaled(s), &th()).unwrap();
            prop_assert_eq!(&a, &b);
            let again = pairwise_consistency(&d0, &p0, &d1, &p1, &th()).unwrap();
            prop_assert_eq!(a, again);
        }
    }
}
