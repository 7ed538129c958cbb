//! Surfel map: the splat primitives, their panoramic renderer and the
//! per-surfel bookkeeping used to prune superseded geometry.
//!
//! Surfels are oriented elliptical disks. A pixel ray is intersected with the
//! disk plane; the hit is a fragment if it lands inside the ellipse, with
//! weight `opacity * exp(-2 q)` where `q` is the squared normalized ellipse
//! radius of the hit (a Gaussian whose sigma is half the disk radius, cut at
//! the rim). Per pixel, fragments within a thin relative depth band behind the
//! nearest one are blended for color; the heaviest of them is the pixel's
//! winner and supplies the rendered depth.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::pano::{is_valid_depth, ColorPano, DepthPano, MaskPano, Pano, PanoError, Rgb};
use crate::sphere::{EquirectGrid, Point3, PoseSE3, Vec3};

/// Opacity given to new surfels and restored by [`SurfelMap::prune_and_reset`].
pub const INITIAL_OPACITY: f64 = 1.0;

/// Fragments farther than this relative distance behind the nearest one are occluded.
pub const DEPTH_BAND: f64 = 0.02;

/// Disk radius relative to the half-diagonal of the sampling cell, so that
/// neighbouring disks overlap slightly.
const COVER: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplatError {
    #[error("depth map has no valid pixel to initialize from")]
    NoValidDepth,
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("render refers to surfel {id} but the map holds {len}")]
    StaleRender { id: usize, len: usize },
    #[error(transparent)]
    Pano(#[from] PanoError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Surfel {
    pub position: Point3,
    /// Unit normal of the disk plane.
    pub normal: Vec3,
    /// Unit in-plane axis carrying `radii[0]`; the second axis is `normal x tangent`.
    pub tangent: Vec3,
    /// Ellipse semi-axes, scene units.
    pub radii: [f64; 2],
    pub color: Rgb,
    pub opacity: f64,
    pub source_frame: usize,
}

impl Surfel {
    /// Circular disk facing `normal`.
    pub fn disk(position: Point3, normal: Vec3, radius: f64, color: Rgb, source_frame: usize) -> Self {
        let n = normal.normalize();
        let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let tangent = (helper - n * n.dot(&helper)).normalize();
        Self {
            position,
            normal: n,
            tangent,
            radii: [radius, radius],
            color,
            opacity: INITIAL_OPACITY,
            source_frame,
        }
    }

    /// Largest semi-axis.
    pub fn radius(&self) -> f64 {
        self.radii[0].max(self.radii[1])
    }

    pub fn bitangent(&self) -> Vec3 {
        self.normal.cross(&self.tangent)
    }
}

/// Geometry and color of a surfel about to be inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfelSeed {
    pub position: Point3,
    pub normal: Vec3,
    pub tangent: Vec3,
    pub radii: [f64; 2],
    pub color: Rgb,
}

impl SurfelSeed {
    pub fn disk(position: Point3, normal: Vec3, radius: f64, color: Rgb) -> Self {
        let s = Surfel::disk(position, normal, radius, color, 0);
        Self {
            position,
            normal: s.normal,
            tangent: s.tangent,
            radii: s.radii,
            color,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskChannel {
    Inlier,
    Inconsistent,
}

/// Weighted sums behind one surfel's accumulated mask values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub inlier_weight: f64,
    pub inlier_sum: f64,
    pub inconsistent_weight: f64,
    pub inconsistent_sum: f64,
}

impl Accumulator {
    /// Weighted mean of the inlier mask over the surfel's winning pixels.
    pub fn inlier(&self) -> Option<f64> {
        ratio(self.inlier_sum, self.inlier_weight)
    }

    pub fn inconsistent(&self) -> Option<f64> {
        ratio(self.inconsistent_sum, self.inconsistent_weight)
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some((num / den).clamp(0.0, 1.0))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PruneThresholds {
    /// Surfels whose accumulated inlier value exceeds this are removed.
    pub inlier: f64,
    /// Kept surfels whose accumulated inconsistency exceeds this get their opacity reset.
    pub inconsistent: f64,
}

impl Default for PruneThresholds {
    fn default() -> Self {
        Self {
            inlier: 0.8,
            inconsistent: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PruneStats {
    pub pruned: usize,
    pub reset: usize,
}

/// Panorama rendered from a [`SurfelMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ColorPano,
    /// Depth of the winning fragment; `+inf` where nothing renders.
    pub depth: DepthPano,
    pub winner: Pano<Option<usize>>,
    /// Weight of the winning fragment, 0 where nothing renders.
    pub weight: Pano<f64>,
}

impl RenderOutput {
    /// Fraction of pixels with a winner.
    pub fn coverage(&self) -> f64 {
        self.winner.data().iter().filter(|w| w.is_some()).count() as f64 / self.winner.data().len() as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfelMap {
    surfels: Vec<Surfel>,
    acc: Vec<Accumulator>,
}

impl SurfelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_surfels(surfels: Vec<Surfel>) -> Self {
        let acc = vec![Accumulator::default(); surfels.len()];
        Self { surfels, acc }
    }

    pub fn len(&self) -> usize {
        self.surfels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfels.is_empty()
    }

    pub fn surfels(&self) -> &[Surfel] {
        &self.surfels
    }

    pub fn surfels_mut(&mut self) -> &mut [Surfel] {
        &mut self.surfels
    }

    pub fn accumulators(&self) -> &[Accumulator] {
        &self.acc
    }

    /// Appends seeds as fully opaque surfels.
    pub fn merge_points(&mut self, seeds: &[SurfelSeed], source_frame: usize) {
        self.surfels.extend(seeds.iter().map(|s| Surfel {
            position: s.position,
            normal: s.normal,
            tangent: s.tangent,
            radii: s.radii,
            color: s.color,
            opacity: INITIAL_OPACITY,
            source_frame,
        }));
        self.acc.resize(self.surfels.len(), Accumulator::default());
    }

    /// Adds each winner pixel's `(w, w * M)` to its surfel's running sums.
    pub fn accumulate_mask(&mut self, out: &RenderOutput, mask: &MaskPano, channel: MaskChannel) -> Result<(), SplatError> {
        out.winner.ensure_same_grid(mask)?;
        for ((w, weight), m) in out.winner.data().iter().zip(out.weight.data()).zip(mask.data()) {
            let Some(id) = *w else { continue };
            let a = self.acc.get_mut(id).ok_or(SplatError::StaleRender {
                id,
                len: self.surfels.len(),
            })?;
            let mv = if *m { *weight } else { 0.0 };
            match channel {
                MaskChannel::Inlier => {
                    a.inlier_weight += weight;
                    a.inlier_sum += mv;
                }
                MaskChannel::Inconsistent => {
                    a.inconsistent_weight += weight;
                    a.inconsistent_sum += mv;
                }
            }
        }
        Ok(())
    }

    /// Removes surfels superseded by inliers, resets the opacity of kept but
    /// inconsistent ones, then clears every accumulator. Surfels that never
    /// won a pixel are left alone.
    pub fn prune_and_reset(&mut self, th: &PruneThresholds) -> PruneStats {
        let mut stats = PruneStats::default();
        let mut keep = Vec::with_capacity(self.surfels.len());
        for (mut s, a) in self.surfels.drain(..).zip(self.acc.iter()) {
            let inlier = a.inlier().unwrap_or(0.0);
            if inlier > th.inlier {
                stats.pruned += 1;
                continue;
            }
            if a.inconsistent().is_some_and(|v| v > th.inconsistent) {
                s.opacity = INITIAL_OPACITY;
                stats.reset += 1;
            }
            keep.push(s);
        }
        self.surfels = keep;
        self.acc.clear();
        self.acc.resize(self.surfels.len(), Accumulator::default());
        stats
    }

    pub fn clear_accumulators(&mut self) {
        self.acc.iter_mut().for_each(|a| *a = Accumulator::default());
    }

    /// Sets each surfel's color to the weighted mean of the pixels it wins in
    /// the given renders. Surfels that win nothing keep their color.
    pub fn update_colors_from(&mut self, observations: &[(&RenderOutput, &ColorPano)]) -> Result<(), SplatError> {
        let mut sums = vec![([0.0f64; 3], 0.0f64); self.surfels.len()];
        for (out, image) in observations {
            out.winner.ensure_same_grid(image)?;
            for ((w, weight), c) in out.winner.data().iter().zip(out.weight.data()).zip(image.data()) {
                let Some(id) = *w else { continue };
                let s = sums.get_mut(id).ok_or(SplatError::StaleRender {
                    id,
                    len: self.surfels.len(),
                })?;
                for ch in 0..3 {
                    s.0[ch] += weight * c[ch];
                }
                s.1 += weight;
            }
        }
        for (surfel, (c, w)) in self.surfels.iter_mut().zip(sums) {
            if w > 0.0 {
                surfel.color = c.map(|v| v / w);
            }
        }
        Ok(())
    }

    /// Renders every `(image, pose)` pair and refreshes colors from them.
    pub fn update_colors(&mut self, frames: &[(&ColorPano, PoseSE3)]) -> Result<(), SplatError> {
        let renders: Vec<RenderOutput> = frames.iter().map(|(img, pose)| render(self, pose, img.grid())).collect();
        let obs: Vec<(&RenderOutput, &ColorPano)> = renders.iter().zip(frames.iter().map(|f| f.0)).collect();
        self.update_colors_from(&obs)
    }
}

/// Surfel seeds from every `stride`-th pixel of a depth map, optionally
/// restricted to `mask`.
///
/// Disk orientation and extent come from the spacing to the neighbouring
/// samples, so a seed tiles its sampling cell. Neighbours across a depth
/// discontinuity are replaced by a point at the seed's own distance, which
/// makes edge seeds face the camera instead of stretching across the gap.
pub fn seeds_from_depth(
    color: &ColorPano,
    depth: &DepthPano,
    pose: &PoseSE3,
    mask: Option<&MaskPano>,
    stride: usize,
) -> Result<Vec<SurfelSeed>, SplatError> {
    if stride == 0 {
        return Err(SplatError::InvalidStride);
    }
    color.ensure_same_grid(depth)?;
    if let Some(m) = mask {
        m.ensure_same_grid(depth)?;
    }
    let g = *depth.grid();
    let (h, w) = (g.height(), g.width());
    let s = stride as i64;
    let local = |r: i64, c: i64, d0: f64| -> Vec3 {
        let r = r.clamp(0, h as i64 - 1) as usize;
        let c = c.rem_euclid(w as i64) as usize;
        let d = *depth.get(r, c);
        let d = if is_valid_depth(d) && (d - d0).abs() <= 0.1 * d0 { d } else { d0 };
        g.dir_at(r as f64, c as f64) * d
    };
    let mut seeds = Vec::new();
    let mut r = stride / 2;
    while r < h {
        let mut c = stride / 2;
        while c < w {
            let d = *depth.get(r, c);
            if is_valid_depth(d) && mask.is_none_or(|m| *m.get(r, c)) {
                let (ri, ci) = (r as i64, c as i64);
                let x = g.dir_at(r as f64, c as f64) * d;
                let e_col = (local(ri, ci + s, d) - local(ri, ci - s, d)) * 0.5;
                let up = local(ri - s, ci, d);
                let down = local(ri + s, ci, d);
                let rows = ((ri + s).min(h as i64 - 1) - (ri - s).max(0)) as f64 / s as f64;
                let e_row = if rows > 0.0 { (down - up) / rows } else { Vec3::zeros() };
                seeds.push(cell_seed(&x, &e_col, &e_row, d * g.pitch() * stride as f64, color.get(r, c), pose));
            }
            c += stride;
        }
        r += stride;
    }
    Ok(seeds)
}

fn cell_seed(x: &Vec3, e_col: &Vec3, e_row: &Vec3, cell: f64, color: &Rgb, pose: &PoseSE3) -> SurfelSeed {
    let n = e_col.cross(e_row);
    let position = pose.transform(&Point3::from(*x));
    let fallback = || {
        let normal = pose.rotate(&(-x.normalize()));
        SurfelSeed::disk(position, normal, COVER * cell / core::f64::consts::SQRT_2, *color)
    };
    let nn = n.norm();
    let lc = e_col.norm();
    if !(nn > 1e-12 * lc * e_row.norm()) || lc == 0.0 {
        return fallback();
    }
    let mut normal = n / nn;
    if normal.dot(x) > 0.0 {
        normal = -normal;
    }
    // Grazing cells would produce huge slivers; cap the stretch.
    if normal.dot(&x.normalize()).abs() < 0.15 {
        return fallback();
    }
    let u = e_col / lc;
    let v = normal.cross(&u);
    let ru = COVER * lc / core::f64::consts::SQRT_2;
    let rv = COVER * e_row.dot(&v).abs() / core::f64::consts::SQRT_2;
    if !(rv > 0.0) {
        return fallback();
    }
    SurfelSeed {
        position,
        normal: pose.rotate(&normal),
        tangent: pose.rotate(&u),
        radii: [ru, rv],
        color: *color,
    }
}

/// One surfel per `stride`-th valid pixel of `depth`, seen from `pose`.
pub fn init_from_depth(color: &ColorPano, depth: &DepthPano, pose: &PoseSE3, stride: usize) -> Result<SurfelMap, SplatError> {
    let seeds = seeds_from_depth(color, depth, pose, None, stride)?;
    if seeds.is_empty() {
        return Err(SplatError::NoValidDepth);
    }
    let mut map = SurfelMap::new();
    map.merge_points(&seeds, 0);
    Ok(map)
}

/// A surfel in camera coordinates, ready for ray tests.
struct Projected {
    p: Vec3,
    n: Vec3,
    u: Vec3,
    v: Vec3,
    inv_r2: [f64; 2],
    opacity: f64,
    rows: (usize, usize),
    /// First column and column count (may wrap); `None` covers all columns.
    cols: Option<(i64, i64)>,
}

fn project_surfel(s: &Surfel, pose: &PoseSE3, g: &EquirectGrid) -> Option<Projected> {
    let p = pose.inverse_transform(&s.position).coords;
    let dist = p.norm();
    let rmax = s.radius();
    if !(dist > rmax * 1.001) || !(rmax > 0.0) {
        return None;
    }
    let (h, w) = (g.height() as f64, g.width() as f64);
    let alpha = (rmax / dist).asin();
    let theta = (p.x * p.x + p.y * p.y).sqrt().atan2(p.z);
    let row_of = |t: f64| t * h / core::f64::consts::PI - 0.5;
    let r0 = row_of(theta - alpha).ceil().max(0.0);
    let r1 = row_of(theta + alpha).floor().min(h - 1.0);
    if r1 < r0 {
        return None;
    }
    let pi = core::f64::consts::PI;
    let cols = if theta - alpha <= 0.0 || theta + alpha >= pi {
        None
    } else {
        let dphi = (alpha.sin() / theta.sin()).min(1.0).asin();
        let phi = p.y.atan2(p.x);
        let col_of = |f: f64| (f + pi) * w / (2.0 * pi) - 0.5;
        let c0 = col_of(phi - dphi).ceil() as i64;
        let c1 = col_of(phi + dphi).floor() as i64;
        if c1 < c0 {
            return None;
        }
        Some((c0, (c1 - c0 + 1).min(w as i64)))
    };
    Some(Projected {
        p,
        n: pose.rotation().inverse_transform_vector(&s.normal),
        u: pose.rotation().inverse_transform_vector(&s.tangent),
        v: pose.rotation().inverse_transform_vector(&s.bitangent()),
        inv_r2: [1.0 / (s.radii[0] * s.radii[0]), 1.0 / (s.radii[1] * s.radii[1])],
        opacity: s.opacity,
        rows: (r0 as usize, r1 as usize),
        cols,
    })
}

impl Projected {
    /// Calls `f(pixel index, depth, weight)` for every pixel the disk covers.
    fn for_each_fragment(&self, g: &EquirectGrid, dirs: &[Vec3], mut f: impl FnMut(usize, f64, f64)) {
        let w = g.width() as i64;
        let (c0, n) = self.cols.unwrap_or((0, w));
        let np = self.n.dot(&self.p);
        for r in self.rows.0..=self.rows.1 {
            for k in 0..n {
                let c = (c0 + k).rem_euclid(w) as usize;
                let idx = g.index(r, c);
                let d = &dirs[idx];
                let nd = self.n.dot(d);
                if nd.abs() < 1e-9 {
                    continue;
                }
                let t = np / nd;
                if !(t > 0.0) {
                    continue;
                }
                let off = d * t - self.p;
                let a = off.dot(&self.u);
                let b = off.dot(&self.v);
                let q = a * a * self.inv_r2[0] + b * b * self.inv_r2[1];
                if q <= 1.0 {
                    f(idx, t, self.opacity * (-2.0 * q).exp());
                }
            }
        }
    }
}

/// Renders the map from `pose` onto `grid`.
pub fn render(map: &SurfelMap, pose: &PoseSE3, grid: &EquirectGrid) -> RenderOutput {
    let dirs = grid.directions();
    let projected: Vec<Option<Projected>> = map.surfels.iter().map(|s| project_surfel(s, pose, grid)).collect();

    // (pixel, surfel id, depth, weight), gathered once for both passes.
    let mut frags: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (id, p) in projected.iter().enumerate() {
        if let Some(p) = p {
            p.for_each_fragment(grid, &dirs, |i, t, wt| frags.push((i, id, t, wt)));
        }
    }

    let mut front = vec![f64::INFINITY; grid.len()];
    for &(i, _, t, _) in &frags {
        if t < front[i] {
            front[i] = t;
        }
    }

    let mut best: Vec<Option<(usize, f64, f64)>> = vec![None; grid.len()];
    let mut color = vec![[0.0f64; 3]; grid.len()];
    let mut wsum = vec![0.0f64; grid.len()];
    for &(i, id, t, wt) in &frags {
        if t > front[i] * (1.0 + DEPTH_BAND) {
            continue;
        }
        let c = map.surfels[id].color;
        for ch in 0..3 {
            color[i][ch] += wt * c[ch];
        }
        wsum[i] += wt;
        if best[i].is_none_or(|(_, _, bw)| wt > bw) {
            best[i] = Some((id, t, wt));
        }
    }
    for (c, w) in color.iter_mut().zip(&wsum) {
        if *w > 0.0 {
            *c = c.map(|v| v / w);
        }
    }
    let depth = best.iter().map(|b| b.map_or(f64::INFINITY, |(_, t, _)| t)).collect();
    let winner = best.iter().map(|b| b.map(|(id, _, _)| id)).collect();
    let weight = best.iter().map(|b| b.map_or(0.0, |(_, _, w)| w)).collect();
    let mk = |data| Pano::from_vec(*grid, data).expect("one value per pixel");
    RenderOutput {
        color: mk(color),
        depth: Pano::from_vec(*grid, depth).expect("one value per pixel"),
        winner: Pano::from_vec(*grid, winner).expect("one value per pixel"),
        weight: Pano::from_vec(*grid, weight).expect("one value per pixel"),
    }
}

/// All fragments covering one pixel as `(surfel id, depth, weight)`, for
/// inspection and tests. Ignores the depth band.
pub fn fragments_at(map: &SurfelMap, pose: &PoseSE3, grid: &EquirectGrid, row: usize, col: usize) -> Vec<(usize, f64, f64)> {
    let dirs = grid.directions();
    let target = grid.index(row, col);
    let mut out = Vec::new();
    for (id, s) in map.surfels.iter().enumerate() {
        if let Some(p) = project_surfel(s, pose, grid) {
            p.for_each_fragment(grid, &dirs, |i, t, w| {
                if i == target {
                    out.push((id, t, w));
                }
            });
        }
    }
    out
}
