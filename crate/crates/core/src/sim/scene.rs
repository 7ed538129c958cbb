use alloc::vec::Vec;
use core::str::FromStr;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use super::{rng_for, SimError};
use crate::pano::{ColorPano, DepthPano, Pano, Rgb};
use crate::sphere::{EquirectGrid, Point3, PoseSE3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScenePreset {
    /// Closed, convex textured box: every ray from inside hits a wall.
    Room,
    /// Open-air court with pillars and low walls; rays above the walls see sky.
    Courtyard,
}

impl FromStr for ScenePreset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "room" => Ok(ScenePreset::Room),
            "courtyard" => Ok(ScenePreset::Courtyard),
            other => Err(SimError::UnknownPreset(other.into())),
        }
    }
}

/// Procedural checker plus value-noise texture in surface coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub base: Rgb,
    pub accent: Rgb,
    pub checker_size: f64,
    pub noise_scale: f64,
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Texture {
    pub fn eval(&self, s: f64, t: f64) -> Rgb {
        let cs = (s / self.checker_size).floor() as i64 + (t / self.checker_size).floor() as i64;
        let checker = cs.rem_euclid(2) as f64;
        let n = 0.65 * value_noise(s / self.noise_scale, t / self.noise_scale, self.seed)
            + 0.35 * value_noise(2.3 * s / self.noise_scale, 2.3 * t / self.noise_scale, self.seed ^ 0x9e37);
        let gain = 1.0 - self.noise_amplitude + 2.0 * self.noise_amplitude * n;
        let mut out = [0.0; 3];
        for ch in 0..3 {
            let c = self.base[ch] + (self.accent[ch] - self.base[ch]) * checker;
            out[ch] = (c * gain).clamp(0.0, 1.0);
        }
        out
    }

    fn random(rng: &mut impl Rng, seed: u64) -> Self {
        let mut color = |lo: f64, hi: f64| -> Rgb { [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)] };
        let base = color(0.15, 0.55);
        let accent = color(0.45, 0.95);
        Texture {
            base,
            accent,
            checker_size: rng.random_range(0.45..0.8),
            noise_scale: rng.random_range(0.12..0.25),
            noise_amplitude: rng.random_range(0.25..0.4),
            seed,
        }
    }
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut h = (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ seed.wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothly interpolated lattice noise in `[0, 1)`.
fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let fx = x.floor();
    let fy = y.floor();
    let (ix, iy) = (fx as i64, fy as i64);
    let tx = x - fx;
    let ty = y - fy;
    let sx = tx * tx * (3.0 - 2.0 * tx);
    let sy = ty * ty * (3.0 - 2.0 * ty);
    let a = lattice(ix, iy, seed);
    let b = lattice(ix + 1, iy, seed);
    let c = lattice(ix, iy + 1, seed);
    let d = lattice(ix + 1, iy + 1, seed);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [Point3; 3],
    pub texture: usize,
    /// Texture frame: surface coordinates are offsets from `uv_origin` along the two axes.
    pub uv_origin: Point3,
    pub uv_axes: [Vec3; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Point3,
    pub radius: f64,
    pub texture: usize,
}

/// First-hit result of a ray query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub triangles: Vec<Triangle>,
    pub spheres: Vec<Sphere>,
    pub textures: Vec<Texture>,
    /// Diagonal of the scene's bounding box, in scene units.
    pub diameter: f64,
}

impl SyntheticScene {
    pub fn empty(diameter: f64) -> Self {
        Self {
            triangles: Vec::new(),
            spheres: Vec::new(),
            textures: Vec::new(),
            diameter,
        }
    }

    pub fn add_texture(&mut self, t: Texture) -> usize {
        self.textures.push(t);
        self.textures.len() - 1
    }

    /// Parallelogram `origin + a*edge_u + b*edge_v`, `a, b in [0, 1]`, as two triangles
    /// sharing one texture frame.
    pub fn add_quad(&mut self, origin: Point3, edge_u: Vec3, edge_v: Vec3, texture: usize) {
        let axes = [edge_u.normalize(), edge_v.normalize()];
        let p1 = origin + edge_u;
        let p2 = origin + edge_u + edge_v;
        let p3 = origin + edge_v;
        for vertices in [[origin, p1, p2], [origin, p2, p3]] {
            self.triangles.push(Triangle {
                vertices,
                texture,
                uv_origin: origin,
                uv_axes: axes,
            });
        }
    }

    /// Axis-aligned box from `lo` to `hi`. The bottom face is optional since boxes
    /// standing on a ground plane never show it.
    pub fn add_box(&mut self, lo: Point3, hi: Point3, texture: usize, with_bottom: bool) {
        let d = hi - lo;
        let (ex, ey, ez) = (Vec3::x() * d.x, Vec3::y() * d.y, Vec3::z() * d.z);
        self.add_quad(lo, ex, ez, texture);
        self.add_quad(lo + ey, ex, ez, texture);
        self.add_quad(lo, ey, ez, texture);
        self.add_quad(lo + ex, ey, ez, texture);
        self.add_quad(lo + ez, ex, ey, texture);
        if with_bottom {
            self.add_quad(lo, ex, ey, texture);
        }
    }

    pub fn raycast(&self, origin: &Point3, dir: &Vec3) -> Option<Hit> {
        let mut best: Option<(f64, usize, bool)> = None;
        for (i, tri) in self.triangles.iter().enumerate() {
            if let Some(t) = intersect_triangle(origin, dir, &tri.vertices) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, i, true));
                }
            }
        }
        for (i, s) in self.spheres.iter().enumerate() {
            if let Some(t) = intersect_sphere(origin, dir, s) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, i, false));
                }
            }
        }
        let (t, i, is_tri) = best?;
        let p = origin + dir * t;
        let color = if is_tri {
            let tri = &self.triangles[i];
            let rel = p - tri.uv_origin;
            self.textures[tri.texture].eval(rel.dot(&tri.uv_axes[0]), rel.dot(&tri.uv_axes[1]))
        } else {
            let s = &self.spheres[i];
            let n = (p - s.center) / s.radius;
            let u = n.y.atan2(n.x) * s.radius;
            let v = n.z.clamp(-1.0, 1.0).acos() * s.radius;
            self.textures[s.texture].eval(u, v)
        };
        Some(Hit { distance: t, color })
    }
}

fn intersect_triangle(origin: &Point3, dir: &Vec3, v: &[Point3; 3]) -> Option<f64> {
    let e1 = v[1] - v[0];
    let e2 = v[2] - v[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - v[0];
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let w = dir.dot(&q) * inv;
    if w < -1e-12 || u + w > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}

fn intersect_sphere(origin: &Point3, dir: &Vec3, s: &Sphere) -> Option<f64> {
    let oc = origin - s.center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - s.radius * s.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > 1e-9 {
        Some(t0)
    } else if t1 > 1e-9 {
        Some(t1)
    } else {
        None
    }
}

/// Builds a preset scene. Geometry is fixed per preset; textures depend on `seed`.
pub fn generate_scene(preset: ScenePreset, seed: u64) -> SyntheticScene {
    let mut rng = rng_for(seed, &[0x5ce4e, preset as u64]);
    match preset {
        ScenePreset::Room => {
            let (lo, hi) = (Point3::new(-4.0, -3.0, -1.4), Point3::new(4.0, 3.0, 1.6));
            let mut scene = SyntheticScene::empty((hi - lo).norm());
            let d = hi - lo;
            let (ex, ey, ez) = (Vec3::x() * d.x, Vec3::y() * d.y, Vec3::z() * d.z);
            let faces = [
                (lo, ex, ey),
                (lo + ez, ex, ey),
                (lo, ex, ez),
                (lo + ey, ex, ez),
                (lo, ey, ez),
                (lo + ex, ey, ez),
            ];
            for (k, (o, u, v)) in faces.into_iter().enumerate() {
                let tex = Texture::random(&mut rng, seed.wrapping_add(k as u64 * 7919));
                let t = scene.add_texture(tex);
                scene.add_quad(o, u, v, t);
            }
            scene
        }
        ScenePreset::Courtyard => {
            let half = 6.0;
            let ground = -1.5;
            let wall_top = 0.8;
            let mut scene = SyntheticScene::empty((Point3::new(half, half, 2.0) - Point3::new(-half, -half, ground)).norm());
            let tex = |scene: &mut SyntheticScene, k: u64, rng: &mut _| {
                let t = Texture::random(rng, seed.wrapping_add(k * 7919));
                scene.add_texture(t)
            };
            let g = tex(&mut scene, 0, &mut rng);
            scene.add_quad(Point3::new(-half, -half, ground), Vec3::x() * 2.0 * half, Vec3::y() * 2.0 * half, g);
            let w = tex(&mut scene, 1, &mut rng);
            let h = Vec3::z() * (wall_top - ground);
            let corners = [
                Point3::new(-half, -half, ground),
                Point3::new(half, -half, ground),
                Point3::new(half, half, ground),
                Point3::new(-half, half, ground),
            ];
            for i in 0..4 {
                let a = corners[i];
                let b = corners[(i + 1) % 4];
                scene.add_quad(a, b - a, h, w);
            }
            let p = tex(&mut scene, 2, &mut rng);
            for (x, y) in [(-2.2, -1.8), (2.2, -1.8), (2.2, 1.8), (-2.2, 1.8)] {
                scene.add_box(
                    Point3::new(x - 0.25, y - 0.25, ground),
                    Point3::new(x + 0.25, y + 0.25, 1.8),
                    p,
                    false,
                );
            }
            let b = tex(&mut scene, 3, &mut rng);
            scene.add_box(Point3::new(-1.0, 2.6, ground), Point3::new(1.0, 3.2, -0.9), b, false);
            scene
        }
    }
}

/// Subpixel offsets used to antialias color (depth uses the pixel center ray).
const COLOR_SAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)];

/// Ground-truth render: Euclidean hit distance and antialiased color per pixel.
/// Pixels whose center ray escapes get depth `+inf` and black color.
pub fn raycast_pano(scene: &SyntheticScene, pose: &PoseSE3, grid: &EquirectGrid) -> (ColorPano, DepthPano) {
    let origin = pose.center();
    let mut color = Vec::with_capacity(grid.len());
    let mut depth = Vec::with_capacity(grid.len());
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let dir = pose.rotate(&grid.dir_at(r as f64, c as f64));
            let hit = scene.raycast(&origin, &dir);
            depth.push(hit.map_or(f64::INFINITY, |h| h.distance));
            let mut acc = [0.0; 3];
            for (dr, dc) in COLOR_SAMPLES {
                let d = pose.rotate(&grid.dir_at(r as f64 + dr, c as f64 + dc));
                if let Some(h) = scene.raycast(&origin, &d) {
                    for ch in 0..3 {
                        acc[ch] += 0.25 * h.color[ch];
                    }
                }
            }
            color.push(acc);
        }
    }
    (
        Pano::from_vec(*grid, color).expect("one sample per pixel"),
        Pano::from_vec(*grid, depth).expect("one sample per pixel"),
    )
}
