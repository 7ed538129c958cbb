//! Spherical camera model, rigid transforms and angular error metrics.
//!
//! Conventions used throughout the crate:
//!
//! - camera axes: `+x` forward, `+z` up, `+y` left;
//! - equirectangular row 0 is the north pole (`+z`), columns run west to east
//!   starting at longitude `-pi`;
//! - integer pixel coordinates name pixel *centers*, so pixel `(r, c)` looks
//!   along colatitude `pi (r + 0.5) / H` and longitude `2 pi (c + 0.5) / W - pi`.

use core::f64::consts::PI;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance accepted by [`EquirectGrid::dir_to_pixel`] on the input norm.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SphereError {
    #[error("pixel ({row}, {col}) lies outside a {height}x{width} grid")]
    OutOfGrid { row: f64, col: f64, height: usize, width: usize },
    #[error("direction has norm {norm}, expected a unit vector")]
    NotUnit { norm: f64 },
    #[error("invalid equirectangular grid {height}x{width}: width must be 2*height and height >= 2")]
    InvalidGrid { height: usize, width: usize },
    /// The two directions are (numerically) antipodal: the tangent error is unbounded.
    #[error("antipodal directions, tangent error is infinite")]
    Antipodal,
}

/// A bearing vector on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnitDir(Vec3);

impl UnitDir {
    /// Normalizes `v`; `None` for zero or non-finite input.
    pub fn normalize(v: Vec3) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(Self(v / n))
        } else {
            None
        }
    }

    /// Accepts `v` as-is if its norm is within `tol` of one.
    pub fn try_new(v: Vec3, tol: f64) -> Result<Self, SphereError> {
        let norm = v.norm();
        if (norm - 1.0).abs() <= tol {
            Ok(Self(v / norm))
        } else {
            Err(SphereError::NotUnit { norm })
        }
    }

    pub fn x_axis() -> Self {
        Self(Vec3::x())
    }

    pub fn z_axis() -> Self {
        Self(Vec3::z())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitDir) -> f64 {
        self.0.dot(&other.0)
    }

    /// Polar angle from `+z`, in `[0, pi]`.
    pub fn colatitude(&self) -> f64 {
        let planar = (self.0.x * self.0.x + self.0.y * self.0.y).sqrt();
        planar.atan2(self.0.z)
    }

    /// Longitude in `(-pi, pi]`, zero along `+x`.
    pub fn longitude(&self) -> f64 {
        self.0.y.atan2(self.0.x)
    }
}

/// Continuous pixel coordinates; integers are pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelCoord {
    pub row: f64,
    pub col: f64,
}

impl PixelCoord {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    /// Nearest integer pixel, columns wrapped and rows clamped into `grid`.
    pub fn nearest(&self, grid: &EquirectGrid) -> (usize, usize) {
        let r = self.row.round().clamp(0.0, (grid.height - 1) as f64) as usize;
        let c = (self.col.round() as i64).rem_euclid(grid.width as i64) as usize;
        (r, c)
    }
}

/// Result of projecting a direction onto the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirPixel {
    pub pixel: PixelCoord,
    /// The direction falls within half a pixel of a pole; `pixel.row` was
    /// clamped onto the first or last row and the mapping is not invertible there.
    pub at_pole: bool,
}

/// Equirectangular raster geometry (`W = 2H`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquirectGrid {
    height: usize,
    width: usize,
}

impl EquirectGrid {
    pub fn new(height: usize, width: usize) -> Result<Self, SphereError> {
        if height < 2 || width != 2 * height {
            return Err(SphereError::InvalidGrid { height, width });
        }
        Ok(Self { height, width })
    }

    /// Grid of the given height and width `2 * height`.
    pub fn with_height(height: usize) -> Result<Self, SphereError> {
        Self::new(height, 2 * height)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angular size of one row, in radians.
    pub fn pitch(&self) -> f64 {
        PI / self.height as f64
    }

    pub fn contains(&self, p: &PixelCoord) -> bool {
        p.row >= 0.0 && p.row < self.height as f64 && p.col >= 0.0 && p.col < self.width as f64
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn pixel_to_dir(&self, p: &PixelCoord) -> Result<UnitDir, SphereError> {
        if !self.contains(p) {
            return Err(SphereError::OutOfGrid {
                row: p.row,
                col: p.col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(UnitDir(self.dir_at(p.row, p.col)))
    }

    /// Unchecked back-projection of continuous coordinates (any row/col).
    pub fn dir_at(&self, row: f64, col: f64) -> Vec3 {
        let theta = PI * (row + 0.5) / self.height as f64;
        let phi = 2.0 * PI * (col + 0.5) / self.width as f64 - PI;
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    pub fn dir_to_pixel(&self, d: &Vec3) -> Result<DirPixel, SphereError> {
        let norm = d.norm();
        if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(SphereError::NotUnit { norm });
        }
        let (row, col) = self.project(&(d / norm));
        let max_row = (self.height - 1) as f64;
        let at_pole = row < 0.0 || row > max_row;
        Ok(DirPixel {
            pixel: PixelCoord::new(row.clamp(0.0, max_row), col),
            at_pole,
        })
    }

    /// Continuous coordinates of a (not necessarily unit) direction.
    ///
    /// Rows lie in `[-0.5, H - 0.5]`; columns are wrapped into `[0, W)`.
    pub fn project(&self, v: &Vec3) -> (f64, f64) {
        let planar = (v.x * v.x + v.y * v.y).sqrt();
        let theta = planar.atan2(v.z);
        let phi = v.y.atan2(v.x);
        let row = theta * self.height as f64 / PI - 0.5;
        let mut col = (phi + PI) * self.width as f64 / (2.0 * PI) - 0.5;
        let w = self.width as f64;
        if col < 0.0 {
            col += w;
        }
        if col >= w {
            col -= w;
        }
        (row, col)
    }

    /// Directions of every pixel center, row-major.
    pub fn directions(&self) -> alloc::vec::Vec<Vec3> {
        let mut out = alloc::vec::Vec::with_capacity(self.len());
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(self.dir_at(r as f64, c as f64));
            }
        }
        out
    }
}

/// `2 tan(angle / 2)` between two unit directions.
///
/// Evaluated as `2 |u - v| / |u + v|`, which equals `2 sqrt((1 - u.v) / (1 + u.v))`
/// for unit vectors but keeps full precision for small angles.
pub fn tangent_error(u: &UnitDir, v: &UnitDir) -> Result<f64, SphereError> {
    tangent_error_vec(&u.0, &v.0)
}

pub(crate) fn tangent_error_vec(u: &Vec3, v: &Vec3) -> Result<f64, SphereError> {
    let sum = (u + v).norm_squared();
    // u.v <= -1 + 1e-12  <=>  |u + v|^2 <= 2e-12
    if sum <= 2e-12 {
        return Err(SphereError::Antipodal);
    }
    Ok(2.0 * ((u - v).norm_squared() / sum).sqrt())
}

/// Sine of the colatitude: the equirectangular area weight of a direction.
pub fn polar_weight(u: &UnitDir) -> f64 {
    let v = u.as_vec();
    (v.x * v.x + v.y * v.y).sqrt().min(1.0)
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseSE3(Isometry3<f64>);

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self(Isometry3::identity())
    }

    pub fn from_parts(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self(Isometry3::from_parts(Translation3::from(translation), rotation))
    }

    /// Builds a pose from a TUM-style quaternion `(qx, qy, qz, qw)`, renormalizing it.
    pub fn from_translation_quaternion(t: [f64; 3], q: [f64; 4]) -> Self {
        let quat = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
        Self::from_parts(UnitQuaternion::from_quaternion(quat), Vec3::new(t[0], t[1], t[2]))
    }

    /// Pose from a rotation vector (axis * angle) and a translation.
    pub fn from_rotation_vector(rotvec: Vec3, translation: Vec3) -> Self {
        Self::from_parts(UnitQuaternion::from_scaled_axis(rotvec), translation)
    }

    pub fn from_isometry(iso: Isometry3<f64>) -> Self {
        Self(iso)
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.0
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.0.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.0.translation.vector
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        Point3::from(self.0.translation.vector)
    }

    pub fn transform(&self, x: &Point3) -> Point3 {
        self.0.transform_point(x)
    }

    /// World point into camera coordinates.
    pub fn inverse_transform(&self, x: &Point3) -> Point3 {
        self.0.inverse_transform_point(x)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.rotation * v
    }

    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        Self(self.0 * other.0)
    }

    pub fn inverse(&self) -> PoseSE3 {
        Self(self.0.inverse())
    }

    /// Translation part scaled by `s` (rotation untouched).
    pub fn scaled(&self, s: f64) -> PoseSE3 {
        Self::from_parts(self.0.rotation, self.0.translation.vector * s)
    }

    /// Rotation angle of `self^-1 * other`, in radians.
    pub fn rotation_angle_to(&self, other: &PoseSE3) -> f64 {
        self.0.rotation.angle_to(&other.0.rotation)
    }

    pub fn translation_distance_to(&self, other: &PoseSE3) -> f64 {
        (self.translation() - other.translation()).norm()
    }

    /// TUM layout: `[tx, ty, tz]`, `[qx, qy, qz, qw]`.
    pub fn to_tum(&self) -> ([f64; 3], [f64; 4]) {
        let t = self.translation();
        let q = self.0.rotation.quaternion();
        ([t.x, t.y, t.z], [q.i, q.j, q.k, q.w])
    }

    pub fn is_finite(&self) -> bool {
        let (t, q) = self.to_tum();
        t.iter().chain(q.iter()).all(|v| v.is_finite())
    }
}
