//! Per-frame equirectangular rasters: color, depth and binary masks.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::sphere::EquirectGrid;

/// Linear RGB in `[0, 1]`.
pub type Rgb = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PanoError {
    #[error("raster has {got} samples, grid needs {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("grids differ: {a_height}x{a_width} vs {b_height}x{b_width}")]
    GridMismatch {
        a_height: usize,
        a_width: usize,
        b_height: usize,
        b_width: usize,
    },
}

impl PanoError {
    pub fn grid_mismatch(a: &EquirectGrid, b: &EquirectGrid) -> Self {
        PanoError::GridMismatch {
            a_height: a.height(),
            a_width: a.width(),
            b_height: b.height(),
            b_width: b.width(),
        }
    }
}

/// Row-major raster over an [`EquirectGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pano<T> {
    grid: EquirectGrid,
    data: Vec<T>,
}

/// Euclidean ray distance per pixel; `+inf` marks pixels without a surface.
pub type DepthPano = Pano<f64>;
pub type ColorPano = Pano<Rgb>;
pub type MaskPano = Pano<bool>;

impl<T: Clone> Pano<T> {
    pub fn filled(grid: EquirectGrid, value: T) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }
}

impl<T> Pano<T> {
    pub fn from_vec(grid: EquirectGrid, data: Vec<T>) -> Result<Self, PanoError> {
        if data.len() != grid.len() {
            return Err(PanoError::SizeMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: EquirectGrid, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for r in 0..grid.height() {
            for c in 0..grid.width() {
                data.push(f(r, c));
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &EquirectGrid {
        &self.grid
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[self.grid.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = self.grid.index(row, col);
        self.data[i] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Pano<U> {
        Pano {
            grid: self.grid,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_grid<U>(&self, other: &Pano<U>) -> Result<(), PanoError> {
        if self.grid != other.grid {
            return Err(PanoError::grid_mismatch(&self.grid, &other.grid));
        }
        Ok(())
    }
}

pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Integer taps and weights of a bilinear lookup; columns wrap, rows clamp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

pub(crate) fn bilinear_taps(grid: &EquirectGrid, row: f64, col: f64) -> Taps {
    let h = grid.height();
    let w = grid.width();
    let row = row.clamp(0.0, (h - 1) as f64);
    let r0 = (row.floor() as usize).min(h - 1);
    let r1 = (r0 + 1).min(h - 1);
    let fr = row - r0 as f64;
    let cf = col.floor();
    let fc = col - cf;
    let c0 = (cf as i64).rem_euclid(w as i64) as usize;
    let c1 = (c0 + 1) % w;
    Taps {
        idx: [grid.index(r0, c0), grid.index(r0, c1), grid.index(r1, c0), grid.index(r1, c1)],
        w: [(1.0 - fr) * (1.0 - fc), (1.0 - fr) * fc, fr * (1.0 - fc), fr * fc],
    }
}

impl DepthPano {
    /// Bilinear depth at continuous coordinates; `None` unless all four taps are valid.
    pub fn sample(&self, row: f64, col: f64) -> Option<f64> {
        let t = bilinear_taps(&self.grid, row, col);
        let mut acc = 0.0;
        for k in 0..4 {
            if t.w[k] == 0.0 {
                continue;
            }
            let d = self.data[t.idx[k]];
            if !is_valid_depth(d) {
                return None;
            }
            acc += t.w[k] * d;
        }
        Some(acc)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        is_valid_depth(*self.get(row, col))
    }

    pub fn valid_mask(&self) -> MaskPano {
        self.map(|d| is_valid_depth(*d))
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| is_valid_depth(**d)).count()
    }

    /// Fraction of pixels without a valid depth.
    pub fn invalid_fraction(&self) -> f64 {
        1.0 - self.valid_count() as f64 / self.data.len() as f64
    }
}

impl ColorPano {
    pub fn sample(&self, row: f64, col: f64) -> Rgb {
        let t = bilinear_taps(&self.grid, row, col);
        let mut acc = [0.0; 3];
        for k in 0..4 {
            let c = self.data[t.idx[k]];
            for ch in 0..3 {
                acc[ch] += t.w[k] * c[ch];
            }
        }
        acc
    }

    pub fn luminance(&self) -> Pano<f64> {
        self.map(luminance)
    }
}

impl MaskPano {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|m| **m).count()
    }

    /// Fraction of set pixels.
    pub fn density(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    /// Fraction of set pixels among those where `support` is set.
    pub fn density_within(&self, support: &MaskPano) -> f64 {
        let mut n = 0usize;
        let mut on = 0usize;
        for (m, s) in self.data.iter().zip(support.data.iter()) {
            if *s {
                n += 1;
                if *m {
                    on += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            on as f64 / n as f64
        }
    }

    pub fn and(&self, other: &MaskPano) -> Result<MaskPano, PanoError> {
        self.ensure_same_grid(other)?;
        Ok(Pano {
            grid: self.grid,
            data: self.data.iter().zip(other.data.iter()).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn not(&self) -> MaskPano {
        self.map(|m| !*m)
    }
}

pub fn luminance(c: &Rgb) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}
