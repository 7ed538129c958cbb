//! Monocular-depth error model.
//!
//! Each frame's depth is corrupted by, in order: edge over-smoothing, a smooth
//! multiplicative low-frequency field that changes from frame to frame, and a
//! per-frame affine map whose freedom depends on the regime.

use alloc::vec::Vec;
use core::str::FromStr;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{rng_for, SimError};
use crate::pano::{is_valid_depth, DepthPano, Pano};
use crate::sphere::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DepthRegime {
    /// Metric depth with small per-frame scale/shift jitter.
    Absolute,
    /// Arbitrary per-frame scale.
    ScaleInvariant,
    /// Arbitrary per-frame scale and shift.
    AffineInvariant,
}

impl FromStr for DepthRegime {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(DepthRegime::Absolute),
            "scale" | "scale-invariant" => Ok(DepthRegime::ScaleInvariant),
            "affine" | "affine-invariant" => Ok(DepthRegime::AffineInvariant),
            other => Err(SimError::UnknownRegime(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthCorruption {
    pub regime: DepthRegime,
    /// Per-frame scale jitter. Relative for the absolute regime, log-scale otherwise.
    pub scale_sigma: f64,
    /// Per-frame shift jitter, scene units. Ignored by the scale-invariant regime.
    pub shift_sigma: f64,
    /// Amplitude of the multiplicative low-frequency field.
    pub lowfreq_amplitude: f64,
    /// Box radius, in pixels, used to smear depth discontinuities. Zero disables.
    pub edge_radius: usize,
    /// Scale applied before jitter.
    pub base_scale: f64,
    /// Shift applied before jitter, scene units.
    pub base_shift: f64,
    pub seed: u64,
}

impl DepthCorruption {
    /// Identity corruption: output equals input.
    pub fn none() -> Self {
        Self {
            regime: DepthRegime::Absolute,
            scale_sigma: 0.0,
            shift_sigma: 0.0,
            lowfreq_amplitude: 0.0,
            edge_radius: 0,
            base_scale: 1.0,
            base_shift: 0.0,
            seed: 0,
        }
    }

    /// Default error levels for a regime.
    pub fn preset(regime: DepthRegime, seed: u64) -> Self {
        let (scale_sigma, shift_sigma, lowfreq_amplitude, edge_radius) = match regime {
            DepthRegime::Absolute => (0.02, 0.0, 0.01, 1),
            DepthRegime::ScaleInvariant => (0.3, 0.0, 0.02, 2),
            DepthRegime::AffineInvariant => (0.3, 0.3, 0.02, 2),
        };
        Self {
            regime,
            scale_sigma,
            shift_sigma,
            lowfreq_amplitude,
            edge_radius,
            base_scale: 1.0,
            base_shift: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.scale_sigma >= 0.0
            && self.shift_sigma >= 0.0
            && self.lowfreq_amplitude >= 0.0
            && self.base_scale > 0.0
            && self.base_shift.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(
                "corruption amplitudes must be non-negative and the base scale positive",
            ))
        }
    }
}

/// Corrupted depth and the affine map applied on top of the smooth distortions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedDepth {
    pub depth: DepthPano,
    pub scale: f64,
    pub shift: f64,
}

pub fn corrupt_depth(gt: &DepthPano, c: &DepthCorruption, frame: usize) -> Result<CorruptedDepth, SimError> {
    c.validate()?;
    let mut rng = rng_for(c.seed, &[0xde97, frame as u64]);
    let z1: f64 = StandardNormal.sample(&mut rng);
    let z2: f64 = StandardNormal.sample(&mut rng);
    let (scale, shift) = match c.regime {
        DepthRegime::Absolute => (c.base_scale * (1.0 + c.scale_sigma * z1), c.base_shift + c.shift_sigma * z2),
        DepthRegime::ScaleInvariant => (c.base_scale * (c.scale_sigma * z1).exp(), c.base_shift),
        DepthRegime::AffineInvariant => (c.base_scale * (c.scale_sigma * z1).exp(), c.base_shift + c.shift_sigma * z2),
    };

    let mut depth = if c.edge_radius > 0 {
        smear_edges(gt, c.edge_radius)
    } else {
        gt.clone()
    };

    if c.lowfreq_amplitude > 0.0 {
        let waves: Vec<(Vec3, f64, f64)> = (0..3)
            .map(|_| {
                let k = loop {
                    let v = Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 0.1 && n <= 1.0 {
                        break v / n;
                    }
                };
                let freq = rng.random_range(1.0..3.0);
                let phase = rng.random_range(0.0..core::f64::consts::TAU);
                (k, freq, phase)
            })
            .collect();
        let grid = *depth.grid();
        let field = Pano::from_fn(grid, |r, col| {
            let d = grid.dir_at(r as f64, col as f64);
            waves
                .iter()
                .map(|(k, f, p)| (f * core::f64::consts::PI * k.dot(&d) + p).sin())
                .sum::<f64>()
                / 3.0
        });
        for (d, n) in depth.data_mut().iter_mut().zip(field.data()) {
            if is_valid_depth(*d) {
                *d *= 1.0 + c.lowfreq_amplitude * n;
            }
        }
    }

    for d in depth.data_mut() {
        if is_valid_depth(*d) {
            *d = scale * *d + shift;
            if !is_valid_depth(*d) {
                *d = f64::INFINITY;
            }
        }
    }
    Ok(CorruptedDepth { depth, scale, shift })
}

/// Replaces depth near discontinuities by a local box mean, mimicking the
/// over-smoothed boundaries of monocular predictions.
fn smear_edges(depth: &DepthPano, radius: usize) -> DepthPano {
    let g = *depth.grid();
    let (h, w) = (g.height() as i64, g.width() as i64);
    let at = |r: i64, c: i64| -> f64 {
        if r < 0 || r >= h {
            return f64::INFINITY;
        }
        *depth.get(r as usize, c.rem_euclid(w) as usize)
    };
    let mut out = depth.clone();
    for r in 0..h {
        for c in 0..w {
            let d0 = at(r, c);
            if !is_valid_depth(d0) {
                continue;
            }
            let (mut lo, mut hi) = (d0, d0);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let d = at(r + dr, c + dc);
                    if is_valid_depth(d) {
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                }
            }
            if hi <= 1.05 * lo {
                continue;
            }
            let rad = radius as i64;
            let (mut sum, mut n) = (0.0, 0usize);
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let d = at(r + dr, c + dc);
                    if is_valid_depth(d) {
                        sum += d;
                        n += 1;
                    }
                }
            }
            out.set(r as usize, c as usize, sum / n as f64);
        }
    }
    out
}
