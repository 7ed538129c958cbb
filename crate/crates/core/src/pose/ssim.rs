//! Structural similarity on panoramas.
//!
//! Local statistics use an 11x11 Gaussian window (sigma 1.5). Columns wrap
//! around the seam; near the poles the window is truncated and renormalized.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use thiserror::Error;

use crate::pano::{ColorPano, Pano, PanoError};

pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SsimError {
    #[error(transparent)]
    Pano(#[from] PanoError),
}

/// Per-pixel SSIM factors; their product is the SSIM map.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimComponents {
    pub luminance: Pano<f64>,
    pub contrast_structure: Pano<f64>,
}

impl SsimComponents {
    pub fn map(&self) -> Pano<f64> {
        let g = *self.luminance.grid();
        let data = self
            .luminance
            .data()
            .iter()
            .zip(self.contrast_structure.data())
            .map(|(l, cs)| l * cs)
            .collect();
        Pano::from_vec(g, data).expect("same grid")
    }
}

fn kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Gaussian blur: wrapped horizontally, truncated and renormalized vertically.
fn blur(h: usize, w: usize, src: &[f64], k: &[f64; WINDOW]) -> Vec<f64> {
    let half = WINDOW / 2;
    let mut tmp = vec![0.0; h * w];
    let mut padded = vec![0.0; w + 2 * half];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for (i, v) in padded.iter_mut().enumerate() {
            *v = row[(i + w * WINDOW - half) % w];
        }
        for c in 0..w {
            let win = &padded[c..c + WINDOW];
            tmp[r * w + c] = win.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let mut norm = 0.0;
        let mut taps = [(0usize, 0.0); WINDOW];
        let mut n = 0;
        for (i, kv) in k.iter().enumerate() {
            let rr = r as i64 - half as i64 + i as i64;
            if rr >= 0 && (rr as usize) < h {
                taps[n] = (rr as usize, *kv);
                n += 1;
                norm += kv;
            }
        }
        for c in 0..w {
            let mut acc = 0.0;
            for &(rr, kv) in &taps[..n] {
                acc += kv * tmp[rr * w + c];
            }
            out[r * w + c] = acc / norm;
        }
    }
    out
}

/// Luminance and contrast-structure terms of SSIM between two scalar images
/// with dynamic range 1.
pub fn ssim_components(a: &Pano<f64>, b: &Pano<f64>) -> Result<SsimComponents, SsimError> {
    a.ensure_same_grid(b)?;
    let g = *a.grid();
    let (h, w) = (g.height(), g.width());
    let k = kernel();
    let x = a.data();
    let y = b.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = blur(h, w, x, &k);
    let my = blur(h, w, y, &k);
    let sxx = blur(h, w, &xx, &k);
    let syy = blur(h, w, &yy, &k);
    let sxy = blur(h, w, &xy, &k);
    let mut lum = Vec::with_capacity(h * w);
    let mut cs = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let vx = (sxx[i] - mx[i] * mx[i]).max(0.0);
        let vy = (syy[i] - my[i] * my[i]).max(0.0);
        let cov = sxy[i] - mx[i] * my[i];
        lum.push((2.0 * mx[i] * my[i] + C1) / (mx[i] * mx[i] + my[i] * my[i] + C1));
        cs.push((2.0 * cov + C2) / (vx + vy + C2));
    }
    Ok(SsimComponents {
        luminance: Pano::from_vec(g, lum)?,
        contrast_structure: Pano::from_vec(g, cs)?,
    })
}

pub fn ssim_map(a: &Pano<f64>, b: &Pano<f64>) -> Result<Pano<f64>, SsimError> {
    Ok(ssim_components(a, b)?.map())
}

/// Mean SSIM over the image.
pub fn ssim(a: &Pano<f64>, b: &Pano<f64>) -> Result<f64, SsimError> {
    let m = ssim_map(a, b)?;
    Ok(m.data().iter().sum::<f64>() / m.data().len() as f64)
}

/// `(1 - SSIM) / 2`, in `[0, 1]`.
pub fn dssim(a: &Pano<f64>, b: &Pano<f64>) -> Result<f64, SsimError> {
    Ok(((1.0 - ssim(a, b)?) / 2.0).max(0.0))
}

pub(crate) fn channel(c: &ColorPano, ch: usize) -> Pano<f64> {
    c.map(|p| p[ch])
}

/// SSIM map of two color images, averaged over channels.
pub fn ssim_map_rgb(a: &ColorPano, b: &ColorPano) -> Result<Pano<f64>, SsimError> {
    a.ensure_same_grid(b)?;
    let mut acc = vec![0.0; a.grid().len()];
    for ch in 0..3 {
        let m = ssim_map(&channel(a, ch), &channel(b, ch))?;
        for (s, v) in acc.iter_mut().zip(m.data()) {
            *s += v / 3.0;
        }
    }
    Ok(Pano::from_vec(*a.grid(), acc)?)
}
