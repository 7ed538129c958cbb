//! 8-bit PNG for color frames and mask dumps.

use std::path::Path;

use image::{GrayImage, ImageReader, Luma, Rgb, RgbImage};
use omnipose_core::pano::{ColorPano, MaskPano, Pano};
use omnipose_core::sphere::EquirectGrid;

use crate::error::{Error, Result};

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn write_color_png(path: &Path, color: &ColorPano) -> Result<()> {
    let g = color.grid();
    let img = RgbImage::from_fn(g.width() as u32, g.height() as u32, |x, y| {
        let p = color.get(y as usize, x as usize);
        Rgb([to_u8(p[0]), to_u8(p[1]), to_u8(p[2])])
    });
    img.save(path).map_err(image_err(path))
}

/// Reads any 8-bit color or gray PNG as linear values in `[0, 1]`.
pub fn read_color_png(path: &Path) -> Result<ColorPano> {
    let img = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(image_err(path))?
        .into_rgb8();
    let grid = EquirectGrid::new(img.height() as usize, img.width() as usize)?;
    Ok(Pano::from_fn(grid, |r, c| {
        let p = img.get_pixel(c as u32, r as u32).0;
        [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
    }))
}

/// Mask as black (0) / white (255).
pub fn write_mask_png(path: &Path, mask: &MaskPano) -> Result<()> {
    let g = mask.grid();
    let img = GrayImage::from_fn(g.width() as u32, g.height() as u32, |x, y| {
        Luma([if *mask.get(y as usize, x as usize) { 255 } else { 0 }])
    });
    img.save(path).map_err(image_err(path))
}

pub fn read_mask_png(path: &Path) -> Result<MaskPano> {
    let img = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(image_err(path))?
        .into_luma8();
    let grid = EquirectGrid::new(img.height() as usize, img.width() as usize)?;
    Ok(Pano::from_fn(grid, |r, c| img.get_pixel(c as u32, r as u32).0[0] >= 128))
}
