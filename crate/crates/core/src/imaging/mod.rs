//! Image loading, grayscale canonicalization, bilinear resizing, and the
//! training-time augmentations (rotation, horizontal flip, brightness,
//! contrast jitter, random affine).

mod augment;
mod pgm;
#[cfg(feature = "png")]
mod png;

use std::fs;
use std::path::Path;

pub use augment::{augment, hflip, AugmentConfig};
pub use pgm::{decode_pgm, encode_pgm};

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGray {
    /// Validates dimensions and the [0, 1] intensity range.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig {
                detail: format!("image dimensions must be positive, got {width}x{height}"),
            });
        }
        if data.len() != width * height {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "pixel buffer holds {} values, expected {}",
                    data.len(),
                    width * height
                ),
            });
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig {
                detail: "pixel intensities must lie in [0, 1]".to_string(),
            });
        }
        Ok(ImageGray {
            width,
            height,
            data,
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        ImageGray {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        ImageGray::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Loads an image file into the canonical grayscale representation.
///
/// Binary PGM (P5) is always supported; 8-bit grayscale/RGB PNG is behind the
/// `png` feature. RGB converts with luma weights 0.299/0.587/0.114.
pub fn load_image(path: &Path) -> Result<ImageGray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        return pgm::decode_pgm(&bytes, path);
    }
    #[cfg(feature = "png")]
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        return png::decode_png(&bytes, path);
    }
    Err(Error::UnsupportedImage {
        path: path.to_path_buf(),
        detail: "unrecognized magic bytes (binary PGM expected)".to_string(),
    })
}

/// Writes an image as binary PGM (P5, maxval 255), quantizing to 8 bits.
pub fn write_pgm(img: &ImageGray, path: &Path) -> Result<()> {
    fs::write(path, pgm::encode_pgm(img)).map_err(|e| Error::io(path, e))
}

/// Standard bilinear interpolation with corner-aligned sampling: output corner
/// pixels coincide with input corner pixels.
pub fn resize_bilinear(img: &ImageGray, width: usize, height: usize) -> Result<ImageGray> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig {
            detail: format!("resize target must be positive, got {width}x{height}"),
        });
    }
    let scale = |out_len: usize, in_len: usize| -> f64 {
        if out_len > 1 {
            (in_len - 1) as f64 / (out_len - 1) as f64
        } else {
            0.0
        }
    };
    let sx = scale(width, img.width);
    let sy = scale(height, img.height);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let src_y = y as f64 * sy;
        let y0 = src_y.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = src_y - y0 as f64;
        for x in 0..width {
            let src_x = x as f64 * sx;
            let x0 = src_x.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = src_x - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(ImageGray::from_raw(width, height, data))
}

/// Bilinear sample at a fractional coordinate; pixels outside the image
/// contribute 0 (dark background fill).
pub(crate) fn sample_bilinear(img: &ImageGray, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fetch = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= img.width as f64 || yi >= img.height as f64 {
            0.0
        } else {
            img.get(xi as usize, yi as usize)
        }
    };
    let top = fetch(x0, y0) * (1.0 - fx) + fetch(x0 + 1.0, y0) * fx;
    let bottom = fetch(x0, y0 + 1.0) * (1.0 - fx) + fetch(x0 + 1.0, y0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}
