//! Optional PNG decoding (8-bit grayscale or RGB) behind the `png` feature.

use std::path::Path;

use super::ImageGray;
use crate::error::{Error, Result};

pub fn decode_png(bytes: &[u8], path: &Path) -> Result<ImageGray> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| Error::CorruptImage {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
    )?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: "zero dimension".to_string(),
        });
    }
    let data: Vec<f64> = match decoded {
        image::DynamicImage::ImageLuma8(img) => {
            img.into_raw().iter().map(|&b| b as f64 / 255.0).collect()
        }
        image::DynamicImage::ImageRgb8(img) => img
            .into_raw()
            .chunks_exact(3)
            .map(|px| {
                (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0
            })
            .collect(),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                detail: format!("PNG color type {:?} (8-bit gray/RGB expected)", other.color()),
            })
        }
    };
    Ok(ImageGray::from_raw(
        width,
        height,
        data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    ))
}
