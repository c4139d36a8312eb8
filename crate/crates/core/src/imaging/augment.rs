//! Seeded training-time augmentations. One call draws, in fixed order:
//! rotation angle, flip coin, brightness delta, contrast factor, translate x,
//! translate y, scale, shear. Geometry resamples bilinearly with 0 fill.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_bilinear, ImageGray};
use crate::error::{Error, Result};

/// Ranges for the five augmentations. All geometric parameters are sampled
/// uniformly in +/- their range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub rotation_max_deg: f64,
    pub hflip_prob: f64,
    pub brightness_jitter: f64,
    pub contrast_jitter: f64,
    pub affine_translate_frac: f64,
    pub affine_scale_range: (f64, f64),
    pub affine_shear_max_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_max_deg: 10.0,
            hflip_prob: 0.5,
            brightness_jitter: 0.2,
            contrast_jitter: 0.2,
            affine_translate_frac: 0.05,
            affine_scale_range: (0.9, 1.1),
            affine_shear_max_deg: 5.0,
        }
    }
}

impl AugmentConfig {
    /// Config under which `augment` reproduces its input exactly.
    pub fn identity() -> Self {
        AugmentConfig {
            rotation_max_deg: 0.0,
            hflip_prob: 0.0,
            brightness_jitter: 0.0,
            contrast_jitter: 0.0,
            affine_translate_frac: 0.0,
            affine_scale_range: (1.0, 1.0),
            affine_shear_max_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("rotation_max_deg", self.rotation_max_deg),
            ("brightness_jitter", self.brightness_jitter),
            ("contrast_jitter", self.contrast_jitter),
            ("affine_translate_frac", self.affine_translate_frac),
            ("affine_shear_max_deg", self.affine_shear_max_deg),
        ];
        for (name, value) in nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidConfig {
                    detail: format!("{name} must be finite and non-negative, got {value}"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::InvalidConfig {
                detail: format!("hflip_prob must lie in [0, 1], got {}", self.hflip_prob),
            });
        }
        let (lo, hi) = self.affine_scale_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig {
                detail: format!("affine_scale_range must satisfy 0 < min <= max, got ({lo}, {hi})"),
            });
        }
        Ok(())
    }
}

/// Mirrors an image across its vertical axis.
pub fn hflip(img: &ImageGray) -> ImageGray {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(img.get(w - 1 - x, y));
        }
    }
    ImageGray::from_raw(w, h, data)
}

fn rotate(img: &ImageGray, angle_deg: f64) -> ImageGray {
    let theta = angle_deg.to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());
    let cx = (img.width() - 1) as f64 / 2.0;
    let cy = (img.height() - 1) as f64 / 2.0;
    let mut data = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // Inverse rotation of the output coordinate.
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            data.push(sample_bilinear(img, sx, sy));
        }
    }
    ImageGray::from_raw(img.width(), img.height(), data)
}

/// Forward map: shear, scale about the center, then translate. Implemented as
/// the inverse map over output pixels.
fn affine(img: &ImageGray, tx: f64, ty: f64, scale: f64, shear_deg: f64) -> ImageGray {
    let k = shear_deg.to_radians().tan();
    let cx = (img.width() - 1) as f64 / 2.0;
    let cy = (img.height() - 1) as f64 / 2.0;
    let mut data = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let qx = (x as f64 - cx - tx) / scale;
            let qy = (y as f64 - cy - ty) / scale;
            // Undo the x-shear.
            let sx = cx + (qx - k * qy);
            let sy = cy + qy;
            data.push(sample_bilinear(img, sx, sy));
        }
    }
    ImageGray::from_raw(img.width(), img.height(), data)
}

fn brightness(img: &ImageGray, delta: f64) -> ImageGray {
    let data = img
        .data()
        .iter()
        .map(|v| (v + delta).clamp(0.0, 1.0))
        .collect();
    ImageGray::from_raw(img.width(), img.height(), data)
}

fn contrast(img: &ImageGray, factor: f64) -> ImageGray {
    let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
    // v*f + mean*(1-f) keeps factor 1 bit-exact, unlike mean + (v-mean)*f.
    let data = img
        .data()
        .iter()
        .map(|v| (v * factor + mean * (1.0 - factor)).clamp(0.0, 1.0))
        .collect();
    ImageGray::from_raw(img.width(), img.height(), data)
}

/// Applies, in fixed order: random rotation, horizontal flip, brightness
/// shift, contrast scale about the mean, then a random affine
/// (translate/scale/shear). Deterministic given the generator state.
pub fn augment<R: Rng + ?Sized>(
    img: &ImageGray,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<ImageGray> {
    cfg.validate()?;
    let angle = rng.random_range(-cfg.rotation_max_deg..=cfg.rotation_max_deg);
    let flip = rng.random::<f64>() < cfg.hflip_prob;
    let delta = rng.random_range(-cfg.brightness_jitter..=cfg.brightness_jitter);
    let factor = rng.random_range(1.0 - cfg.contrast_jitter..=1.0 + cfg.contrast_jitter);
    let tx = rng.random_range(-cfg.affine_translate_frac..=cfg.affine_translate_frac)
        * img.width() as f64;
    let ty = rng.random_range(-cfg.affine_translate_frac..=cfg.affine_translate_frac)
        * img.height() as f64;
    let scale = rng.random_range(cfg.affine_scale_range.0..=cfg.affine_scale_range.1);
    let shear = rng.random_range(-cfg.affine_shear_max_deg..=cfg.affine_shear_max_deg);

    let mut out = rotate(img, angle);
    if flip {
        out = hflip(&out);
    }
    out = brightness(&out, delta);
    out = contrast(&out, factor);
    out = affine(&out, tx, ty, scale, shear);
    Ok(out)
}
