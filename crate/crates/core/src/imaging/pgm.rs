//! Minimal binary PGM (P5) codec.

use std::path::Path;

use super::ImageGray;
use crate::error::{Error, Result};

struct Tokenizer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Tokenizer { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Option<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok).ok()?.parse().ok()
    }
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<ImageGray> {
    let corrupt = |detail: &str| Error::CorruptImage {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut tok = Tokenizer::new(bytes);
    match tok.token() {
        Some(b"P5") => {}
        _ => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                detail: "missing P5 magic".to_string(),
            })
        }
    }
    let width = tok.number().ok_or_else(|| corrupt("bad width"))?;
    let height = tok.number().ok_or_else(|| corrupt("bad height"))?;
    let maxval = tok.number().ok_or_else(|| corrupt("bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval} unsupported (expected 1..=255)"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    if tok.pos >= bytes.len() || !bytes[tok.pos].is_ascii_whitespace() {
        return Err(corrupt("missing raster separator"));
    }
    let raster = &bytes[tok.pos + 1..];
    let expected = width * height;
    if raster.len() < expected {
        return Err(corrupt(&format!(
            "raster holds {} bytes, expected {expected}",
            raster.len()
        )));
    }
    let scale = maxval as f64;
    let data = raster[..expected].iter().map(|&b| b as f64 / scale).collect();
    Ok(ImageGray::from_raw(width, height, data))
}

pub fn encode_pgm(img: &ImageGray) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}
