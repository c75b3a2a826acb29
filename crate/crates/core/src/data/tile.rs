use std::path::Path;

use crate::error::Result;
use crate::netpbm::{read_pgm, RawGray};

/// Grayscale image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count");
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Samples divided by the file's maxval (255 or 65535 for full-depth files).
    pub fn from_raw(raw: &RawGray) -> Self {
        let max = f64::from(raw.maxval);
        Self::new(
            raw.width,
            raw.height,
            raw.samples.iter().map(|&s| f64::from(s) / max).collect(),
        )
    }

    /// Pixel at `(x, y)` with out-of-range coordinates clamped to the border.
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixels[y * self.width + x]
    }
}

pub fn load_tile(path: &Path) -> Result<GrayImage> {
    Ok(GrayImage::from_raw(&read_pgm(path)?))
}
