//! False-color rendering of first-layer filters and their responses.
//!
//! Each map is stretched over its own range and colored on a diverging ramp:
//! blue at the minimum, white at the midpoint, red at the maximum.

use std::path::Path;

use crate::error::{Error, Result};
use crate::netpbm::{read_ppm, write_ppm, RawRgb};
use crate::network::Network;
use crate::tensor::{min_max, Tensor};

pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const WHITE: [u8; 3] = [255, 255, 255];
/// Color of a map with no range.
pub const MID_GRAY: [u8; 3] = [128, 128, 128];
pub const SEPARATOR: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FalseColorImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl FalseColorImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_raw(&self) -> RawRgb {
        RawRgb {
            width: self.width,
            height: self.height,
            rgb: self.pixels.iter().flatten().copied().collect(),
        }
    }

    pub fn from_raw(raw: &RawRgb) -> Self {
        Self {
            width: raw.width,
            height: raw.height,
            pixels: raw.rgb.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        }
    }
}

/// Layer (b) responses to `patch`, one `[H', W']` map per filter, before any
/// nonlinearity.
pub fn activation_maps(net: &Network, patch: &Tensor) -> Result<Vec<Tensor>> {
    split_channels(&net.first_layer_response(patch)?)
}

/// The layer (b) filters themselves, one `[fh, fw]` map each.
pub fn filter_maps(net: &Network) -> Result<Vec<Tensor>> {
    let filters = net.conv1().filters();
    let [k, c, fh, fw] = [
        filters.shape()[0],
        filters.shape()[1],
        filters.shape()[2],
        filters.shape()[3],
    ];
    let per = c * fh * fw;
    (0..k)
        .flat_map(|f| (0..c).map(move |ch| (f, ch)))
        .map(|(f, ch)| {
            let start = f * per + ch * fh * fw;
            Tensor::from_vec(&[fh, fw], filters.data()[start..start + fh * fw].to_vec())
        })
        .collect()
}

fn split_channels(t: &Tensor) -> Result<Vec<Tensor>> {
    let [c, h, w] = match *t.shape() {
        [c, h, w] => [c, h, w],
        _ => return Err(Error::shape(format!("expected [C, H, W], got {:?}", t.shape()))),
    };
    t.data()
        .chunks_exact(h * w)
        .take(c)
        .map(|chunk| Tensor::from_vec(&[h, w], chunk.to_vec()))
        .collect()
}

/// Color for a value already scaled to `t` in `[0, 1]`.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let byte = |x: f64| (x * 255.0).round() as u8;
    if t < 0.5 {
        let s = byte(t / 0.5);
        [s, s, 255]
    } else {
        let s = byte((1.0 - t) / 0.5);
        [255, s, s]
    }
}

/// Per-map min-max scaling into [`ramp`]. Constant maps render mid-gray.
pub fn false_color(map: &Tensor) -> Result<FalseColorImage> {
    let (height, width) = match *map.shape() {
        [h, w] => (h, w),
        [w] => (1, w),
        _ => return Err(Error::shape(format!("expected a 2-D map, got {:?}", map.shape()))),
    };
    let (lo, hi) = min_max(map.data());
    let range = hi - lo;
    let pixels = if range > 0.0 && range.is_finite() {
        map.data().iter().map(|&v| ramp((v - lo) / range)).collect()
    } else {
        vec![MID_GRAY; width * height]
    };
    Ok(FalseColorImage {
        width,
        height,
        pixels,
    })
}

/// Nearest-neighbour enlargement by an integer factor.
pub fn upscale(img: &FalseColorImage, factor: usize) -> FalseColorImage {
    let factor = factor.max(1);
    let width = img.width * factor;
    let height = img.height * factor;
    let pixels = (0..height)
        .flat_map(|y| (0..width).map(move |x| img.get(x / factor, y / factor)))
        .collect();
    FalseColorImage {
        width,
        height,
        pixels,
    }
}

/// Tiles equally sized images in reading order with 1-pixel black gaps, then
/// upscales by `scale`.
pub fn montage(maps: &[FalseColorImage], columns: usize, scale: usize) -> Result<FalseColorImage> {
    let first = maps
        .first()
        .ok_or_else(|| Error::shape("montage of no images"))?;
    if columns == 0 {
        return Err(Error::Config("montage needs at least one column".into()));
    }
    let (w, h) = (first.width, first.height);
    if maps.iter().any(|m| (m.width, m.height) != (w, h)) {
        return Err(Error::shape("montage images differ in size"));
    }
    let columns = columns.min(maps.len());
    let rows = maps.len().div_ceil(columns);
    let mut out = FalseColorImage::filled(columns * (w + 1) - 1, rows * (h + 1) - 1, SEPARATOR);
    for (i, m) in maps.iter().enumerate() {
        let x0 = (i % columns) * (w + 1);
        let y0 = (i / columns) * (h + 1);
        for y in 0..h {
            let dst = (y0 + y) * out.width + x0;
            out.pixels[dst..dst + w].copy_from_slice(&m.pixels[y * w..(y + 1) * w]);
        }
    }
    Ok(upscale(&out, scale))
}

pub fn write_image(img: &FalseColorImage, path: &Path) -> Result<()> {
    write_ppm(path, &img.to_raw())
}

pub fn read_image(path: &Path) -> Result<FalseColorImage> {
    Ok(FalseColorImage::from_raw(&read_ppm(path)?))
}
