use std::collections::BTreeMap;
use std::path::Path;

use super::{load_tile, Candidate, GrayImage};
use crate::error::{Error, Result};
use crate::tensor::{min_max, Tensor};

/// Side of the network's input patch.
pub const PATCH_SIZE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Per-patch min-max stretch to `[0, 1]`; constant patches become zero.
    #[default]
    MinMax,
    /// Tile intensities as loaded.
    Raw,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Normalization::MinMax),
            "raw" => Ok(Normalization::Raw),
            _ => Err(Error::Config(format!(
                "unknown normalization {s:?} (minmax, raw)"
            ))),
        }
    }
}

/// Bilinear sample of `img` at fractional `(x, y)`, edges replicated.
fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (xi, yi) = (x0 as i64, y0 as i64);
    let top = img.get_clamped(xi, yi) * (1.0 - fx) + img.get_clamped(xi + 1, yi) * fx;
    let bottom = img.get_clamped(xi, yi + 1) * (1.0 - fx) + img.get_clamped(xi + 1, yi + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

pub(crate) fn normalize(values: &mut [f64], norm: Normalization) {
    match norm {
        Normalization::MinMax => {
            let (lo, hi) = min_max(values);
            let range = hi - lo;
            if range > 0.0 {
                values.iter_mut().for_each(|v| *v = ((*v - lo) / range).clamp(0.0, 1.0));
            } else {
                values.fill(0.0);
            }
        }
        Normalization::Raw => values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0)),
    }
}

/// Crops the candidate's window (replicating tile edges), rescales it to
/// 15x15 by bilinear interpolation on pixel centres, then normalizes.
///
/// The window spans `center - window/2 .. center - window/2 + window` on each
/// axis.
pub fn extract_patch(tile: &GrayImage, cand: &Candidate, norm: Normalization) -> Result<Tensor> {
    if cand.window == 0 {
        return Err(Error::Geometry("window must be at least 1 pixel".into()));
    }
    let w = i64::from(cand.window);
    let x0 = cand.center_x - w / 2;
    let y0 = cand.center_y - w / 2;
    let outside = x0 + w <= 0
        || y0 + w <= 0
        || x0 >= tile.width as i64
        || y0 >= tile.height as i64;
    if outside {
        return Err(Error::Geometry(format!(
            "window {} at ({}, {}) lies outside the {}x{} tile {}",
            cand.window, cand.center_x, cand.center_y, tile.width, tile.height, cand.tile_id
        )));
    }
    let scale = w as f64 / PATCH_SIZE as f64;
    let max_offset = (w - 1) as f64;
    let src = |d: usize| ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max_offset);
    let mut values = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for v in 0..PATCH_SIZE {
        let sy = y0 as f64 + src(v);
        for u in 0..PATCH_SIZE {
            values.push(bilinear(tile, x0 as f64 + src(u), sy));
        }
    }
    normalize(&mut values, norm);
    Tensor::from_vec(&[1, PATCH_SIZE, PATCH_SIZE], values)
}

/// Loads `<tiles_dir>/<tile_id>.pgm` once per tile and fills every
/// candidate's patch.
pub fn attach_patches(
    candidates: &mut [Candidate],
    tiles_dir: &Path,
    norm: Normalization,
) -> Result<()> {
    let mut by_tile: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        by_tile.entry(c.tile_id.clone()).or_default().push(i);
    }
    for (tile_id, idx) in by_tile {
        let tile = load_tile(&tiles_dir.join(format!("{tile_id}.pgm")))?;
        for i in idx {
            let patch = extract_patch(&tile, &candidates[i], norm)?;
            candidates[i].patch = Some(patch);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cand(cx: i64, cy: i64, window: u32) -> Candidate {
        Candidate {
            tile_id: "1_24".into(),
            center_x: cx,
            center_y: cy,
            window,
            label: 1,
            patch: None,
        }
    }

    fn ramp(width: usize, height: usize) -> GrayImage {
        let pixels = (0..width * height)
            .map(|i| ((i % width) + 3 * (i / width)) as f64 / (width + 3 * height) as f64)
            .collect();
        GrayImage::new(width, height, pixels)
    }

    #[test]
    fn window_of_patch_size_is_an_exact_crop() {
        let tile = ramp(40, 40);
        let c = cand(20, 18, 15);
        let p = extract_patch(&tile, &c, Normalization::Raw).unwrap();
        for v in 0..15 {
            for u in 0..15 {
                let want = tile.get_clamped(13 + u as i64, 11 + v as i64);
                assert_eq!(p.at3(0, v, u), want);
            }
        }
    }

    #[test]
    fn constant_window_normalizes_to_zero() {
        let tile = GrayImage::new(64, 64, vec![0.37; 64 * 64]);
        let p = extract_patch(&tile, &cand(30, 30, 30), Normalization::MinMax).unwrap();
        assert_eq!(p.shape(), &[1, 15, 15]);
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_stays_monotone_after_rescaling() {
        // 30x30 window: left half 0, right half 1.
        let pixels = (0..30 * 30).map(|i| if i % 30 < 15 { 0.0 } else { 1.0 }).collect();
        let tile = GrayImage::new(30, 30, pixels);
        let p = extract_patch(&tile, &cand(15, 15, 30), Normalization::MinMax).unwrap();
        for v in 0..15 {
            for u in 1..15 {
                assert!(p.at3(0, v, u) >= p.at3(0, v, u - 1));
            }
            assert_eq!(p.at3(0, v, 0), 0.0);
            assert_eq!(p.at3(0, v, 14), 1.0);
        }
    }

    #[test]
    fn window_outside_tile_is_a_geometry_error() {
        let tile = ramp(20, 20);
        for c in [cand(-20, 5, 10), cand(5, 40, 10), cand(30, 30, 10)] {
            assert!(matches!(
                extract_patch(&tile, &c, Normalization::MinMax),
                Err(Error::Geometry(_))
            ));
        }
        // Partial overlap is fine: edges are replicated.
        assert!(extract_patch(&tile, &cand(0, 0, 10), Normalization::MinMax).is_ok());
    }

    #[test]
    fn attach_loads_each_tile() {
        let dir = tempfile::tempdir().unwrap();
        let raw = crate::netpbm::RawGray {
            width: 32,
            height: 32,
            maxval: 255,
            samples: (0..1024).map(|i| (i % 251) as u16).collect(),
        };
        crate::netpbm::write_pgm(&dir.path().join("1_24.pgm"), &raw).unwrap();
        let mut cands = vec![cand(10, 10, 15), cand(20, 20, 8)];
        attach_patches(&mut cands, dir.path(), Normalization::MinMax).unwrap();
        assert!(cands.iter().all(|c| c.patch.is_some()));
        let mut missing = vec![Candidate { tile_id: "2_24".into(), ..cand(1, 1, 3) }];
        assert!(attach_patches(&mut missing, dir.path(), Normalization::MinMax).is_err());
    }

    proptest! {
        #[test]
        fn patch_is_always_unit_range(
            cx in -5i64..45, cy in -5i64..45, window in 1u32..60, raw in any::<bool>()
        ) {
            let tile = ramp(40, 40);
            let norm = if raw { Normalization::Raw } else { Normalization::MinMax };
            if let Ok(p) = extract_patch(&tile, &cand(cx, cy, window), norm) {
                prop_assert_eq!(p.shape(), &[1, 15, 15]);
                prop_assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn extraction_is_pure(cx in 0i64..40, cy in 0i64..40, window in 1u32..40) {
            let tile = ramp(40, 40);
            let a = extract_patch(&tile, &cand(cx, cy, window), Normalization::MinMax).unwrap();
            let b = extract_patch(&tile, &cand(cx, cy, window), Normalization::MinMax).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
