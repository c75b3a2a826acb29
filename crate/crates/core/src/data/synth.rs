//! Synthetic crater / non-crater patches for running the pipeline without the
//! real imagery.
//!
//! Craters are a rim lit from the left: a bright half-ring facing the light
//! and a dark half-ring in shadow, radius 3-6 px, centre jittered by up to
//! 2 px. Non-craters are flat noise or a single linear ramp in a random
//! direction. Every patch carries additive Gaussian noise (sigma 0.1) and is
//! min-max normalized like an extracted patch.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::patch::{normalize, Normalization, PATCH_SIZE};
use super::Candidate;
use crate::error::{Error, Result};
use crate::netpbm::RawGray;
use crate::network::{CRATER, NON_CRATER};
use crate::rng::{stream, Stream};
use crate::tensor::Tensor;

pub const SYNTH_TILE_ID: &str = "synthetic";

const NOISE_SIGMA: f64 = 0.1;
const RIM_AMPLITUDE: f64 = 0.5;
const RIM_WIDTH: f64 = 0.8;
const RAMP_AMPLITUDE: f64 = 0.3;

fn crater_patch(rng: &mut impl Rng, noise: &Normal<f64>) -> Vec<f64> {
    let c = (PATCH_SIZE / 2) as f64;
    let radius = rng.gen_range(3.0..=6.0);
    let cx = c + rng.gen_range(-2.0..=2.0);
    let cy = c + rng.gen_range(-2.0..=2.0);
    let mut out = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for y in 0..PATCH_SIZE {
        for x in 0..PATCH_SIZE {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let d = dx.hypot(dy);
            let ring = (-(d - radius).powi(2) / (2.0 * RIM_WIDTH * RIM_WIDTH)).exp();
            // +1 on the lit (left) side, -1 in shadow.
            let facing = if d > 0.0 { -dx / d } else { 0.0 };
            out.push(0.5 + RIM_AMPLITUDE * ring * facing + noise.sample(rng));
        }
    }
    out
}

fn background_patch(rng: &mut impl Rng, noise: &Normal<f64>) -> Vec<f64> {
    let c = (PATCH_SIZE / 2) as f64;
    let ramp = rng.gen_bool(0.5);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (s, co) = angle.sin_cos();
    let mut out = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for y in 0..PATCH_SIZE {
        for x in 0..PATCH_SIZE {
            let trend = if ramp {
                RAMP_AMPLITUDE * ((x as f64 - c) * co + (y as f64 - c) * s) / c
            } else {
                0.0
            };
            out.push(0.5 + trend + noise.sample(rng));
        }
    }
    out
}

/// `n_per_class` craters followed by `n_per_class` non-craters, each laid out
/// on a 15-pixel grid of a virtual mosaic tile (see [`synth_mosaic`]).
pub fn synth_dataset(n_per_class: usize, seed: u64) -> Result<Vec<Candidate>> {
    if n_per_class == 0 {
        return Err(Error::Config("synthetic dataset needs at least one example per class".into()));
    }
    let mut rng = stream(seed, Stream::Synth);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let total = 2 * n_per_class;
    let cols = mosaic_columns(total);
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let label = if i < n_per_class { CRATER } else { NON_CRATER };
        let mut values = if label == CRATER {
            crater_patch(&mut rng, &noise)
        } else {
            background_patch(&mut rng, &noise)
        };
        normalize(&mut values, Normalization::MinMax);
        let half = (PATCH_SIZE / 2) as i64;
        out.push(Candidate {
            tile_id: SYNTH_TILE_ID.to_string(),
            center_x: ((i % cols) * PATCH_SIZE) as i64 + half,
            center_y: ((i / cols) * PATCH_SIZE) as i64 + half,
            window: PATCH_SIZE as u32,
            label,
            patch: Some(Tensor::from_vec(&[1, PATCH_SIZE, PATCH_SIZE], values)?),
        });
    }
    Ok(out)
}

fn mosaic_columns(n: usize) -> usize {
    (n as f64).sqrt().ceil().max(1.0) as usize
}

/// 16-bit graymap holding every synthetic patch at its candidate position.
pub fn synth_mosaic(candidates: &[Candidate]) -> Result<RawGray> {
    let cols = mosaic_columns(candidates.len());
    let rows = candidates.len().div_ceil(cols).max(1);
    let width = cols * PATCH_SIZE;
    let height = rows * PATCH_SIZE;
    let mut samples = vec![0u16; width * height];
    let half = (PATCH_SIZE / 2) as i64;
    for c in candidates {
        let patch = c
            .patch
            .as_ref()
            .ok_or_else(|| Error::Config("mosaic needs extracted patches".into()))?;
        let x0 = c.center_x - half;
        let y0 = c.center_y - half;
        if c.window as usize != PATCH_SIZE
            || x0 < 0
            || y0 < 0
            || x0 as usize + PATCH_SIZE > width
            || y0 as usize + PATCH_SIZE > height
        {
            return Err(Error::Geometry(format!(
                "candidate at ({}, {}) does not fit the mosaic grid",
                c.center_x, c.center_y
            )));
        }
        for v in 0..PATCH_SIZE {
            for u in 0..PATCH_SIZE {
                let value = patch.at3(0, v, u);
                samples[(y0 as usize + v) * width + x0 as usize + u] =
                    (value * 65535.0).round() as u16;
            }
        }
    }
    Ok(RawGray {
        width,
        height,
        maxval: 65535,
        samples,
    })
}

/// Mean of the left half minus mean of the right half of the annulus
/// `3 <= r <= 6` around the patch centre.
pub fn ring_contrast(patch: &Tensor) -> f64 {
    let c = (PATCH_SIZE / 2) as f64;
    let (mut left, mut nl, mut right, mut nr) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..PATCH_SIZE {
        for x in 0..PATCH_SIZE {
            let dx = x as f64 - c;
            let d = dx.hypot(y as f64 - c);
            if !(3.0..=6.0).contains(&d) {
                continue;
            }
            let v = patch.at3(0, y, x);
            if dx < 0.0 {
                left += v;
                nl += 1;
            } else if dx > 0.0 {
                right += v;
                nr += 1;
            }
        }
    }
    left / nl as f64 - right / nr as f64
}
