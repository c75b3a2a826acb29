//! Dataset ingestion: tiles, candidate lists, 15x15 patches, fold plans and a
//! synthetic crater generator.

mod candidates;
mod folds;
mod patch;
mod synth;
mod tile;

use std::fmt;
use std::str::FromStr;

pub use candidates::{
    label_counts, load_candidates, load_ground_truth, parse_candidates, parse_ground_truth,
    sliding_window_candidates, write_candidates, GroundTruthCrater, CONTEXT_FACTOR,
};
pub use folds::{kfold_split, FoldPlan};
pub use patch::{attach_patches, extract_patch, Normalization, PATCH_SIZE};
pub use synth::{ring_contrast, synth_dataset, synth_mosaic, SYNTH_TILE_ID};
pub use tile::{load_tile, GrayImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::Sample;

/// One labelled crater / non-crater window.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tile_id: String,
    pub center_x: i64,
    pub center_y: i64,
    /// Side of the square window, in pixels.
    pub window: u32,
    /// 1 = crater, 0 = non-crater.
    pub label: usize,
    /// `[1, 15, 15]` patch once extracted.
    pub patch: Option<Tensor>,
}

impl Candidate {
    pub fn to_sample(&self) -> Result<Sample> {
        let patch = self.patch.clone().ok_or_else(|| {
            Error::Config(format!(
                "candidate at ({}, {}) on tile {} has no extracted patch",
                self.center_x, self.center_y, self.tile_id
            ))
        })?;
        Ok(Sample {
            patch,
            label: self.label,
        })
    }
}

pub fn to_samples(candidates: &[Candidate]) -> Result<Vec<Sample>> {
    candidates.iter().map(Candidate::to_sample).collect()
}

/// Tile pairs evaluated together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    West,
    Center,
    East,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::West, Region::Center, Region::East];

    pub fn tiles(self) -> [&'static str; 2] {
        match self {
            Region::West => ["1_24", "1_25"],
            Region::Center => ["2_24", "2_25"],
            Region::East => ["3_24", "3_25"],
        }
    }

    pub fn of_tile(tile_id: &str) -> Option<Region> {
        Self::ALL.into_iter().find(|r| r.tiles().contains(&tile_id))
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::West => "West",
            Region::Center => "Center",
            Region::East => "East",
        }
    }

    /// Row label in the style `West (1_24+1_25)`.
    pub fn label(self) -> String {
        let [a, b] = self.tiles();
        format!("{} ({a}+{b})", self.name())
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown region {s:?} (West, Center, East)")))
    }
}

/// The six tiles of the three regions.
pub fn known_tiles() -> Vec<String> {
    Region::ALL
        .iter()
        .flat_map(|r| r.tiles())
        .map(String::from)
        .collect()
}
