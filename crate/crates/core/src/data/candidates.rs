//! Candidate and ground-truth CSV files.
//!
//! Candidates: `tile_id,center_x,center_y,window,label` with integer pixels
//! and `label` 1 for a crater, 0 otherwise. Ground truth:
//! `tile_id,center_x,center_y,radius`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::Candidate;
use crate::error::{Error, Result};
use crate::network::CRATER;

/// Window side as a multiple of the crater radius when ground-truth circles
/// become candidates; wide enough to hold the rim and its shadow.
pub const CONTEXT_FACTOR: f64 = 2.5;

#[derive(Debug, Deserialize)]
struct CandidateRecord {
    tile_id: String,
    center_x: i64,
    center_y: i64,
    window: u32,
    label: u8,
}

fn record_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    record_error(path, line, e.to_string())
}

const CANDIDATE_HEADER: [&str; 5] = ["tile_id", "center_x", "center_y", "window", "label"];

fn check_header(rdr: &mut csv::Reader<impl Read>, path: &Path, want: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(record_error(
            path,
            1,
            format!("expected header {}, found {}", want.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

/// Parses a candidate list. `known_tiles` restricts the accepted `tile_id`s;
/// `path` is used only in error messages.
pub fn parse_candidates(
    reader: impl Read,
    path: &Path,
    known_tiles: &[String],
) -> Result<Vec<Candidate>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, path, &CANDIDATE_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec: CandidateRecord = row
            .deserialize(None)
            .map_err(|e| record_error(path, line, e.to_string()))?;
        if rec.label > 1 {
            return Err(record_error(
                path,
                line,
                format!("label must be 0 or 1, found {}", rec.label),
            ));
        }
        if rec.window == 0 {
            return Err(record_error(path, line, "window must be at least 1 pixel"));
        }
        if !known_tiles.iter().any(|t| *t == rec.tile_id) {
            return Err(record_error(
                path,
                line,
                format!("unknown tile_id {:?}", rec.tile_id),
            ));
        }
        out.push(Candidate {
            tile_id: rec.tile_id,
            center_x: rec.center_x,
            center_y: rec.center_y,
            window: rec.window,
            label: usize::from(rec.label),
            patch: None,
        });
    }
    Ok(out)
}

pub fn load_candidates(path: &Path, known_tiles: &[String]) -> Result<Vec<Candidate>> {
    parse_candidates(File::open(path)?, path, known_tiles)
}

pub fn write_candidates(w: impl Write, candidates: &[Candidate]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let io = |e: csv::Error| Error::Io(e.into());
    wtr.write_record(CANDIDATE_HEADER).map_err(io)?;
    for c in candidates {
        wtr.write_record([
            c.tile_id.clone(),
            c.center_x.to_string(),
            c.center_y.to_string(),
            c.window.to_string(),
            c.label.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `(non_craters, craters)`
pub fn label_counts(candidates: &[Candidate]) -> (usize, usize) {
    let craters = candidates.iter().filter(|c| c.label == CRATER).count();
    (candidates.len() - craters, craters)
}

/// An expert-marked crater circle.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GroundTruthCrater {
    pub tile_id: String,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

impl GroundTruthCrater {
    /// Crater candidate centred on the circle with a window of
    /// [`CONTEXT_FACTOR`] times the radius.
    pub fn to_candidate(&self) -> Candidate {
        Candidate {
            tile_id: self.tile_id.clone(),
            center_x: self.center_x.round() as i64,
            center_y: self.center_y.round() as i64,
            window: (CONTEXT_FACTOR * self.radius).round().max(1.0) as u32,
            label: CRATER,
            patch: None,
        }
    }
}

pub fn parse_ground_truth(reader: impl Read, path: &Path) -> Result<Vec<GroundTruthCrater>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, path, &["tile_id", "center_x", "center_y", "radius"])?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec: GroundTruthCrater = row
            .deserialize(None)
            .map_err(|e| record_error(path, line, e.to_string()))?;
        if !(rec.radius > 0.0 && rec.radius.is_finite()) {
            return Err(record_error(path, line, "radius must be positive"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthCrater>> {
    parse_ground_truth(File::open(path)?, path)
}

/// Dense sliding-window candidates over one tile, for debugging without a
/// proper candidate generator. A window is labelled crater when some
/// ground-truth centre lies within a quarter window of its centre.
pub fn sliding_window_candidates(
    tile_id: &str,
    width: usize,
    height: usize,
    window: u32,
    step: usize,
    truth: &[GroundTruthCrater],
) -> Vec<Candidate> {
    let w = window as usize;
    if w == 0 || step == 0 || w > width || w > height {
        return Vec::new();
    }
    let reach = f64::from(window) / 4.0;
    let half = (window / 2) as i64;
    let mut out = Vec::new();
    for y0 in (0..=height - w).step_by(step) {
        for x0 in (0..=width - w).step_by(step) {
            let cx = x0 as i64 + half;
            let cy = y0 as i64 + half;
            let hit = truth.iter().any(|t| {
                t.tile_id == tile_id
                    && (t.center_x - cx as f64).hypot(t.center_y - cy as f64) <= reach
            });
            out.push(Candidate {
                tile_id: tile_id.to_string(),
                center_x: cx,
                center_y: cy,
                window,
                label: usize::from(hit),
                patch: None,
            });
        }
    }
    out
}
