//! The `crater-cnn` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::Settings;
use crate::data::{
    attach_patches, label_counts, load_candidates, synth_dataset, synth_mosaic, to_samples,
    write_candidates, Candidate, Region, SYNTH_TILE_ID,
};
use crate::error::Error;
use crate::eval::{cross_validate, report_csv, report_table, CrossValidation, EvalReport};
use crate::model_io::{load_model, save_model};
use crate::netpbm::write_pgm;
use crate::network::{Network, CRATER};
use crate::train::{accuracy, predict, train};
use crate::viz::{activation_maps, false_color, filter_maps, montage, write_image};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crater-cnn", version, about = "Crater detection with a small convolutional network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on all given data and write a model checkpoint plus trace
    Train(Settings),
    /// k-fold cross-validated F1 per region
    Crossval(Settings),
    /// Classify candidates with a trained model
    Predict(Settings),
    /// Render first-layer filters and responses as false-color PPM montages
    Visualize(Settings),
    /// Write a synthetic candidate list and mosaic tile
    Synth(Settings),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Normal output goes to `out`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `crater-cnn <COMMAND> --help` for usage.");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn std::io::Write) -> CliResult<()> {
    match cmd {
        Command::Train(s) => cmd_train(&s.with_config_file()?, out),
        Command::Crossval(s) => cmd_crossval(&s.with_config_file()?, out),
        Command::Predict(s) => cmd_predict(&s.with_config_file()?, out),
        Command::Visualize(s) => cmd_visualize(&s.with_config_file()?, out),
        Command::Synth(s) => cmd_synth(&s.with_config_file()?, out),
    }
}

fn out_dir(s: &Settings) -> CliResult<PathBuf> {
    let dir = s.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn tiles_in(dir: &Path) -> CliResult<Vec<String>> {
    let mut tiles = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "pgm") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                tiles.push(stem.to_string());
            }
        }
    }
    tiles.sort();
    Ok(tiles)
}

/// Candidates with patches, from `--synthetic` or `--candidates` + `--tiles`,
/// restricted to `--region` when given.
fn load_data(s: &Settings) -> CliResult<Vec<Candidate>> {
    if s.synthetic.is_some() && s.region.is_some() {
        return Err(CliError::Usage("--region applies to file input, not --synthetic".into()));
    }
    let cands = if let Some(n) = s.synthetic {
        synth_dataset(n, s.seed())?
    } else {
        let (Some(csv), Some(tiles)) = (&s.candidates, &s.tiles) else {
            return Err(CliError::Usage(
                "need --candidates PATH and --tiles DIR, or --synthetic N".into(),
            ));
        };
        if !csv.is_file() {
            return Err(CliError::Usage(format!("candidates file {} not found", csv.display())));
        }
        if !tiles.is_dir() {
            return Err(CliError::Usage(format!("tiles directory {} not found", tiles.display())));
        }
        let known = tiles_in(tiles)?;
        let mut cands = load_candidates(csv, &known)?;
        if let Some(region) = s.region {
            cands.retain(|c| Region::of_tile(&c.tile_id) == Some(region));
        }
        attach_patches(&mut cands, tiles, s.normalization.unwrap_or_default())?;
        cands
    };
    if cands.is_empty() {
        return Err(CliError::Runtime(Error::EmptyDataset("no candidates selected".into())));
    }
    Ok(cands)
}

fn group_key(tile_id: &str) -> String {
    match Region::of_tile(tile_id) {
        Some(r) => r.label(),
        None if tile_id == SYNTH_TILE_ID => "Synthetic".to_string(),
        None => format!("Tile {tile_id}"),
    }
}

pub fn cmd_train(s: &Settings, out: &mut dyn std::io::Write) -> CliResult<()> {
    let cands = load_data(s)?;
    let dir = out_dir(s)?;
    let samples = to_samples(&cands)?;
    let cfg = s.train_config()?;
    let mut net = Network::new(s.net_config()?, s.seed())?;
    let trace = train(&mut net, &samples, &cfg)?;
    let model_path = s.model.clone().unwrap_or_else(|| dir.join("model.crcnn"));
    save_model(&model_path, &net)?;
    fs::write(dir.join("trace.csv"), trace.to_csv())?;
    let (neg, pos) = label_counts(&cands);
    let acc = accuracy(&net, &samples)?;
    let last = trace.final_stats().expect("at least one epoch");
    writeln!(
        out,
        "trained on {} examples ({pos} craters, {neg} non-craters) for {} epochs",
        samples.len(),
        cfg.epochs
    )?;
    writeln!(out, "final epoch loss {:.6}", last.mean_loss)?;
    writeln!(out, "final training accuracy {:.2}%", acc * 100.0)?;
    writeln!(out, "model written to {}", model_path.display())?;
    Ok(())
}

pub fn cmd_crossval(s: &Settings, out: &mut dyn std::io::Write) -> CliResult<()> {
    let cands = load_data(s)?;
    let dir = out_dir(s)?;
    let mut groups: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    for c in cands {
        groups.entry(group_key(&c.tile_id)).or_default().push(c);
    }
    // West, Center, East first, in table order.
    let mut keys: Vec<String> = Region::ALL
        .iter()
        .map(|r| r.label())
        .filter(|k| groups.contains_key(k))
        .collect();
    keys.extend(groups.keys().filter(|k| !keys.contains(k)).cloned().collect::<Vec<_>>());

    let cv = CrossValidation {
        k: s.folds.unwrap_or(10),
        seed: s.seed(),
        jobs: s.jobs.unwrap_or(0),
    };
    let net_cfg = s.net_config()?;
    let train_cfg = s.train_config()?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for key in keys {
        let samples = to_samples(&groups[&key])?;
        reports.push(cross_validate(&samples, &key, &cv, net_cfg, &train_cfg)?);
    }
    write!(out, "{}", report_table(&reports))?;
    if let Some(r) = reports.first() {
        writeln!(out, "{}", r.config_summary())?;
    }
    let csv_path = s.csv.clone().unwrap_or_else(|| dir.join("crossval.csv"));
    fs::write(&csv_path, report_csv(&reports))?;
    writeln!(out, "per-fold results written to {}", csv_path.display())?;
    Ok(())
}

fn require_model(s: &Settings) -> CliResult<Network> {
    let path = s
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("need --model PATH".into()))?;
    if !path.is_file() {
        return Err(CliError::Usage(format!("model file {} not found", path.display())));
    }
    Ok(load_model(path)?)
}

pub fn cmd_predict(s: &Settings, out: &mut dyn std::io::Write) -> CliResult<()> {
    let net = require_model(s)?;
    let cands = load_data(s)?;
    let mut text = String::from("index,tile_id,center_x,center_y,label,predicted,p_crater\n");
    for (i, c) in cands.iter().enumerate() {
        let patch = c.patch.as_ref().expect("load_data attaches patches");
        let p = predict(&net, patch)?;
        let _ = writeln!(
            text,
            "{i},{},{},{},{},{},{:.6}",
            c.tile_id, c.center_x, c.center_y, c.label, p.class, p.probs[CRATER]
        );
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn cmd_visualize(s: &Settings, out: &mut dyn std::io::Write) -> CliResult<()> {
    let net = require_model(s)?;
    let cands = load_data(s)?;
    let index = match s.index {
        Some(i) => i,
        None => cands.iter().position(|c| c.label == CRATER).unwrap_or(0),
    };
    let cand = cands.get(index).ok_or_else(|| {
        CliError::Usage(format!("--index {index} out of range ({} candidates)", cands.len()))
    })?;
    let dir = out_dir(s)?;
    let scale = s.scale.unwrap_or(8);
    let patch = cand.patch.as_ref().expect("load_data attaches patches");

    let render = |maps: Vec<crate::Tensor>| -> CliResult<_> {
        let images = maps.iter().map(false_color).collect::<crate::Result<Vec<_>>>()?;
        Ok(montage(&images, 5, scale)?)
    };
    let filters = render(filter_maps(&net)?)?;
    let activations = render(activation_maps(&net, patch)?)?;
    let filters_path = dir.join("filters.ppm");
    let activations_path = dir.join("activations.ppm");
    write_image(&filters, &filters_path)?;
    write_image(&activations, &activations_path)?;
    writeln!(
        out,
        "candidate {index} ({}, label {}): wrote {} and {}",
        cand.tile_id,
        cand.label,
        filters_path.display(),
        activations_path.display()
    )?;
    Ok(())
}

pub fn cmd_synth(s: &Settings, out: &mut dyn std::io::Write) -> CliResult<()> {
    let n = s
        .synthetic
        .ok_or_else(|| CliError::Usage("need --synthetic N (examples per class)".into()))?;
    let cands = synth_dataset(n, s.seed())?;
    let dir = out_dir(s)?;
    let csv_path = dir.join("candidates.csv");
    let tile_path = dir.join(format!("{SYNTH_TILE_ID}.pgm"));
    write_candidates(fs::File::create(&csv_path)?, &cands)?;
    write_pgm(&tile_path, &synth_mosaic(&cands)?)?;
    writeln!(
        out,
        "wrote {} candidates to {} and their mosaic to {}",
        cands.len(),
        csv_path.display(),
        tile_path.display()
    )?;
    Ok(())
}
