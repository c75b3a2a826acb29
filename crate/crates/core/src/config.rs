//! Run settings from `key = value` files and command-line flags.
//!
//! File keys are the long flag names (`lr-decay` or `lr_decay`). Flags win
//! over the file; anything left unset falls back to the defaults.

use std::path::{Path, PathBuf};

use clap::Args;

use crate::data::{Normalization, Region};
use crate::error::{Error, Result};
use crate::network::NetConfig;
use crate::train::TrainConfig;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Settings {
    /// key=value file with defaults for any of these flags
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed for initialization, shuffling, folds and synthetic data
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-epoch learning-rate multiplier
    #[arg(long = "lr-decay")]
    pub lr_decay: Option<f64>,
    /// Mini-batch size
    #[arg(long)]
    pub batch: Option<usize>,
    /// Width of the hidden ReLU layer
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for cross-validation folds (0 = all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_parser = parse_region)]
    pub region: Option<Region>,
    /// Use N synthetic examples per class instead of input files
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Directory of <tile_id>.pgm tiles
    #[arg(long, value_name = "DIR")]
    pub tiles: Option<PathBuf>,
    /// Candidate CSV (tile_id,center_x,center_y,window,label)
    #[arg(long, value_name = "PATH")]
    pub candidates: Option<PathBuf>,
    /// Model checkpoint path
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Patch normalization: minmax or raw
    #[arg(long, value_parser = parse_normalization)]
    pub normalization: Option<Normalization>,
    /// Number of cross-validation folds
    #[arg(long)]
    pub folds: Option<usize>,
    /// Where to write the per-fold CSV (crossval)
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Candidate index to visualize
    #[arg(long)]
    pub index: Option<usize>,
    /// Integer upscaling of rendered maps
    #[arg(long)]
    pub scale: Option<usize>,
}

fn parse_region(s: &str) -> std::result::Result<Region, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_normalization(s: &str) -> std::result::Result<Normalization, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: bad value {value:?} for {key}")))
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            match key.as_str() {
                "seed" => s.seed = Some(parse_value(&key, value, line)?),
                "epochs" => s.epochs = Some(parse_value(&key, value, line)?),
                "lr" => s.lr = Some(parse_value(&key, value, line)?),
                "lr-decay" => s.lr_decay = Some(parse_value(&key, value, line)?),
                "batch" => s.batch = Some(parse_value(&key, value, line)?),
                "hidden" => s.hidden = Some(parse_value(&key, value, line)?),
                "out" => s.out = Some(PathBuf::from(value)),
                "jobs" => s.jobs = Some(parse_value(&key, value, line)?),
                "region" => s.region = Some(value.parse()?),
                "synthetic" => s.synthetic = Some(parse_value(&key, value, line)?),
                "tiles" => s.tiles = Some(PathBuf::from(value)),
                "candidates" => s.candidates = Some(PathBuf::from(value)),
                "model" => s.model = Some(PathBuf::from(value)),
                "normalization" => s.normalization = Some(value.parse()?),
                "folds" => s.folds = Some(parse_value(&key, value, line)?),
                "csv" => s.csv = Some(PathBuf::from(value)),
                "index" => s.index = Some(parse_value(&key, value, line)?),
                "scale" => s.scale = Some(parse_value(&key, value, line)?),
                _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
            }
        }
        Ok(s)
    }

    pub fn load_file(path: &Path) -> Result<Settings> {
        Settings::parse_file(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `self` win; the rest come from `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            config: self.config.or(base.config),
            seed: self.seed.or(base.seed),
            epochs: self.epochs.or(base.epochs),
            lr: self.lr.or(base.lr),
            lr_decay: self.lr_decay.or(base.lr_decay),
            batch: self.batch.or(base.batch),
            hidden: self.hidden.or(base.hidden),
            out: self.out.or(base.out),
            jobs: self.jobs.or(base.jobs),
            region: self.region.or(base.region),
            synthetic: self.synthetic.or(base.synthetic),
            tiles: self.tiles.or(base.tiles),
            candidates: self.candidates.or(base.candidates),
            model: self.model.or(base.model),
            normalization: self.normalization.or(base.normalization),
            folds: self.folds.or(base.folds),
            csv: self.csv.or(base.csv),
            index: self.index.or(base.index),
            scale: self.scale.or(base.scale),
        }
    }

    /// Merges in the `--config` file, if any.
    pub fn with_config_file(self) -> Result<Settings> {
        match &self.config {
            Some(path) => {
                let file = Settings::load_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            batch_size: self.batch.unwrap_or(d.batch_size),
            seed: self.seed(),
            lr_decay: self.lr_decay.unwrap_or(d.lr_decay),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn net_config(&self) -> Result<NetConfig> {
        let cfg = NetConfig {
            hidden: self.hidden.unwrap_or(NetConfig::default().hidden),
            ..NetConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
