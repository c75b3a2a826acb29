//! Precision / recall / F1 and the k-fold cross-validation driver.
//!
//! Craters are the positive class. Per-fold F1 scores are averaged for the
//! headline number; the F1 of the summed confusion counts is reported next to
//! it.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{kfold_split, FoldPlan};
use crate::error::{Error, Result};
use crate::network::{NetConfig, Network, CRATER};
use crate::train::{predict, train_subset, Sample, TrainConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, pred: usize, label: usize) {
        match (pred == CRATER, label == CRATER) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in preds.iter().zip(labels) {
        cm.record(p, l);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    /// In `[0, 1]`.
    pub value: f64,
    /// Precision, recall or their sum had a zero denominator; `value` is 0.
    pub degenerate: bool,
}

impl F1Score {
    pub fn percent(&self) -> f64 {
        self.value * 100.0
    }
}

/// `2 P R / (P + R)`; zero and flagged when any denominator vanishes.
pub fn f1(cm: &ConfusionMatrix) -> F1Score {
    let degenerate = F1Score {
        value: 0.0,
        degenerate: true,
    };
    let (Some(p), Some(r)) = (cm.precision(), cm.recall()) else {
        return degenerate;
    };
    if p + r == 0.0 {
        return degenerate;
    }
    F1Score {
        value: 2.0 * p * r / (p + r),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub f1: F1Score,
    pub train_size: usize,
    /// `(example index, predicted class)` for the held-out fold.
    pub predictions: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub region: String,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the per-fold F1 scores.
    pub mean_f1: f64,
    /// F1 of the confusion counts summed over folds.
    pub pooled_f1: F1Score,
    pub seed: u64,
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl EvalReport {
    pub fn pooled_confusion(&self) -> ConfusionMatrix {
        self.folds
            .iter()
            .fold(ConfusionMatrix::default(), |acc, f| acc.merge(&f.confusion))
    }

    pub fn config_summary(&self) -> String {
        format!(
            "seed={} folds={} epochs={} lr={} batch={} lr_decay={} hidden={}",
            self.seed,
            self.folds.len(),
            self.train.epochs,
            self.train.learning_rate,
            self.train.batch_size,
            self.train.lr_decay,
            self.net.hidden
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValidation {
    pub k: usize,
    pub seed: u64,
    /// Worker threads for fold-level parallelism; 0 uses rayon's default.
    pub jobs: usize,
}

impl Default for CrossValidation {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 42,
            jobs: 1,
        }
    }
}

fn run_fold(
    samples: &[Sample],
    plan: &FoldPlan,
    fold: usize,
    net_cfg: NetConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<FoldResult> {
    let test = plan.test_indices(fold);
    let train = plan.train_indices(fold);
    assert!(
        test.iter().all(|i| train.binary_search(i).is_err()),
        "fold {fold}: training set overlaps the test fold"
    );
    let fold_seed = seed.wrapping_add(fold as u64);
    let mut net = Network::new(net_cfg, fold_seed)?;
    let cfg = TrainConfig {
        seed: fold_seed,
        ..*train_cfg
    };
    train_subset(&mut net, samples, &train, &cfg, |_, _| {})?;
    let mut cm = ConfusionMatrix::default();
    let mut predictions = Vec::with_capacity(test.len());
    for &i in &test {
        let class = predict(&net, &samples[i].patch)?.class;
        cm.record(class, samples[i].label);
        predictions.push((i, class));
    }
    Ok(FoldResult {
        fold,
        f1: f1(&cm),
        confusion: cm,
        train_size: train.len(),
        predictions,
    })
}

/// k-fold cross-validation: each fold is held out once while a freshly
/// initialized network (seed `seed + fold`) trains on the rest.
pub fn cross_validate(
    samples: &[Sample],
    region: &str,
    cv: &CrossValidation,
    net_cfg: NetConfig,
    train_cfg: &TrainConfig,
) -> Result<EvalReport> {
    train_cfg.validate()?;
    net_cfg.validate()?;
    if samples.len() < cv.k {
        return Err(Error::EmptyDataset(format!(
            "{} examples cannot fill {} folds",
            samples.len(),
            cv.k
        )));
    }
    let positives = samples.iter().filter(|s| s.label == CRATER).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::EmptyDataset(
            "cross-validation needs both craters and non-craters".into(),
        ));
    }
    let plan = kfold_split(samples.len(), cv.k, cv.seed)?;
    let run = |fold| run_fold(samples, &plan, fold, net_cfg, train_cfg, cv.seed);
    let folds: Vec<FoldResult> = if cv.jobs == 1 {
        (0..cv.k).map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cv.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..cv.k).into_par_iter().map(run).collect::<Result<_>>())?
    };
    let mean_f1 = folds.iter().map(|f| f.f1.value).sum::<f64>() / folds.len() as f64;
    let pooled = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.merge(&f.confusion));
    Ok(EvalReport {
        region: region.to_string(),
        mean_f1,
        pooled_f1: f1(&pooled),
        folds,
        seed: cv.seed,
        net: net_cfg,
        train: *train_cfg,
    })
}

/// Fixed-width table, one row per region, F1 in percent to two decimals.
pub fn report_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.region.len())
        .chain(std::iter::once("Region".len()))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>10}  {:>13}  {:>5}",
        "Region", "CNN F1 (%)", "Pooled F1 (%)", "Folds"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 36));
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.2}  {:>13.2}  {:>5}",
            r.region,
            r.mean_f1 * 100.0,
            r.pooled_f1.percent(),
            r.folds.len()
        );
    }
    out
}

/// `region,fold,tp,fp,tn,fn,f1` with F1 in `[0, 1]`.
pub fn report_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("region,fold,tp,fp,tn,fn,f1\n");
    for r in reports {
        for f in &r.folds {
            let cm = f.confusion;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6}",
                r.region, f.fold, cm.tp, cm.fp, cm.tn, cm.fn_, f.f1.value
            );
        }
    }
    out
}
