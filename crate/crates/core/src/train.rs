//! Mini-batch SGD.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::network::{Network, NON_CRATER};
use crate::rng::{stream, Stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 42,
            lr_decay: 0.995,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return Err(Error::Config(format!(
                "lr decay must be positive, got {}",
                self.lr_decay
            )));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}

/// A labelled `[1, side, side]` patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub patch: Tensor,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Fraction of examples classified correctly as they were visited.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    pub fn final_stats(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,accuracy\n");
        for (i, e) in self.epochs.iter().enumerate() {
            let _ = writeln!(out, "{},{:.10},{:.6}", i + 1, e.mean_loss, e.accuracy);
        }
        out
    }
}

/// Applies `p -= lr * grad / batch_len` to every parameter and clears the
/// gradient accumulators. Nothing is updated if any gradient is non-finite.
pub fn sgd_step(net: &mut Network, lr: f64, batch_len: usize) -> Result<()> {
    if batch_len == 0 {
        return Err(Error::Config("sgd step over an empty batch".into()));
    }
    let mut params = net.params_and_grads_mut();
    if let Some((name, _, _)) = params.iter().find(|(_, _, g)| !g.all_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient in {name}; aborting update"
        )));
    }
    let step = lr / batch_len as f64;
    for (_, p, g) in params.iter_mut() {
        p.axpy(-step, g)?;
        g.fill(0.0);
    }
    Ok(())
}

/// Argmax of the softmax output; ties resolve to the non-crater class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

pub fn argmax_class(probs: &[f64]) -> usize {
    let mut best = NON_CRATER;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn predict(net: &Network, patch: &Tensor) -> Result<Prediction> {
    let probs = net.forward(patch)?;
    Ok(Prediction {
        class: argmax_class(&probs),
        probs,
    })
}

/// Fraction of `data` that `net` classifies correctly.
pub fn accuracy(net: &Network, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("accuracy of no samples".into()));
    }
    let mut correct = 0usize;
    for s in data {
        if predict(net, &s.patch)?.class == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn train(net: &mut Network, data: &[Sample], cfg: &TrainConfig) -> Result<TrainTrace> {
    let all: Vec<usize> = (0..data.len()).collect();
    train_subset(net, data, &all, cfg, |_, _| {})
}

/// Trains on `data[i]` for each `i` in `indices`.
///
/// Every epoch shuffles `indices` with the config's shuffle stream and visits
/// each exactly once; `visit(epoch, index)` is called per example.
pub fn train_subset(
    net: &mut Network,
    data: &[Sample],
    indices: &[usize],
    cfg: &TrainConfig,
    mut visit: impl FnMut(usize, usize),
) -> Result<TrainTrace> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::EmptyDataset("no training examples".into()));
    }
    let classes = net.config().classes;
    for &i in indices {
        let s = data.get(i).ok_or_else(|| {
            Error::Config(format!("training index {i} out of range ({})", data.len()))
        })?;
        if s.label >= classes {
            return Err(Error::Config(format!(
                "sample {i} has label {} (expected < {classes})",
                s.label
            )));
        }
    }

    net.zero_grad();
    let mut rng = stream(cfg.seed, Stream::Shuffle);
    let mut order = indices.to_vec();
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate_at(epoch);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            for &i in batch {
                visit(epoch, i);
                let sample = &data[i];
                let (loss, probs) = net.accumulate_example(&sample.patch, sample.label)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {} on example {i}",
                        epoch + 1
                    )));
                }
                loss_sum += loss;
                if argmax_class(&probs) == sample.label {
                    correct += 1;
                }
            }
            sgd_step(net, lr, batch.len())?;
        }
        trace.epochs.push(EpochStats {
            mean_loss: loss_sum / order.len() as f64,
            accuracy: correct as f64 / order.len() as f64,
        });
    }
    Ok(trace)
}
