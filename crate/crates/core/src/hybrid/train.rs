use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{HybridModel, ModelSpec};
use crate::datasets::DatasetSplit;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::nn::Optimizer;
use crate::rng::substream;

/// Metrics recorded after each epoch. Losses and accuracies are means over
/// the whole split in evaluation mode; executions count training only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub wall_seconds: f64,
    pub circuit_executions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    /// When false, `wall_seconds` is written as 0 so metric files are
    /// byte-reproducible.
    pub record_time: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { record_time: true }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: HybridModel,
    pub history: Vec<EpochMetrics>,
}

/// Labelled inputs borrowed from a dataset or a feature set.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub inputs: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> From<&'a DatasetSplit> for Samples<'a> {
    fn from(d: &'a DatasetSplit) -> Self {
        Samples {
            inputs: &d.images,
            labels: &d.labels,
        }
    }
}

impl<'a> From<&'a FeatureSet> for Samples<'a> {
    fn from(f: &'a FeatureSet) -> Self {
        Samples {
            inputs: &f.rows,
            labels: &f.labels,
        }
    }
}

impl Samples<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Mean cross-entropy and argmax accuracy over `data`.
pub fn evaluate(model: &HybridModel, data: Samples<'_>) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::config("cannot evaluate on an empty split"));
    }
    if data.inputs.len() != data.labels.len() {
        return Err(Error::shape("inputs and labels differ in length"));
    }
    let classes = model.num_classes();
    if let Some(&l) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::config(format!("label {l} but the model has {classes} classes")));
    }
    let per_sample = data
        .inputs
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &label)| {
            let logits = model.logits(x)?;
            let (loss, _) = crate::nn::softmax_cross_entropy(&logits, label)?;
            Ok((loss, argmax(&logits) == label))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_sample.len() as f64;
    let loss = per_sample.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per_sample.iter().filter(|p| p.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Trains a QuanvNet on image splits.
pub fn train_quanvnet(
    spec: &ModelSpec,
    train: &DatasetSplit,
    val: &DatasetSplit,
    opts: TrainOptions,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedRun> {
    if (train.height, train.width) != (val.height, val.width) {
        return Err(Error::shape("training and validation images differ in size"));
    }
    let model = HybridModel::init_quanvnet(spec, train.height, train.width)?;
    fit(model, spec, train.into(), val.into(), opts, on_epoch)
}

/// Trains a QNN head on extracted features; the scaler is fitted on `train`.
pub fn train_qnn_head(
    spec: &ModelSpec,
    train: &FeatureSet,
    val: &FeatureSet,
    opts: TrainOptions,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedRun> {
    if train.dim != val.dim {
        return Err(Error::shape(format!(
            "training features have {} columns, validation {}",
            train.dim, val.dim
        )));
    }
    let model = HybridModel::init_qnn_head(spec, &train.rows)?;
    fit(model, spec, train.into(), val.into(), opts, on_epoch)
}

/// Mini-batch training of an initialised model. Per-sample gradients are
/// computed in parallel and reduced in sample order, so results do not
/// depend on the thread count.
pub fn fit(
    mut model: HybridModel,
    spec: &ModelSpec,
    train: Samples<'_>,
    val: Samples<'_>,
    opts: TrainOptions,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedRun> {
    spec.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::config("training and validation splits must be non-empty"));
    }
    let mut opt = Optimizer::new(spec.optimizer)?;
    let mut shuffle = substream(spec.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 1..=spec.epochs {
        let start = Instant::now();
        let mut executions = 0u64;
        order.shuffle(&mut shuffle);
        for batch in order.chunks(spec.batch) {
            let per_sample = batch
                .par_iter()
                .map(|&i| model.sample_grad(&train.inputs[i], train.labels[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut iter = per_sample.into_iter();
            let first = iter.next().expect("non-empty batch");
            let mut loss = first.loss;
            let mut grads = first.grads;
            executions += first.executions;
            for s in iter {
                loss += s.loss;
                executions += s.executions;
                for (acc, g) in grads.iter_mut().zip(&s.grads) {
                    for (a, b) in acc.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            opt.step(&mut model.trainable_groups_mut(), &grads)?;
        }
        let (train_loss, train_acc) = evaluate(&model, train)?;
        let (val_loss, val_acc) = evaluate(&model, val)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "epoch {epoch}: train loss {train_loss}, validation loss {val_loss}"
            )));
        }
        let m = EpochMetrics {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            wall_seconds: if opts.record_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            circuit_executions: executions,
        };
        on_epoch(&m);
        history.push(m);
    }
    Ok(TrainedRun { model, history })
}

pub const CSV_HEADER: &str = "epoch,train_loss,val_loss,train_acc,val_acc,wall_seconds,circuit_executions";

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.epoch, m.train_loss, m.val_loss, m.train_acc, m.val_acc, m.wall_seconds, m.circuit_executions
        ));
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<EpochMetrics>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::config(format!("metrics file must start with '{CSV_HEADER}'"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = |what: &str| Error::config(format!("metrics line {}: bad {what}", n + 1));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 7 {
                return Err(bad("column count"));
            }
            let real = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| bad("epoch"))?,
                train_loss: real(1, "train_loss")?,
                val_loss: real(2, "val_loss")?,
                train_acc: real(3, "train_acc")?,
                val_acc: real(4, "val_acc")?,
                wall_seconds: real(5, "wall_seconds")?,
                circuit_executions: f[6].parse().map_err(|_| bad("circuit_executions"))?,
            })
        })
        .collect()
}
