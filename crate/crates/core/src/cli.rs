//! The `quanv` command line.
//!
//! Every subcommand reads an optional `--config` JSON object whose keys are
//! the long flag names; flags given on the command line win. The resolved
//! settings are stored in the manifest written next to each output.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::binio::{read_file, write_atomic};
use crate::datasets::{
    downsample_maxpool, load_pool, load_split_dir, make_subset, save_split_dir, synth_dataset, DatasetSplit, Source,
    SubsetSpec,
};
use crate::error::{Error, Result};
use crate::features::{fit_pca, train_cae_with, CaeSpec, CaeTrainConfig, FeatureSet, Reducer};
use crate::hybrid::{
    auto_layers, compare_runs, evaluate, metrics_csv, parse_metrics_csv, train_qnn_head, train_quanvnet, EpochMetrics,
    HybridModel, ModelSpec, ModelVariant, RunManifest, TrainOptions, TrainedRun,
};
use crate::nn::OptimizerSpec;
use crate::quanv::{CircuitBudget, ShiftAccounting};

pub const DATA_DIR_ENV: &str = "QUANV_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "quanv", version, about = "Quanvolutional networks and CAE/PCA + QNN classifiers")]
pub struct Cli {
    /// Worker threads (default: all cores). 1 gives bit-exact reruns.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a seeded class subset and write it as train/validation IDX files.
    Prepare(PrepareArgs),
    /// Train a quanvolutional network on a prepared subset.
    TrainQuanv(TrainQuanvArgs),
    /// Train a convolutional autoencoder on 28x28 images.
    TrainCae(TrainCaeArgs),
    /// Reduce a prepared subset to feature files with a saved CAE or PCA model.
    Extract(ExtractArgs),
    /// Fit PCA on 28x28 images.
    FitPca(FitPcaArgs),
    /// Train a QNN classifier on extracted features.
    TrainQnn(TrainQnnArgs),
    /// Mean loss and accuracy of a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Circuit executions needed by a quanvolution layer.
    Count(CountArgs),
    /// Final-epoch differences between two metrics files.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PrepareArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory holding `<dataset>/train-*-ubyte[.gz]` (falls back to $QUANV_DATA_DIR, then ./data).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// mnist, fashion or synth.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Comma-separated original class labels, e.g. 1,7,9.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    /// Max-pool factor applied before subsetting (1 keeps full size).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downsample: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainQuanvArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory written by `prepare`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trainable: Option<bool>,
    #[arg(long, conflicts_with = "trainable")]
    #[serde(skip)]
    pub no_trainable: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// sgd, adagrad or adam.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Write measured epoch times; `false` writes 0 for byte-stable metrics.
    /// Defaults to false under `--threads 1`.
    #[arg(long, action = ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_time: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainCaeArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Use the training split of a prepared subset instead of the full pool.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<PathBuf>,
    /// Keep only the first N images.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FitPcaArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Use the training split of a prepared subset instead of the full pool.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<PathBuf>,
    /// Keep only the first N images.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExtractArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CAE or PCA model file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Prepared subset with 28x28 images.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// `auto` or an explicit count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerCount {
    Count(usize),
    Named(String),
}

impl FromStr for LayerCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.parse() {
            Ok(n) => Ok(LayerCount::Count(n)),
            Err(_) if s == "auto" => Ok(LayerCount::Named(s.into())),
            Err(_) => Err(format!("expected 'auto' or a number, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainQnnArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory written by `extract`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// `auto` (3 for ten features, 6 for five) or a number.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<LayerCount>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// Keep circuit parameters fixed and train only the dense head.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frozen_circuit: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Write measured epoch times; defaults to false under `--threads 1`.
    #[arg(long, action = ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_time: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model written by `train-quanv` or `train-qnn`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Prepared subset (QuanvNet) or feature directory (QNN head).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// train or validation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CountArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// HxW, e.g. 28x28.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Single-qubit rotation parameters (two evaluations each).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<usize>,
    /// CRZ parameters (four evaluations each, two under `--accounting two-term`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crz_params: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trainable: Option<bool>,
    #[arg(long, conflicts_with = "trainable")]
    #[serde(skip)]
    pub no_trainable: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// exact or two-term.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accounting: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Metrics CSV (or a run directory containing metrics.csv).
    pub run_a: PathBuf,
    /// Baseline metrics CSV or run directory.
    pub run_b: PathBuf,
}

/// Overlays the keys of `top` onto `base`.
fn overlay(base: &mut Value, top: Value) {
    if let (Value::Object(b), Value::Object(t)) = (base, top) {
        for (k, v) in t {
            b.insert(k, v);
        }
    }
}

/// Merges defaults, the optional config file and explicit flags, in that order.
fn resolve<T: Serialize + DeserializeOwned>(defaults: T, flags: &T, config: Option<&Path>) -> Result<(T, Value)> {
    let mut merged = serde_json::to_value(defaults)?;
    if let Some(path) = config {
        let file: Value = serde_json::from_slice(&read_file(path)?)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if !file.is_object() {
            return Err(Error::config(format!("{}: config must be a JSON object", path.display())));
        }
        serde_json::from_value::<T>(file.clone()).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        overlay(&mut merged, file);
    }
    overlay(&mut merged, serde_json::to_value(flags)?);
    let resolved = serde_json::from_value(merged.clone()).map_err(|e| Error::config(e.to_string()))?;
    Ok((resolved, merged))
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::config(format!("--{flag} is required")))
}

fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `<file>.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn split_summary(s: &DatasetSplit) -> Value {
    json!({
        "count": s.len(),
        "class_counts": s.class_counts(),
        "fingerprint": s.fingerprint(),
    })
}

fn cmd_prepare(args: &PrepareArgs) -> Result<()> {
    let defaults = PrepareArgs {
        data_dir: Some(default_data_dir()),
        dataset: Some("mnist".into()),
        per_class: Some(400),
        downsample: Some(1),
        seed: Some(0),
        ..Default::default()
    };
    let (cfg, resolved) = resolve(defaults, args, args.config.as_deref())?;
    let source: Source = required(&cfg.dataset, "dataset")?.parse()?;
    let classes = required(&cfg.classes, "classes")?;
    let per_class = required(&cfg.per_class, "per-class")?;
    let seed = required(&cfg.seed, "seed")?;
    let out = required(&cfg.out, "out")?;
    let spec = SubsetSpec::new(source, classes, per_class, seed)?;
    let pool = match source {
        Source::Synth => {
            let n = spec.classes.iter().max().map_or(0, |m| m + 1);
            synth_dataset(n, n * per_class, seed)
        }
        _ => load_pool(&required(&cfg.data_dir, "data-dir")?, source)?,
    };
    let pool = match required(&cfg.downsample, "downsample")? {
        1 => pool,
        k => downsample_maxpool(&pool, k)?,
    };
    let (train, val) = make_subset(&pool, &spec)?;
    save_split_dir(&out, &train, &val)?;
    write_json(
        &out.join("manifest.json"),
        &json!({
            "command": "prepare",
            "config": resolved,
            "name": spec.name(),
            "height": train.height,
            "width": train.width,
            "train": split_summary(&train),
            "validation": split_summary(&val),
        }),
    )?;
    println!(
        "{}: {} train / {} validation samples of {}x{} written to {}",
        spec.name(),
        train.len(),
        val.len(),
        train.height,
        train.width,
        out.display()
    );
    Ok(())
}

fn print_final(history: &[EpochMetrics]) {
    if let Some(m) = history.last() {
        println!(
            "train_loss {} val_loss {} train_acc {} val_acc {}",
            m.train_loss, m.val_loss, m.train_acc, m.val_acc
        );
    }
}

fn log_epoch(m: &EpochMetrics) {
    eprintln!(
        "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  train_acc {:.3}  val_acc {:.3}  {:.1}s",
        m.epoch, m.train_loss, m.val_loss, m.train_acc, m.val_acc, m.wall_seconds
    );
}

fn write_run(out: &Path, run: &TrainedRun, spec: &ModelSpec, fingerprint: String, resolved: Value) -> Result<()> {
    create_dir(out)?;
    write_atomic(&out.join("metrics.csv"), metrics_csv(&run.history).as_bytes())?;
    run.model.save(&out.join("model.bin"))?;
    write_json(
        &out.join("manifest.json"),
        &RunManifest {
            spec: spec.clone(),
            seed: spec.seed,
            dataset_fingerprint: fingerprint,
            config: resolved,
        },
    )
}

fn cmd_train_quanv(args: &TrainQuanvArgs, single_thread: bool) -> Result<()> {
    let mut flags = args.clone();
    if args.no_trainable {
        flags.trainable = Some(false);
    }
    let defaults = TrainQuanvArgs {
        trainable: Some(true),
        epochs: Some(10),
        lr: Some(0.5),
        optimizer: Some("adagrad".into()),
        batch: Some(50),
        hidden: Some(32),
        kernel: Some(4),
        stride: Some(4),
        layers: Some(3),
        seed: Some(0),
        record_time: Some(!single_thread),
        ..Default::default()
    };
    let (cfg, resolved) = resolve(defaults, &flags, args.config.as_deref())?;
    let subset = required(&cfg.subset, "subset")?;
    let out = required(&cfg.out, "out")?;
    let (train, val) = load_split_dir(&subset)?;
    let spec = ModelSpec {
        variant: ModelVariant::QuanvNet {
            kernel: required(&cfg.kernel, "kernel")?,
            stride: required(&cfg.stride, "stride")?,
            layers: required(&cfg.layers, "layers")?,
            trainable: required(&cfg.trainable, "trainable")?,
            hidden: required(&cfg.hidden, "hidden")?,
            classes: train.num_classes().max(val.num_classes()),
        },
        optimizer: OptimizerSpec::from_name(&required(&cfg.optimizer, "optimizer")?, required(&cfg.lr, "lr")?, 0.0)?,
        epochs: required(&cfg.epochs, "epochs")?,
        batch: required(&cfg.batch, "batch")?,
        seed: required(&cfg.seed, "seed")?,
    };
    let opts = TrainOptions {
        record_time: required(&cfg.record_time, "record-time")?,
    };
    let run = train_quanvnet(&spec, &train, &val, opts, log_epoch)?;
    write_run(&out, &run, &spec, train.fingerprint(), resolved)?;
    print_final(&run.history);
    Ok(())
}

/// Training images from a prepared subset or the full pool.
fn load_images(
    data_dir: &Option<PathBuf>,
    dataset: &Option<String>,
    subset: &Option<PathBuf>,
    limit: Option<usize>,
) -> Result<(Vec<Vec<f64>>, String)> {
    let mut data = match subset {
        Some(dir) => load_split_dir(dir)?.0,
        None => {
            let source: Source = required(dataset, "dataset")?.parse()?;
            load_pool(&required(data_dir, "data-dir")?, source)?
        }
    };
    if let Some(n) = limit {
        data.images.truncate(n);
        data.labels.truncate(n);
    }
    let fp = data.fingerprint();
    Ok((data.images, fp))
}

fn cmd_train_cae(args: &TrainCaeArgs) -> Result<()> {
    let defaults = TrainCaeArgs {
        data_dir: Some(default_data_dir()),
        dataset: Some("mnist".into()),
        latent_dim: Some(10),
        epochs: Some(30),
        batch: Some(50),
        lr: Some(0.001),
        weight_decay: Some(1e-5),
        seed: Some(0),
        ..Default::default()
    };
    let (cfg, resolved) = resolve(defaults, args, args.config.as_deref())?;
    let out = required(&cfg.out, "out")?;
    let (images, fingerprint) = load_images(&cfg.data_dir, &cfg.dataset, &cfg.subset, cfg.limit)?;
    let spec = CaeSpec::new(required(&cfg.latent_dim, "latent-dim")?)?;
    let train_cfg = CaeTrainConfig {
        epochs: required(&cfg.epochs, "epochs")?,
        batch: required(&cfg.batch, "batch")?,
        optimizer: OptimizerSpec::adam(required(&cfg.lr, "lr")?, required(&cfg.weight_decay, "weight-decay")?),
        seed: required(&cfg.seed, "seed")?,
    };
    train_cfg.optimizer.validate()?;
    let (cae, history) = train_cae_with(spec, &images, &train_cfg, |e, l| eprintln!("epoch {e:>3}  loss {l:.6}"))?;
    Reducer::Cae(cae).save(&out)?;
    write_json(
        &sidecar(&out),
        &json!({
            "command": "train-cae",
            "config": resolved,
            "dataset_fingerprint": fingerprint,
            "loss_history": history,
        }),
    )?;
    println!("autoencoder (d = {}) written to {}", spec.latent_dim, out.display());
    Ok(())
}

fn cmd_fit_pca(args: &FitPcaArgs) -> Result<()> {
    let defaults = FitPcaArgs {
        data_dir: Some(default_data_dir()),
        dataset: Some("mnist".into()),
        components: Some(10),
        ..Default::default()
    };
    let (cfg, resolved) = resolve(defaults, args, args.config.as_deref())?;
    let out = required(&cfg.out, "out")?;
    let (images, fingerprint) = load_images(&cfg.data_dir, &cfg.dataset, &cfg.subset, cfg.limit)?;
    let model = fit_pca(&images, required(&cfg.components, "components")?)?;
    write_json(
        &sidecar(&out),
        &json!({
            "command": "fit-pca",
            "config": resolved,
            "dataset_fingerprint": fingerprint,
            "explained_variance": model.explained_variance,
        }),
    )?;
    Reducer::Pca(model).save(&out)?;
    println!("PCA model written to {}", out.display());
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let (cfg, resolved) = resolve(ExtractArgs::default(), args, args.config.as_deref())?;
    let model_path = required(&cfg.model, "model")?;
    let out = required(&cfg.out, "out")?;
    let reducer = Reducer::load(&model_path)?;
    let (train, val) = load_split_dir(&required(&cfg.subset, "subset")?)?;
    let ftrain = reducer.extract(&train.images, &train.labels)?;
    let fval = reducer.extract(&val.images, &val.labels)?;
    create_dir(&out)?;
    ftrain.save(&out.join("train.feat"))?;
    fval.save(&out.join("validation.feat"))?;
    write_json(
        &out.join("manifest.json"),
        &json!({
            "command": "extract",
            "config": resolved,
            "reducer": reducer.kind(),
            "dim": reducer.output_dim(),
            "train": { "count": ftrain.len(), "fingerprint": ftrain.fingerprint() },
            "validation": { "count": fval.len(), "fingerprint": fval.fingerprint() },
        }),
    )?;
    println!(
        "{} features ({} columns) written to {}",
        reducer.kind(),
        reducer.output_dim(),
        out.display()
    );
    Ok(())
}

fn load_feature_dir(dir: &Path) -> Result<(FeatureSet, FeatureSet)> {
    Ok((
        FeatureSet::load(&dir.join("train.feat"))?,
        FeatureSet::load(&dir.join("validation.feat"))?,
    ))
}

fn cmd_train_qnn(args: &TrainQnnArgs, single_thread: bool) -> Result<()> {
    let defaults = TrainQnnArgs {
        layers: Some(LayerCount::Named("auto".into())),
        epochs: Some(20),
        optimizer: Some("sgd".into()),
        lr: Some(0.5),
        batch: Some(50),
        frozen_circuit: Some(false),
        seed: Some(0),
        record_time: Some(!single_thread),
        ..Default::default()
    };
    let (cfg, resolved) = resolve(defaults, args, args.config.as_deref())?;
    let out = required(&cfg.out, "out")?;
    let (train, val) = load_feature_dir(&required(&cfg.features, "features")?)?;
    let layers = match required(&cfg.layers, "layers")? {
        LayerCount::Count(n) => n,
        LayerCount::Named(s) if s == "auto" => auto_layers(train.dim)?,
        LayerCount::Named(s) => return Err(Error::config(format!("--layers must be 'auto' or a number, got '{s}'"))),
    };
    let spec = ModelSpec {
        variant: ModelVariant::QnnHead {
            num_qubits: train.dim,
            layers,
            classes: train.num_classes().max(val.num_classes()),
            trainable: !required(&cfg.frozen_circuit, "frozen-circuit")?,
        },
        optimizer: OptimizerSpec::from_name(&required(&cfg.optimizer, "optimizer")?, required(&cfg.lr, "lr")?, 0.0)?,
        epochs: required(&cfg.epochs, "epochs")?,
        batch: required(&cfg.batch, "batch")?,
        seed: required(&cfg.seed, "seed")?,
    };
    let opts = TrainOptions {
        record_time: required(&cfg.record_time, "record-time")?,
    };
    let run = train_qnn_head(&spec, &train, &val, opts, log_epoch)?;
    write_run(&out, &run, &spec, train.fingerprint(), resolved)?;
    print_final(&run.history);
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let defaults = EvaluateArgs {
        split: Some("validation".into()),
        ..Default::default()
    };
    let (cfg, _) = resolve(defaults, args, args.config.as_deref())?;
    let model = HybridModel::load(&required(&cfg.checkpoint, "checkpoint")?)?;
    let data = required(&cfg.data, "data")?;
    let want_train = match required(&cfg.split, "split")?.as_str() {
        "train" => true,
        "validation" | "val" => false,
        other => return Err(Error::config(format!("--split must be train or validation, got '{other}'"))),
    };
    let (loss, acc) = match &model {
        HybridModel::QuanvNet(_) => {
            let (train, val) = load_split_dir(&data)?;
            evaluate(&model, (if want_train { &train } else { &val }).into())?
        }
        HybridModel::QnnHead(_) => {
            let (train, val) = load_feature_dir(&data)?;
            evaluate(&model, (if want_train { &train } else { &val }).into())?
        }
    };
    println!("loss {loss} accuracy {acc}");
    Ok(())
}

fn parse_hw(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::config(format!("--image must look like 28x28, got '{s}'"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
}

fn cmd_count(args: &CountArgs) -> Result<()> {
    let mut flags = args.clone();
    if args.no_trainable {
        flags.trainable = Some(false);
    }
    let defaults = CountArgs {
        image: Some("28x28".into()),
        kernel: Some(4),
        stride: Some(4),
        params: Some(10),
        crz_params: Some(0),
        trainable: Some(true),
        batch: Some(50),
        accounting: Some("exact".into()),
        ..Default::default()
    };
    let (cfg, _) = resolve(defaults, &flags, args.config.as_deref())?;
    let (height, width) = parse_hw(&required(&cfg.image, "image")?)?;
    let accounting = match required(&cfg.accounting, "accounting")?.as_str() {
        "exact" => ShiftAccounting::Exact,
        "two-term" => ShiftAccounting::TwoTermOnly,
        other => return Err(Error::config(format!("--accounting must be exact or two-term, got '{other}'"))),
    };
    let budget = CircuitBudget {
        height,
        width,
        kernel: required(&cfg.kernel, "kernel")?,
        stride: required(&cfg.stride, "stride")?,
        params_single: required(&cfg.params, "params")?,
        params_crz: required(&cfg.crz_params, "crz-params")?,
        trainable: required(&cfg.trainable, "trainable")?,
        batch: required(&cfg.batch, "batch")?,
        accounting,
    };
    eprintln!(
        "{} windows, {} executions per sample, batch of {}",
        budget.patches()?,
        budget.per_sample()?,
        budget.batch
    );
    println!("{}", budget.total()?);
    Ok(())
}

fn load_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let file = if path.is_dir() { path.join("metrics.csv") } else { path.to_path_buf() };
    let text = String::from_utf8(read_file(&file)?)
        .map_err(|_| Error::config(format!("{}: not UTF-8", file.display())))?;
    parse_metrics_csv(&text).map_err(|e| Error::config(format!("{}: {e}", file.display())))
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let a = load_metrics(&args.run_a)?;
    let b = load_metrics(&args.run_b)?;
    println!("{}", compare_runs(&a, &b)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::TrainQuanv(a) => cmd_train_quanv(a, cli.threads == Some(1)),
        Command::TrainCae(a) => cmd_train_cae(a),
        Command::Extract(a) => cmd_extract(a),
        Command::FitPca(a) => cmd_fit_pca(a),
        Command::TrainQnn(a) => cmd_train_qnn(a, cli.threads == Some(1)),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Count(a) => cmd_count(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code:
/// 0 on success, 2 for bad input or configuration, 1 otherwise.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("quanv").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"kernel": 2, "batch": 7}"#).unwrap();
        let cli = parse(&["count", "--config", cfg.to_str().unwrap(), "--batch", "3"]);
        let Command::Count(args) = cli.command else { panic!() };
        let defaults = CountArgs {
            kernel: Some(4),
            batch: Some(50),
            params: Some(10),
            ..Default::default()
        };
        let (r, v) = resolve(defaults, &args, args.config.as_deref()).unwrap();
        assert_eq!((r.kernel, r.batch, r.params), (Some(2), Some(3), Some(10)));
        assert_eq!(v["batch"], 3);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"kernal": 2}"#).unwrap();
        let err = resolve(CountArgs::default(), &CountArgs::default(), Some(&cfg)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.is_input_error());
    }

    #[test]
    fn trainable_flag_forms() {
        let Command::Count(a) = parse(&["count", "--no-trainable"]).command else { panic!() };
        assert!(a.no_trainable);
        let Command::Count(a) = parse(&["count", "--trainable"]).command else { panic!() };
        assert_eq!(a.trainable, Some(true));
        let Command::TrainQuanv(a) = parse(&["train-quanv", "--trainable", "false"]).command else { panic!() };
        assert_eq!(a.trainable, Some(false));
        let Command::Prepare(a) = parse(&["prepare", "--classes", "1,7,9"]).command else { panic!() };
        assert_eq!(a.classes, Some(vec![1, 7, 9]));
        let Command::TrainQnn(a) = parse(&["train-qnn", "--layers", "auto"]).command else { panic!() };
        assert_eq!(a.layers, Some(LayerCount::Named("auto".into())));
    }

    #[test]
    fn image_size_parsing() {
        assert_eq!(parse_hw("28x28").unwrap(), (28, 28));
        assert_eq!(parse_hw("14X12").unwrap(), (14, 12));
        assert!(parse_hw("28").is_err());
    }
}
