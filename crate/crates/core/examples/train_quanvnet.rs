//! Trains a quanvolutional network with a trainable and a frozen filter and
//! compares the two.
//!
//! Usage: `cargo run --release --example train_quanvnet -- [data-dir] [epochs]`

use quanv::datasets::{downsample_maxpool, load_pool, make_subset, Source, SubsetSpec};
use quanv::hybrid::{compare_runs, train_quanvnet, ModelSpec, TrainOptions};
use std::path::PathBuf;

fn main() -> quanv::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);

    let pool = downsample_maxpool(&load_pool(&dir, Source::Mnist)?, 2)?;
    let (train, val) = make_subset(&pool, &SubsetSpec::named("MNIST_246", 0)?)?;

    let mut histories = Vec::new();
    for trainable in [true, false] {
        let mut spec = ModelSpec::quanvnet(trainable, 0);
        spec.epochs = epochs;
        println!("trainable = {trainable}");
        let run = train_quanvnet(&spec, &train, &val, TrainOptions::default(), |m| {
            println!(
                "  epoch {}  train {:.4}/{:.3}  val {:.4}/{:.3}  {} circuits",
                m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc, m.circuit_executions
            )
        })?;
        histories.push(run.history);
    }
    println!("trainable vs frozen: {}", compare_runs(&histories[0], &histories[1])?);
    Ok(())
}
