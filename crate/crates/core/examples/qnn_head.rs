//! PCA features into a 5-qubit QNN classifier.
//!
//! Usage: `cargo run --release --example qnn_head -- [data-dir]`

use quanv::datasets::{load_pool, make_subset, Source, SubsetSpec};
use quanv::features::{fit_pca, Reducer};
use quanv::hybrid::{evaluate, train_qnn_head, ModelSpec, TrainOptions};
use std::path::PathBuf;

fn main() -> quanv::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let pool = load_pool(&dir, Source::Mnist)?;
    let reducer = Reducer::Pca(fit_pca(&pool.images[..2000], 5)?);

    let (train, val) = make_subset(&pool, &SubsetSpec::new(Source::Mnist, vec![0, 1, 7], 100, 0)?)?;
    let ftrain = reducer.extract(&train.images, &train.labels)?;
    let fval = reducer.extract(&val.images, &val.labels)?;

    let mut spec = ModelSpec::qnn_head(5, 3, 0)?;
    spec.epochs = 5;
    let run = train_qnn_head(&spec, &ftrain, &fval, TrainOptions::default(), |m| {
        println!("epoch {}  train loss {:.4}  val acc {:.3}", m.epoch, m.train_loss, m.val_acc)
    })?;
    println!("{} circuit parameters", run.model.quantum_params().len());
    let (loss, acc) = evaluate(&run.model, (&fval).into())?;
    println!("validation: loss {loss:.4}, accuracy {acc:.3}");
    Ok(())
}
