//! Trains a small convolutional autoencoder and extracts latent features.
//!
//! Usage: `cargo run --release --example cae_features -- [data-dir]`

use quanv::datasets::{load_pool, Source};
use quanv::features::{train_cae_with, CaeSpec, CaeTrainConfig, Reducer};
use std::path::PathBuf;

fn main() -> quanv::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let pool = load_pool(&dir, Source::Mnist)?;
    let images = &pool.images[..1000];

    let cfg = CaeTrainConfig {
        epochs: 5,
        ..CaeTrainConfig::default()
    };
    let (cae, _) = train_cae_with(CaeSpec::new(10)?, images, &cfg, |e, loss| println!("epoch {e}  mse {loss:.5}"))?;

    let reducer = Reducer::Cae(cae);
    let feats = reducer.extract(&images[..5], &pool.labels[..5])?;
    for (row, label) in feats.rows.iter().zip(&feats.labels) {
        let z: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("digit {label}: [{}]", z.join(", "));
    }
    Ok(())
}
