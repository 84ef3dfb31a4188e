//! Loads the bundled digit pool and draws a balanced three-class subset.
//!
//! Usage: `cargo run --example load_mnist -- [data-dir]`

use quanv::datasets::{downsample_maxpool, load_pool, make_subset, Source, SubsetSpec};
use std::path::PathBuf;

fn main() -> quanv::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let pool = load_pool(&dir, Source::Mnist)?;
    println!("{} images of {}x{}, per class {:?}", pool.len(), pool.height, pool.width, pool.class_counts());

    let spec = SubsetSpec::named("MNIST_179", 0)?;
    let (train, val) = make_subset(&pool, &spec)?;
    let small = downsample_maxpool(&train, 2)?;
    println!("{}: {} train, {} validation", spec.name(), train.len(), val.len());
    println!("downsampled to {}x{}, fingerprint {}", small.height, small.width, &small.fingerprint()[..16]);

    let img = &small.images[0];
    for row in img.chunks(small.width) {
        let line: String = row.iter().map(|&v| if v > 0.5 { '#' } else if v > 0.1 { '+' } else { '.' }).collect();
        println!("{line}");
    }
    println!("label {}", small.labels[0]);
    Ok(())
}
