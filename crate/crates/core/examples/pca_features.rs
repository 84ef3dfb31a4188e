//! Fits PCA on the digit pool and reports how much variance each component keeps.
//!
//! Usage: `cargo run --release --example pca_features -- [data-dir]`

use quanv::datasets::{load_pool, Source};
use quanv::features::fit_pca;
use std::path::PathBuf;

fn main() -> quanv::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let pool = load_pool(&dir, Source::Mnist)?;
    let rows = &pool.images[..2000];
    let pca = fit_pca(rows, 10)?;

    let total: f64 = {
        let n = rows.len() as f64;
        (0..pca.dim())
            .map(|j| {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .sum()
    };
    let mut kept = 0.0;
    for (i, v) in pca.explained_variance.iter().enumerate() {
        kept += v;
        println!("component {i}: variance {v:.4}, cumulative {:.1}%", 100.0 * kept / total);
    }

    let z = pca.transform(&rows[0])?;
    let back = pca.inverse_transform(&z)?;
    let err: f64 = back.iter().zip(&rows[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / back.len() as f64;
    println!("reconstruction mse of one image from 10 numbers: {err:.4}");
    Ok(())
}
