use nalgebra::DMatrix;
use proptest::prelude::*;
use quanv::datasets::{load_pool, make_subset, Source, SubsetSpec};
use quanv::features::{fit_pca, train_cae_with, CaeSpec, CaeTrainConfig, Reducer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Column scales spread the spectrum so components are well separated.
    (0..n)
        .map(|_| (0..d).map(|j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64)).collect())
        .collect()
}

#[test]
fn pca_agrees_with_svd_up_to_sign() {
    let (n, d, k) = (50, 20, 6);
    let rows = random_rows(4, n, d);
    let model = fit_pca(&rows, k).unwrap();

    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let svd = centered.svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    for (c, &idx) in order.iter().take(k).enumerate() {
        let sv = svd.singular_values[idx];
        let var = sv * sv / (n - 1) as f64;
        assert!((model.explained_variance[c] - var).abs() < 1e-8 * var.max(1.0));
        let reference: Vec<f64> = vt.row(idx).iter().copied().collect();
        let dot: f64 = reference.iter().zip(&model.components[c]).map(|(a, b)| a * b).sum();
        let sign = dot.signum();
        for (a, b) in model.components[c].iter().zip(&reference) {
            assert!((a - sign * b).abs() < 1e-8, "component {c}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_variance_is_sorted_and_projection_affine(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let rows = random_rows(seed, 30, 8);
        let model = fit_pca(&rows, 4).unwrap();
        for w in model.explained_variance.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        // transform(a·x + b·y) = a·T(x) + b·T(y) + (1 − a − b)·T(0)
        let x = &rows[0];
        let y = &rows[1];
        let mix: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let (tx, ty) = (model.transform(x).unwrap(), model.transform(y).unwrap());
        let t0 = model.transform(&[0.0; 8]).unwrap();
        let tm = model.transform(&mix).unwrap();
        for i in 0..4 {
            let want = a * tx[i] + b * ty[i] + (1.0 - a - b) * t0[i];
            prop_assert!((tm[i] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn cae_loss_falls_on_real_digits() {
    let pool = load_pool(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").as_path(), Source::Mnist).unwrap();
    let spec = SubsetSpec::new(Source::Mnist, (0..10).collect(), 120, 0).unwrap();
    let (train, _) = make_subset(&pool, &spec).unwrap();
    let cfg = CaeTrainConfig {
        epochs: 6,
        ..CaeTrainConfig::default()
    };
    let mut history = Vec::new();
    let (cae, _) = train_cae_with(CaeSpec::new(10).unwrap(), &train.images, &cfg, |_, l| history.push(l)).unwrap();
    assert!(history.last().unwrap() < &(0.5 * history[0]), "{history:?}");
    let falling = history.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(falling * 10 >= (history.len() - 1) * 9, "{history:?}");

    let reducer = Reducer::Cae(cae);
    let feats = reducer.extract(&train.images[..20], &train.labels[..20]).unwrap();
    assert_eq!(feats.dim, 10);
    let again = Reducer::from_bytes(&reducer.to_bytes()).unwrap();
    assert_eq!(again.extract(&train.images[..20], &train.labels[..20]).unwrap(), feats);
}
