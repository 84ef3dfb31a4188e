//! End-to-end hybrid classifiers: a quanvolutional network over images and a
//! QNN head over extracted features, their trainer, metrics and reports.

mod model;
mod report;
mod train;

use serde::Serialize;

pub use model::{auto_layers, HybridModel, ModelSpec, ModelVariant, QnnHead, QuanvNet, HYBRID_MAGIC, HYBRID_VERSION};
pub use report::{compare_runs, format_percent, summarize_seeds, Comparison, SeedSummary};
pub use train::{
    evaluate, fit, metrics_csv, parse_metrics_csv, train_qnn_head, train_quanvnet, EpochMetrics, Samples, TrainOptions,
    TrainedRun, CSV_HEADER,
};

/// Written next to every metrics file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub spec: ModelSpec,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub config: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_dataset;
    use crate::features::FeatureSet;
    use crate::Error;
    use rand::Rng;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let data = synth_dataset(3, 3, 5);
        let spec = ModelSpec::quanvnet(true, 8);
        let model = HybridModel::init_quanvnet(&spec, 14, 14).unwrap();
        let (x, label) = (&data.images[1], data.labels[1]);
        let (_, grad) = model.loss_gradient(x, label).unwrap();
        assert_eq!(grad.len(), 24 + 36 * 32 + 32 + 32 * 3 + 3);
        let h = 1e-5;
        for idx in [0, 13, 23, 24, 24 + 600, grad.len() - 2] {
            let mut plus = model.clone();
            *plus.trainable_params()[idx] += h;
            let mut minus = model.clone();
            *minus.trainable_params()[idx] -= h;
            let fd = (plus.loss(x, label).unwrap() - minus.loss(x, label).unwrap()) / (2.0 * h);
            assert!(rel_err(grad[idx], fd) <= 1e-3, "param {idx}: {} vs {fd}", grad[idx]);
        }
    }

    #[test]
    fn frozen_filter_is_untouched() {
        let data = synth_dataset(3, 30, 1);
        let mut spec = ModelSpec::quanvnet(false, 2);
        spec.epochs = 2;
        spec.batch = 10;
        let before = HybridModel::init_quanvnet(&spec, 14, 14).unwrap();
        let run = train_quanvnet(&spec, &data, &data, TrainOptions::default(), |_| {}).unwrap();
        assert_eq!(run.model.quantum_params(), before.quantum_params());
        assert_ne!(run.model, before);
        assert!(run.history.iter().all(|m| m.circuit_executions == 30 * 9));
    }

    #[test]
    fn execution_counts_follow_the_budget() {
        let spec = ModelSpec::quanvnet(true, 0);
        let model = HybridModel::init_quanvnet(&spec, 14, 14).unwrap();
        assert_eq!(model.executions_per_sample().unwrap() * 600, 394_200);

        let data = synth_dataset(3, 6, 1);
        let mut spec = spec;
        spec.epochs = 1;
        spec.batch = 4;
        let run = train_quanvnet(&spec, &data, &data, TrainOptions::default(), |_| {}).unwrap();
        assert_eq!(run.history[0].circuit_executions, 6 * 657);
    }

    #[test]
    fn untrained_model_is_near_chance() {
        let data = synth_dataset(3, 600, 3);
        let model = HybridModel::init_quanvnet(&ModelSpec::quanvnet(true, 4), 14, 14).unwrap();
        let (loss, acc) = evaluate(&model, (&data).into()).unwrap();
        assert!(loss.is_finite());
        assert!((acc - 1.0 / 3.0).abs() <= 0.08, "accuracy {acc}");
    }

    #[test]
    fn same_seed_same_history() {
        let data = synth_dataset(3, 24, 9);
        let mut spec = ModelSpec::quanvnet(true, 5);
        spec.epochs = 2;
        spec.batch = 8;
        let opts = TrainOptions { record_time: false };
        let a = train_quanvnet(&spec, &data, &data, opts, |_| {}).unwrap();
        let b = train_quanvnet(&spec, &data, &data, opts, |_| {}).unwrap();
        assert_eq!(metrics_csv(&a.history), metrics_csv(&b.history));
        assert_eq!(a.model, b.model);
        assert_eq!(parse_metrics_csv(&metrics_csv(&a.history)).unwrap(), a.history);
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut data = synth_dataset(3, 6, 1);
        data.images[2][5] = f64::NAN;
        let mut spec = ModelSpec::quanvnet(false, 0);
        spec.epochs = 1;
        let err = train_quanvnet(&spec, &data, &data, TrainOptions::default(), |_| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)), "{err}");

        let data = synth_dataset(3, 6, 1);
        spec.optimizer = crate::nn::OptimizerSpec::sgd(1e300);
        spec.epochs = 3;
        spec.batch = 2;
        let err = train_quanvnet(&spec, &data, &data, TrainOptions::default(), |_| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)), "{err}");
    }

    fn blob_features(d: usize, n: usize, seed: u64) -> FeatureSet {
        let mut rng = crate::rng::substream(seed, "blobs");
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let rows = labels
            .iter()
            .map(|&l| (0..d).map(|j| if j % 3 == l { 1.0 } else { 0.0 } + rng.gen_range(-0.1..0.1)).collect())
            .collect();
        FeatureSet::new(d, rows, labels).unwrap()
    }

    #[test]
    fn qnn_head_parameter_counts() {
        for (d, layers) in [(10, 3), (5, 6)] {
            let spec = ModelSpec::qnn_head(d, 3, 0).unwrap();
            let model = HybridModel::init_qnn_head(&spec, &blob_features(d, 9, 0).rows).unwrap();
            assert_eq!(model.quantum_params().len(), 60);
            let HybridModel::QnnHead(h) = &model else { panic!() };
            assert_eq!(h.qnn.num_layers, layers);
        }
        let spec = ModelSpec::qnn_head(5, 3, 0).unwrap();
        let err = HybridModel::init_qnn_head(&spec, &blob_features(4, 9, 0).rows).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(auto_layers(7).is_err());
    }

    #[test]
    fn frozen_circuit_head_still_learns() {
        let train = blob_features(5, 60, 1);
        let val = blob_features(5, 30, 2);
        let mut spec = ModelSpec::qnn_head(5, 3, 3).unwrap();
        if let ModelVariant::QnnHead { trainable, .. } = &mut spec.variant {
            *trainable = false;
        }
        spec.epochs = 8;
        spec.batch = 10;
        let start = HybridModel::init_qnn_head(&spec, &train.rows).unwrap();
        let (loss0, _) = evaluate(&start, (&train).into()).unwrap();
        let run = train_qnn_head(&spec, &train, &val, TrainOptions::default(), |_| {}).unwrap();
        assert!(run.history.last().unwrap().train_loss < loss0);
        assert_eq!(run.model.quantum_params(), start.quantum_params());
        assert_eq!(run.history[0].circuit_executions, 60);
    }

    #[test]
    fn qnn_head_gradient_matches_finite_differences() {
        let train = blob_features(5, 6, 4);
        let spec = ModelSpec::qnn_head(5, 3, 1).unwrap();
        let model = HybridModel::init_qnn_head(&spec, &train.rows).unwrap();
        let (x, label) = (&train.rows[0], train.labels[0]);
        let (_, grad) = model.loss_gradient(x, label).unwrap();
        let h = 1e-5;
        for idx in [0, 17, 59, 60, 70, 77] {
            let mut plus = model.clone();
            *plus.trainable_params()[idx] += h;
            let mut minus = model.clone();
            *minus.trainable_params()[idx] -= h;
            let fd = (plus.loss(x, label).unwrap() - minus.loss(x, label).unwrap()) / (2.0 * h);
            assert!(rel_err(grad[idx], fd) <= 1e-3, "param {idx}: {} vs {fd}", grad[idx]);
        }
    }

    #[test]
    fn checkpoints_round_trip() {
        let q = HybridModel::init_quanvnet(&ModelSpec::quanvnet(true, 1), 14, 14).unwrap();
        assert_eq!(HybridModel::from_bytes(&q.to_bytes()).unwrap(), q);
        let spec = ModelSpec::qnn_head(10, 3, 0).unwrap();
        let h = HybridModel::init_qnn_head(&spec, &blob_features(10, 9, 0).rows).unwrap();
        let bytes = h.to_bytes();
        assert_eq!(HybridModel::from_bytes(&bytes).unwrap(), h);
        assert!(matches!(HybridModel::from_bytes(&bytes[..bytes.len() - 8]), Err(Error::Format { .. })));
    }

    fn history(train_loss: f64, val_loss: f64, train_acc: f64, val_acc: f64) -> Vec<EpochMetrics> {
        vec![EpochMetrics {
            epoch: 1,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            wall_seconds: 0.0,
            circuit_executions: 0,
        }]
    }

    #[test]
    fn comparison_report() {
        let a = history(0.8, 0.5, 0.9, 0.8);
        let c = compare_runs(&a, &a).unwrap();
        assert_eq!((c.train_loss_pct, c.val_loss_pct, c.train_acc_pts, c.val_acc_pts), (0.0, 0.0, 0.0, 0.0));

        let b = history(1.0, 0.98, 0.8654, 0.8);
        let c = compare_runs(&a, &b).unwrap();
        assert_eq!(
            c.to_string(),
            "20.0% lower training loss, 48.98% lower validation loss, 3.46% higher training accuracy, 0.0% higher validation accuracy"
        );
        let back = compare_runs(&b, &a).unwrap().to_string();
        assert!(back.starts_with("25.0% higher training loss"), "{back}");
        assert!(compare_runs(&a, &[]).is_err());

        assert_eq!(format_percent(48.47), "48.47");
        assert_eq!(format_percent(49.2), "49.2");
        assert_eq!(format_percent(15.98), "15.98");

        let s = summarize_seeds(&[(a.clone(), b.clone()), (b.clone(), a.clone())]).unwrap();
        assert_eq!(s.wins, [1, 1, 1, 2]);
    }
}
