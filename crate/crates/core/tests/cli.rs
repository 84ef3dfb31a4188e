use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn quanv(args: &[&str]) -> Output {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    Command::new(env!("CARGO_BIN_EXE_quanv"))
        .args(args)
        .env("QUANV_DATA_DIR", data)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = quanv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn prepare(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["prepare", "--dataset", "mnist", "--classes", "2,4,6", "--per-class", "10", "--seed", "1"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", s(&out)]);
    ok(&args);
    out
}

#[test]
fn count_reports_totals() {
    assert_eq!(ok(&["count"]).trim(), "51450");
    assert_eq!(ok(&["count", "--batch", "1", "--no-trainable"]).trim(), "49");
    assert_eq!(ok(&["count", "--batch", "1", "--accounting", "two-term"]).trim(), "1029");
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(quanv(&["count", "--image", "28by28"]).status.code(), Some(2));
    assert_eq!(quanv(&["count", "--kernel", "0"]).status.code(), Some(2));
    assert_eq!(quanv(&["prepare", "--dataset", "cifar", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(quanv(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("count.json");
    std::fs::write(&cfg, r#"{"batch": 2, "trainable": false}"#).unwrap();
    assert_eq!(ok(&["count", "--config", s(&cfg)]).trim(), "98");
    assert_eq!(ok(&["count", "--config", s(&cfg), "--batch", "3"]).trim(), "147");

    std::fs::write(&cfg, r#"{"batchsize": 2}"#).unwrap();
    assert_eq!(quanv(&["count", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn prepare_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = prepare(tmp.path(), "a", &[]);
    let b = prepare(tmp.path(), "b", &[]);
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        if n == "manifest.json" {
            continue;
        }
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn quanv_training_is_reproducible_and_evaluable() {
    let tmp = tempfile::tempdir().unwrap();
    let subset = prepare(tmp.path(), "subset", &["--downsample", "2"]);
    let run = |name: &str, trainable: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "--threads", "1", "train-quanv", "--subset", s(&subset), "--epochs", "2", "--batch", "10",
            "--trainable", trainable, "--record-time", "false", "--out", s(&out),
        ]);
        out
    };
    let a = run("a", "true");
    let b = run("b", "true");
    let csv = std::fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("model.bin")).unwrap(), std::fs::read(b.join("model.bin")).unwrap());

    let last = String::from_utf8(csv).unwrap().lines().last().unwrap().to_string();
    let cols: Vec<&str> = last.split(',').collect();
    let eval = ok(&["evaluate", "--checkpoint", s(&a.join("model.bin")), "--data", s(&subset), "--split", "train"]);
    let parts: Vec<f64> = eval.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let train_loss: f64 = cols[1].parse().unwrap();
    let train_acc: f64 = cols[3].parse().unwrap();
    assert!((parts[0] - train_loss).abs() < 1e-6, "{eval} vs {last}");
    assert!((parts[1] - train_acc).abs() < 1e-6);

    let frozen = run("frozen", "false");
    let cmp = ok(&["compare", s(&a), s(&frozen)]);
    assert!(cmp.contains("training loss") && cmp.contains("validation accuracy"), "{cmp}");
}

#[test]
fn feature_pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let subset = prepare(tmp.path(), "subset", &[]);
    let cae = tmp.path().join("cae.bin");
    let pca = tmp.path().join("pca.bin");
    ok(&[
        "train-cae", "--dataset", "mnist", "--limit", "100", "--latent-dim", "5", "--epochs", "1", "--out", s(&cae),
    ]);
    ok(&["fit-pca", "--dataset", "mnist", "--limit", "200", "--components", "5", "--out", s(&pca)]);
    assert!(tmp.path().join("cae.bin.json").exists());

    for (model, name) in [(&cae, "cae-feat"), (&pca, "pca-feat")] {
        let feats = tmp.path().join(name);
        ok(&["extract", "--model", s(model), "--subset", s(&subset), "--out", s(&feats)]);
        let out = tmp.path().join(format!("{name}-run"));
        let stdout = ok(&[
            "train-qnn", "--features", s(&feats), "--layers", "auto", "--epochs", "1", "--batch", "10",
            "--record-time", "false", "--out", s(&out),
        ]);
        assert!(stdout.contains("val_acc"));
        ok(&["evaluate", "--checkpoint", s(&out.join("model.bin")), "--data", s(&feats)]);
    }
}
