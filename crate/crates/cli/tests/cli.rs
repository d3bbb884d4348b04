use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qids(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qids")).args(args).env("QIDS_WORKERS", "1").output().expect("binary runs")
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json")
}

fn run_ok(args: &[&str]) -> String {
    let out = qids(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 10] = [
    "--set",
    "data.synth.classes.Normal.count=30",
    "--set",
    "data.synth.classes.Flooding.count=10",
    "--set",
    "data.synth.classes.Blackhole.count=10",
    "--set",
    "data.synth.classes.Wormhole.count=10",
    "--set",
    "train.epochs=1",
];

#[test]
fn gen_writes_the_configured_rows_deterministically() {
    let cfg = quick_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_ok(&["gen", "-c", cfg.to_str().unwrap(), "-o", d.path().to_str().unwrap()]);
    }
    let csv_a = std::fs::read(a.path().join("dataset.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.path().join("dataset.csv")).unwrap());
    let rows = String::from_utf8(csv_a).unwrap().lines().count() - 1;
    assert_eq!(rows, 88 + 4 * 78);
    let prov = json(&a.path().join("dataset.provenance.json"));
    assert!(prov.to_string().contains("SYNTHETIC"), "{prov}");
}

#[test]
fn gen_refuses_all_zero_counts() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["gen".to_string(), "-o".into(), d.path().to_str().unwrap().into()];
    for class in ["Normal", "Flooding", "Blackhole", "Wormhole", "Sybil"] {
        args.push("--set".into());
        args.push(format!("data.synth.classes.{class}.count=0"));
    }
    let out = qids(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero"), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.path().join("dataset.csv").exists());
}

fn column_stats(csv: &str) -> Vec<(f64, f64)> {
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').skip(3).map(|v| v.parse().unwrap()).collect()).collect();
    let n = rows.len() as f64;
    (0..rows[0].len())
        .map(|c| {
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let s = (rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, s)
        })
        .collect()
}

#[test]
fn features_standardize_with_train_statistics() {
    let cfg = quick_config();
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    run_ok(&["gen", "-c", cfg.to_str().unwrap(), "-o", dir]);
    let dataset = d.path().join("dataset.csv");
    run_ok(&["features", "-c", cfg.to_str().unwrap(), "-o", dir, "--dataset", dataset.to_str().unwrap()]);

    let train = std::fs::read_to_string(d.path().join("features_train.csv")).unwrap();
    for (c, (m, s)) in column_stats(&train).into_iter().enumerate() {
        assert!(m.abs() < 1e-9, "column {c} mean {m}");
        assert!((s - 1.0).abs() < 1e-9, "column {c} std {s}");
    }
    let standardizer = std::fs::read(d.path().join("standardizer.json")).unwrap();
    let manifest = json(&d.path().join("features.json"));
    assert_eq!(manifest["standardizer_sha256"], qids_core::sha256_hex(&standardizer));

    // feeding the dataset file or regenerating from the config gives the same matrices
    let e = tempfile::tempdir().unwrap();
    run_ok(&["features", "-c", cfg.to_str().unwrap(), "-o", e.path().to_str().unwrap()]);
    for f in ["features_train.csv", "features_test.csv", "standardizer.json"] {
        assert_eq!(std::fs::read(d.path().join(f)).unwrap(), std::fs::read(e.path().join(f)).unwrap(), "{f}");
    }
}

fn train_footprint(tag: &str) -> serde_json::Value {
    let cfg = quick_config();
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "-c", cfg.to_str().unwrap(), "-o", d.path().to_str().unwrap(), "-m", tag];
    args.extend(SMALL);
    run_ok(&args);
    let ck = json(&d.path().join(format!("{}.checkpoint.json", tag.to_ascii_lowercase())));
    assert!(d.path().join(format!("{}.trace.csv", tag.to_ascii_lowercase())).exists());
    ck["footprint"].clone()
}

#[test]
fn train_records_the_hybrid_footprint() {
    let f = train_footprint("HYBRID-8L");
    assert_eq!(f, serde_json::json!({"qubits": 8, "layers": 8, "classical_params": 18, "quantum_params": 64}));
}

#[test]
fn train_records_the_qtnn_footprint() {
    let f = train_footprint("QTNN-16-4");
    assert_eq!(f, serde_json::json!({"qubits": 9, "layers": 4, "classical_params": 450, "quantum_params": 36}));
}

#[test]
fn unknown_model_tag_is_a_usage_error() {
    let out = qids(&["train", "-m", "MLP-3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model tag"));
}

#[test]
fn bench_emits_one_row_per_model_and_is_reproducible() {
    let cfg = quick_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_ok(&["bench", "-c", cfg.to_str().unwrap(), "-o", d.path().to_str().unwrap()]);
    }
    let csv = std::fs::read_to_string(a.path().join("report.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(b.path().join("report.csv")).unwrap());
    let models: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["SVM", "QKERNEL", "HYBRID-2L"]);
    let hybrid = csv.lines().find(|l| l.starts_with("HYBRID-2L")).unwrap();
    assert!(hybrid.starts_with("HYBRID-2L,8,2,18,16,"), "{hybrid}");

    let report = a.path().join("report.json");
    assert_eq!(run_ok(&["report", report.to_str().unwrap(), "--csv"]), csv);
    assert!(run_ok(&["report", report.to_str().unwrap()]).contains("HYBRID-2L"));
}

#[test]
fn bench_exits_non_zero_when_a_model_fails() {
    let cfg = quick_config();
    let d = tempfile::tempdir().unwrap();
    // 64 hidden units need more qubits than the simulator supports
    let out = qids(&["bench", "-c", cfg.to_str().unwrap(), "-o", d.path().to_str().unwrap(), "--set", r#"models=["SVM","QTNN-64-1"]"#]);
    assert!(!out.status.success());
    let csv = std::fs::read_to_string(d.path().join("report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("SVM,") && l.contains(",ok,")), "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("QTNN-64-1,") && l.contains(",failed,")), "{csv}");
}

#[test]
fn dry_run_applies_overrides() {
    let out = run_ok(&["bench", "--dry-run", "--set", "train.epochs=5", "--set", "shots=100"]);
    let cfg: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(cfg["train"]["epochs"], 5);
    assert_eq!(cfg["shots"], 100);
}
