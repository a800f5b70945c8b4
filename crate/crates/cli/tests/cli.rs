use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cloudqnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudqnn"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = cloudqnn(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const QUICK: &[&str] = &[
    "--epochs",
    "2",
    "--batches-per-epoch",
    "3",
    "--batch-size",
    "10",
    "--optimizer",
    "adam",
];

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(QUICK.iter().copied()).collect()
}

/// Synthetic data plus one QNN and one MLP checkpoint.
fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "300", "--seed", "7", "--out", "d.csv"]);
    ok(
        d,
        &with_quick(&[
            "train", "--data", "d.csv", "--model", "qnn", "--seed", "1", "--out", "qnn.json",
        ]),
    );
    ok(
        d,
        &with_quick(&[
            "train", "--data", "d.csv", "--model", "mlp", "--seed", "1", "--out", "mlp.json",
        ]),
    );
    dir
}

#[test]
fn synth_writes_data_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "1000", "--seed", "7", "--out", "d.csv"]);
    assert_eq!(read(&d.join("d.csv")).lines().count(), 1001);
    let meta = json(&d.join("d.meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["generator_version"], "synth-cloud-1");
    assert_eq!(meta["xu_randall"]["alpha0"], 100.0);
    let manifest = json(&d.join("d.manifest.json"));
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["job"]["n"], 1000);

    let first = read(&d.join("d.csv"));
    ok(d, &["synth", "--n", "1000", "--seed", "7", "--out", "d.csv", "--force"]);
    assert_eq!(read(&d.join("d.csv")), first);
}

#[test]
fn usage_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cloudqnn(d, &["synth", "--n", "10"]).status.code(), Some(1));
    assert_eq!(cloudqnn(d, &["frobnicate"]).status.code(), Some(1));
    let out = cloudqnn(
        d,
        &["train", "--data", "missing.csv", "--model", "mlp", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert_eq!(cloudqnn(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "10", "--out", "d.csv"]);
    let out = cloudqnn(d, &["synth", "--n", "20", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read(&d.join("d.csv")).lines().count(), 11);
    ok(d, &["synth", "--n", "20", "--out", "d.csv", "--force"]);
    assert_eq!(read(&d.join("d.csv")).lines().count(), 21);
}

#[test]
fn train_reports_parameter_counts_and_eval_matches_history() {
    let dir = fixture();
    let d = dir.path();
    assert_eq!(json(&d.join("qnn.manifest.json"))["summary"]["param_count"], 201);
    assert_eq!(json(&d.join("mlp.manifest.json"))["summary"]["param_count"], 203);
    assert_eq!(json(&d.join("qnn.json"))["param_count"], 201);

    for model in ["qnn", "mlp"] {
        let history = read(&d.join(format!("{model}.history.csv")));
        assert!(history.starts_with("epoch,train_mse,val_mse,val_r2\n"));
        let last_mse: f64 = history
            .lines()
            .last()
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        let report = format!("{model}-eval.json");
        ok(
            d,
            &[
                "eval",
                "--checkpoint",
                &format!("{model}.json"),
                "--data",
                "d.csv",
                "--split",
                "train",
                "--out",
                &report,
            ],
        );
        let mse = json(&d.join(&report))["mse"].as_f64().unwrap();
        assert!((mse - last_mse).abs() < 1e-10, "{model}: {mse} vs {last_mse}");
    }
}

#[test]
fn shot_eval_is_reproducible_and_sweep_sentinel_is_exact() {
    let dir = fixture();
    let d = dir.path();
    for out in ["a.json", "b.json"] {
        ok(
            d,
            &[
                "eval",
                "--checkpoint",
                "qnn.json",
                "--data",
                "d.csv",
                "--shots",
                "100000",
                "--seed",
                "4",
                "--out",
                out,
            ],
        );
    }
    assert_eq!(read(&d.join("a.json")), read(&d.join("b.json")));

    ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "qnn.json",
            "--data",
            "d.csv",
            "--out",
            "exact.json",
        ],
    );
    ok(
        d,
        &[
            "shot-sweep",
            "--checkpoint",
            "qnn.json",
            "--data",
            "d.csv",
            "--shots",
            "inf,1000",
            "--repeats",
            "2",
            "--out",
            "sweep.csv",
        ],
    );
    let sweep = read(&d.join("sweep.csv"));
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("n_shots,mean_r2,std_r2,repeats"));
    let inf: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(inf[0], "inf");
    let exact_r2 = json(&d.join("exact.json"))["r2"].as_f64().unwrap();
    assert_eq!(inf[1].parse::<f64>().unwrap(), exact_r2);
}

#[test]
fn eval_rejects_data_without_checkpoint_features() {
    let dir = fixture();
    let d = dir.path();
    let text = read(&d.join("d.csv"));
    let dropped: String = text
        .lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != 5)
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(d.join("narrow.csv"), dropped + "\n").unwrap();
    let out = cloudqnn(
        d,
        &[
            "eval",
            "--checkpoint",
            "qnn.json",
            "--data",
            "narrow.csv",
            "--out",
            "e.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hw"));
}

#[test]
fn shap_outputs_and_stability_report() {
    let dir = fixture();
    let d = dir.path();
    ok(
        d,
        &[
            "shap",
            "--checkpoint",
            "xu-randall",
            "--data",
            "d.csv",
            "--max-instances",
            "5",
            "--background-size",
            "20",
            "--out",
            "xr.csv",
        ],
    );
    let values = read(&d.join("xr.csv"));
    assert!(values.starts_with("instance_id,feature_name,shap_value\n"));
    // Xu-Randall never reads wind, height or latitude.
    for line in values.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if ["hw", "zg", "lat"].contains(&f[1]) {
            assert!(f[2].parse::<f64>().unwrap().abs() < 1e-8, "{line}");
        }
    }
    assert!(read(&d.join("xr.summary.csv")).starts_with("feature_name,mean_abs_shap,rank\n"));
    assert_eq!(json(&d.join("xr.manifest.json"))["job"]["background_size"], 20);

    ok(
        d,
        &[
            "shap",
            "--checkpoint",
            "qnn.json",
            "--checkpoint",
            "mlp.json",
            "--data",
            "d.csv",
            "--max-instances",
            "3",
            "--background-size",
            "10",
            "--out",
            "both.csv",
        ],
    );
    let stability = read(&d.join("both.stability.csv"));
    assert!(stability.starts_with("feature_name,mean_importance,std_importance,variance_importance\n"));
    assert_eq!(stability.lines().count(), 9);
    assert!(read(&d.join("both.summary.csv")).starts_with("model_id,feature_name,mean_abs_shap,rank\n"));
}

#[test]
fn shap_defaults_to_hundred_background_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "200", "--out", "d.csv"]);
    ok(
        d,
        &[
            "shap",
            "--checkpoint",
            "xu-randall",
            "--data",
            "d.csv",
            "--max-instances",
            "2",
            "--out",
            "s.csv",
        ],
    );
    let m = json(&d.join("s.manifest.json"));
    assert_eq!(m["job"]["background_size"], 100);
    assert_eq!(m["summary"]["background_rows"], 100);
}

#[test]
fn compare_has_three_rows() {
    let dir = fixture();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "compare", "--qnn", "qnn.json", "--mlp", "mlp.json", "--data", "d.csv", "--out", "cmp.csv",
        ],
    );
    let table = read(&d.join("cmp.csv"));
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["qnn", "mlp", "xu_randall"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let bad = cloudqnn(
        d,
        &[
            "compare", "--qnn", "mlp.json", "--mlp", "qnn.json", "--data", "d.csv", "--out", "c2.csv",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["replay", "qnn.manifest.json", "--out", "again.json"]);
    assert_eq!(read(&d.join("again.json")), read(&d.join("qnn.json")));
    assert_eq!(read(&d.join("again.history.csv")), read(&d.join("qnn.history.csv")));
    assert_eq!(
        json(&d.join("again.manifest.json"))["replayed_from"],
        "qnn.manifest.json"
    );
}

#[test]
fn experiment_document_configures_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "200", "--out", "d.csv"]);
    std::fs::write(
        d.join("exp.toml"),
        "epochs = 2\nbatches_per_epoch = 2\nbatch_size = 8\noptimizer = \"adam\"\nseed = 5\n\
         [model]\nkind = \"qnn\"\nn_enc = 2\nn_var = 1\n[data]\nfeatures = \"reduced\"\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "train", "--data", "d.csv", "--config", "exp.toml", "--epochs", "3", "--out", "m.json",
        ],
    );
    let m = json(&d.join("m.manifest.json"));
    assert_eq!(m["job"]["train"]["epochs"], 3);
    assert_eq!(m["job"]["train"]["seed"], 5);
    assert_eq!(m["job"]["model"]["n_enc"], 2);
    // 6 qubits, 2 V blocks of 15, 1 W block of 21, 6 weights and a bias.
    assert_eq!(m["summary"]["param_count"], 2 * 15 + 21 + 7);

    std::fs::write(d.join("bad.toml"), "epoch = 2\n").unwrap();
    let out = cloudqnn(
        d,
        &[
            "train", "--data", "d.csv", "--config", "bad.toml", "--model", "mlp", "--out", "x.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "200", "--out", "d.csv"]);
    let out = cloudqnn(
        d,
        &[
            "train",
            "--data",
            "d.csv",
            "--model",
            "mlp",
            "--optimizer",
            "plain_gd",
            "--lr",
            "1e12",
            "--epochs",
            "5",
            "--batches-per-epoch",
            "20",
            "--batch-size",
            "10",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite loss at epoch"));
}

#[test]
fn clamp_and_xu_randall_constants_are_recorded() {
    let dir = fixture();
    let d = dir.path();
    ok(
        d,
        &[
            "eval", "--checkpoint", "mlp.json", "--data", "d.csv", "--clamp", "--out", "clamped.json",
        ],
    );
    ok(d, &["eval", "--checkpoint", "mlp.json", "--data", "d.csv", "--out", "raw.json"]);
    let (clamped, raw) = (json(&d.join("clamped.json")), json(&d.join("raw.json")));
    assert_eq!(clamped["clamp"], true);
    assert!(clamped["mse"].as_f64().unwrap() <= raw["mse"].as_f64().unwrap());

    ok(
        d,
        &[
            "synth", "--n", "50", "--seed", "7", "--xr-p", "0.5", "--xr-alpha0", "50", "--out", "alt.csv",
        ],
    );
    let manifest = json(&d.join("alt.manifest.json"));
    assert_eq!(manifest["job"]["xu_randall"]["p"], 0.5);
    assert_eq!(manifest["job"]["xu_randall"]["alpha0"], 50.0);
    ok(d, &["synth", "--n", "50", "--seed", "7", "--out", "base.csv"]);
    assert_ne!(read(&d.join("alt.csv")), read(&d.join("base.csv")));

    let bad = cloudqnn(d, &["synth", "--n", "5", "--xr-gamma", "-1", "--out", "x.csv"]);
    assert_eq!(bad.status.code(), Some(1));
}
