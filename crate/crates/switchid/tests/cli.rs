//! Shell-level tests of the `switchid` binary: the full
//! simulate -> identify -> evaluate -> predict pipeline, exit codes,
//! reproducibility, and output-directory resolution.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_switchid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to launch the binary")
}

fn assert_exit(out: &Output, want: i32, what: &str) {
    let code = out.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        want,
        "{what}: expected exit {want}, got {code}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("invalid JSON in {}: {e}", path.display()))
}

#[test]
fn pipeline_simulate_identify_evaluate_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let data = format!("{d}/dataset.csv");
    let model = format!("{d}/model.json");

    // Simulate a short benchmark trajectory.
    let out = run(&[
        "simulate", "--t", "250", "--noise", "1e-2", "--seed", "5", "--out", &data,
    ]);
    assert_exit(&out, 0, "simulate");
    assert!(Path::new(&data).exists(), "dataset.csv missing");
    let meta = read_json(&dir.path().join("dataset.meta.json"));
    assert_eq!(meta["t"], 250);
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["has_modes"], true);

    // Fit two modes with a tiny iteration budget.
    let out = run(&[
        "identify", "--data", &data, "--k", "2", "--iters", "2", "--seed", "0",
        "--out-dir", d,
    ]);
    assert_exit(&out, 0, "identify");
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["k"], 2);
    assert_eq!(report["restarts"], 1);
    let iters = report["report"]["iterations"].as_array().unwrap();
    assert!(!iters.is_empty() && iters.len() <= 2, "unexpected iteration count");
    assert!(Path::new(&model).exists(), "model.json missing");
    assert!(dir.path().join("modes.csv").exists(), "modes.csv missing");

    // Score the fit on its own training data, including a rollout.
    let eval_dir = dir.path().join("eval");
    let out = run(&[
        "evaluate", "--model", &model, "--data", &data, "--rollout",
        "--out-dir", eval_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "evaluate");
    let report = read_json(&eval_dir.join("report.json"));
    assert!(report["one_step"]["mse"].as_f64().unwrap() >= 0.0);
    assert!(report["rollout"]["mse"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["one_step"]["t"], 250);
    for f in ["overlay.csv", "error.csv", "modes.csv"] {
        assert!(eval_dir.join(f).exists(), "{f} missing after evaluate");
    }

    // One-step predictions along the same dataset.
    let pred_dir = dir.path().join("pred");
    let out = run(&[
        "predict", "--model", &model, "--data", &data,
        "--out-dir", pred_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "predict");
    let lines = std::fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    assert_eq!(lines.lines().count(), 251, "predictions.csv: header plus one row per step");
    assert!(lines.lines().next().unwrap().starts_with("t,"));

    // Batch prediction on freshly simulated trajectories.
    let batch_dir = dir.path().join("batch");
    let out = run(&[
        "predict", "--model", &model, "--batch", "2", "--benchmark", "two-mode",
        "--t", "120", "--noise", "1e-2", "--seed", "9",
        "--out-dir", batch_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "predict --batch");
    assert!(batch_dir.join("pred_000.csv").exists());
    assert!(batch_dir.join("pred_001.csv").exists());
    let summary = read_json(&batch_dir.join("predict_summary.json"));
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert!(summary["median_mse"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sweep_writes_per_level_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "sweep", "--noise", "1e-2", "--t", "120", "--eval-t", "80",
        "--trajectories", "2", "--iters", "2", "--out-dir", d,
    ]);
    assert_exit(&out, 0, "sweep");
    let summary = read_json(&dir.path().join("sweep_summary.json"));
    let cells = summary.as_array().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0]["noise"], 1e-2);
    assert!(dir.path().join("sweep_summary.csv").exists());
    let level_dir = dir.path().join("noise_1e-2");
    assert!(level_dir.join("model.json").exists(), "per-level model missing");
    assert!(level_dir.join("report.json").exists(), "per-level report missing");
}

#[test]
fn exit_codes_distinguish_usage_io_and_validation() {
    // Usage errors: unknown flag, missing required input.
    let out = run(&["identify", "--no-such-flag"]);
    assert_exit(&out, 1, "unknown flag");
    let out = run(&["identify"]);
    assert_exit(&out, 1, "identify without a dataset");

    // Help and version are not errors.
    let out = run(&["--help"]);
    assert_exit(&out, 0, "--help");
    let out = run(&["--version"]);
    assert_exit(&out, 0, "--version");

    // I/O errors: nonexistent files.
    let out = run(&["evaluate", "--model", "/nonexistent/m.json", "--data", "/nonexistent/d.csv"]);
    assert_exit(&out, 2, "evaluate on missing files");

    // Validation errors: impossible configuration on real data.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = run(&[
        "simulate", "--t", "60", "--seed", "1", "--out", data.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "simulate for the validation case");
    let out = run(&[
        "identify", "--data", data.to_str().unwrap(), "--k", "0",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_exit(&out, 4, "identify with zero modes");
}

#[test]
fn simulation_is_byte_reproducible_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let out = run(&[
            "simulate", "--t", "100", "--noise", "1e-3", "--seed", seed,
            "--out", path.to_str().unwrap(),
        ]);
        assert_exit(&out, 0, "simulate");
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap(), "same seed must give identical bytes");
    assert_ne!(bytes_a, std::fs::read(&c).unwrap(), "different seed must give different data");
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--t", "50", "--seed", "2"])
        .env("SWITCHID_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_exit(&out, 0, "simulate with SWITCHID_OUT_DIR");
    assert!(
        dir.path().join("dataset.csv").exists(),
        "dataset.csv not written into $SWITCHID_OUT_DIR"
    );
}

#[test]
fn config_file_provides_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let data = dir.path().join("data.csv");
    let out = run(&[
        "simulate", "--t", "80", "--seed", "6", "--out", data.to_str().unwrap(),
    ]);
    assert_exit(&out, 0, "simulate");

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("dataset = {:?}\nk = 2\niters = 1\nseed = 3\n", data)).unwrap();

    // The config supplies the dataset and defaults; --seed overrides it.
    let out = run(&[
        "identify", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out-dir", d,
    ]);
    assert_exit(&out, 0, "identify from config");
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["runs"][0]["seed"], 7, "flag must override the config seed");
    assert_eq!(
        report["report"]["iterations"].as_array().unwrap().len(),
        1,
        "config iteration budget must apply"
    );
}
