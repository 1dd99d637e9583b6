use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, iterations: u64, seed: u64) -> String {
    let cfg = serde_json::json!({
        "schedule": {"kind": "d", "steps": 4, "shape": {"height": 1, "width": 1, "channels": 2}},
        "algorithm": "relaxed",
        "iterations": iterations,
        "batch_size": 64,
        "seed": seed,
        "log_every": 5,
        "eval_samples": 50,
        "dataset": {"kind": "gmm8", "size": 512, "seed": 3}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn schedule_dump_for_denoising() {
    let out = rgm(&["schedule", "--kind", "d", "--steps", "4"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 5);
    let sigma4 = steps[4]["sigma_k"].as_f64().unwrap();
    assert!((sigma4 - 0.99996).abs() < 1e-4, "sigma_4 = {sigma4}");
    assert_eq!(v["fully_decomposable"], Value::Bool(true));
}

#[test]
fn schedule_dump_for_super_resolution() {
    let out = rgm(&["schedule", "--kind", "sr", "--steps", "7", "--shape", "16x16x1"]);
    assert!(out.status.success());
    let var = stdout_json(&out)["latent_variance"].as_f64().unwrap();
    assert!((var - 4.0).abs() < 4e-3, "latent variance {var}");
}

#[test]
fn schedule_rejects_indivisible_shape() {
    let out = rgm(&["schedule", "--kind", "sr", "--steps", "7", "--shape", "15x15x1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(rgm(&["schedule", "--bogus"]).status.code(), Some(2));
    assert_eq!(rgm(&["schedule", "--kind", "x", "--steps", "2"]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgm(&[
        "train",
        "--config",
        dir.path().join("nope.json").to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"algorithm\": \"relaxed\"}").unwrap();
    let out = rgm(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn untrained_pipeline_writes_artifacts_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0, 4);
    let run = dir.path().join("run");
    let out = rgm(&["train", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["checkpoint.json", "run.json", "metrics.csv", "config.json"] {
        assert!(run.join(name).exists(), "{name} missing");
        let meta: Value =
            serde_json::from_str(&std::fs::read_to_string(run.join(format!("{name}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["seed"], 4);
        assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    }

    let samples = dir.path().join("samples.csv");
    let ckpt = run.join("checkpoint.json");
    let out = rgm(&[
        "sample",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--n",
        "200",
        "--out",
        samples.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&samples).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert!(dir.path().join("samples.csv.meta.json").exists());

    let out = rgm(&["eval", "--samples", samples.to_str().unwrap(), "--reference", samples.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["energy_distance"].as_f64().unwrap(), 0.0);

    let out = rgm(&["eval", "--samples", samples.to_str().unwrap(), "--reference-n", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["n_reference"], 500);
    assert!(report["energy_distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_without_reference_needs_2d_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("rows.csv");
    std::fs::write(&samples, "x0,x1,x2\n0.1,0.2,0.3\n").unwrap();
    let out = rgm(&["eval", "--samples", samples.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_override_and_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 10, 1);
    let mut metrics = Vec::new();
    for name in ["a", "b"] {
        let run = dir.path().join(name);
        let out = rgm(&["train", "--config", &cfg, "--out", run.to_str().unwrap(), "--seed", "9"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        metrics.push(std::fs::read(run.join("metrics.csv")).unwrap());
        let resolved: Value = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
        assert_eq!(resolved["seed"], 9);
        let ckpt = run.join("checkpoint.json");
        let out = rgm(&["sample", "--ckpt", ckpt.to_str().unwrap(), "--n", "20", "--seed", "2", "--out", run.join("s.csv").to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(metrics[0], metrics[1]);
    assert_eq!(
        std::fs::read(dir.path().join("a/s.csv")).unwrap(),
        std::fs::read(dir.path().join("b/s.csv")).unwrap()
    );
}

#[test]
fn sampling_a_missing_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgm(&[
        "sample",
        "--ckpt",
        dir.path().join("none.json").to_str().unwrap(),
        "--out",
        dir.path().join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn corrupt_checkpoint_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt.json");
    std::fs::write(&ckpt, "{\"version\": 99}").unwrap();
    let out = rgm(&["sample", "--ckpt", ckpt.to_str().unwrap(), "--out", dir.path().join("s.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invert_on_toy_images_writes_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "schedule": {"kind": "d", "steps": 4, "shape": {"height": 8, "width": 8, "channels": 1}},
        "algorithm": "relaxed",
        "iterations": 0,
        "batch_size": 16,
        "eval_samples": 0,
        "dataset": {"kind": "toy", "size": 8, "channels": 1, "family": "blobs", "seed": 0, "count": 32}
    });
    let cfg_path = dir.path().join("img.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let run = dir.path().join("run");
    let out = rgm(&["train", "--config", cfg_path.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inv = dir.path().join("inv");
    let out = rgm(&[
        "invert",
        "--ckpt",
        run.join("checkpoint.json").to_str().unwrap(),
        "--task",
        "sr",
        "--factor",
        "2",
        "--n",
        "4",
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(inv.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("method,psnr,ssim"));
    assert_eq!(metrics.lines().count(), 3);
    for name in ["truth.json", "observation.json", "baseline.json", "estimate.json"] {
        assert!(inv.join(name).exists());
    }
    let out = rgm(&[
        "invert",
        "--ckpt",
        run.join("checkpoint.json").to_str().unwrap(),
        "--task",
        "color",
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "grayscale checkpoint cannot be colorized");
}
