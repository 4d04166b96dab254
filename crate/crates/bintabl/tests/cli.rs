//! End-to-end checks of the command-line surface.

use std::path::PathBuf;
use std::process::{Command, Output};

use bintabl::data::fi2010::{load_dataset, written_layout, LabelConvention};
use bintabl::data::synthetic::{generate_synthetic, SynthConfig};
use bintabl::data::{make_windows, WINDOW_LEN};

fn bintabl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bintabl"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("bintabl-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY_SYNTH: &str = "regimes=3,events=120,seed=5";

#[test]
fn paramcount_reports_published_sizes() {
    let out = bintabl(&["paramcount", "--arch", "b"]);
    assert!(out.status.success());
    let count: i64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((count - 5843).abs() <= 1, "{count}");

    let out = bintabl(&["paramcount", "--arch", "c", "--norm", "bin"]);
    let with_bin: i64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let out = bintabl(&["paramcount", "--arch", "c"]);
    let plain: i64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(with_bin - plain, 102);
}

#[test]
fn gradcheck_subcommand_passes_for_bin() {
    let out = bintabl(&["gradcheck", "--layer", "bin", "--tol", "1e-5"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("gradcheck: PASS"), "{stdout}");
    assert!(stdout.contains("[PASS]"));
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn train_is_byte_deterministic_across_executions() {
    let run = || {
        let out = bintabl(&[
            "train",
            "--arch",
            "b",
            "--norm",
            "bin",
            "--horizon",
            "10",
            "--synthetic",
            TINY_SYNTH,
            "--runs",
            "5",
            "--epochs",
            "3",
            "--batch-size",
            "64",
            "--seed",
            "123",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let first = run();
    let second = run();
    assert!(!first.is_empty());
    assert_eq!(first, second, "stdout must be byte-identical");
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("report bintabl.eval.v1"));
    assert!(text.contains("median.f1"));
}

#[test]
fn checkpoint_then_eval_round_trip() {
    let dir = temp_dir("ckpt-eval");
    let ckpt = dir.join("model.json");
    let out = bintabl(&[
        "train",
        "--arch",
        "b",
        "--norm",
        "bin",
        "--synthetic",
        TINY_SYNTH,
        "--runs",
        "2",
        "--epochs",
        "2",
        "--batch-size",
        "64",
        "--seed",
        "9",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(ckpt.is_file());

    let out = bintabl(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--synthetic",
        TINY_SYNTH,
        "--test-split-only",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("report bintabl.eval.v1"), "{text}");
    assert!(text.contains("runs 1"));
}

#[test]
fn synth_day_files_round_trip_bit_exactly() {
    let dir = temp_dir("synth-roundtrip");
    let cfg_text = "regimes=2,events=160,seed=11";
    let out = bintabl(&["synth", "--out", dir.to_str().unwrap(), "--cfg", cfg_text]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // The synth command always writes the standard five label tracks.
    let cfg = SynthConfig {
        regimes: 2,
        events_per_regime: 160,
        seed: 11,
        horizons: vec![10, 20, 30, 50, 100],
        ..SynthConfig::default()
    };
    let direct_days = generate_synthetic(&cfg).unwrap();
    let layout = written_layout(&cfg.horizons, LabelConvention::ZeroBased);
    let loaded_days = load_dataset(&dir, &layout).unwrap();
    assert_eq!(loaded_days.len(), 2);

    for horizon in [10, 20, 50] {
        let direct = make_windows(&direct_days, WINDOW_LEN, horizon).unwrap();
        let loaded = make_windows(&loaded_days, WINDOW_LEN, horizon).unwrap();
        assert_eq!(direct.labels, loaded.labels);
        assert_eq!(direct.samples.len(), loaded.samples.len());
        for (a, b) in direct.samples.iter().zip(&loaded.samples) {
            assert_eq!(a, b, "windows must round-trip bit-exactly");
        }
    }
}

#[test]
fn exit_codes_carry_the_error_category() {
    // Config error: splitting 3 synthetic days with train_days 3.
    let out = bintabl(&[
        "train",
        "--arch",
        "b",
        "--synthetic",
        TINY_SYNTH,
        "--train-days",
        "3",
        "--runs",
        "1",
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "config errors exit 2");

    // Data error: dataset path does not exist.
    let out = bintabl(&[
        "train",
        "--arch",
        "b",
        "--data",
        "/nonexistent/lob.txt",
        "--runs",
        "1",
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "data errors exit 3");

    // Config error: the literal eq-(6c) divisor needs square inputs and
    // the 40x10 topology cannot provide them.
    let out = bintabl(&[
        "train",
        "--arch",
        "b",
        "--norm",
        "bin",
        "--bin-eq6c-literal",
        "--synthetic",
        TINY_SYNTH,
        "--runs",
        "1",
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("square"), "{err}");
}

#[test]
fn env_var_supplies_default_data_directory() {
    let dir = temp_dir("env-data");
    let out = bintabl(&["synth", "--out", dir.to_str().unwrap(), "--cfg", TINY_SYNTH]);
    assert!(out.status.success());

    let out = Command::new(env!("CARGO_BIN_EXE_bintabl"))
        .args([
            "train",
            "--arch",
            "b",
            "--norm",
            "none",
            "--label-convention",
            "zero",
            "--train-days",
            "2",
            "--runs",
            "1",
            "--epochs",
            "1",
            "--batch-size",
            "64",
        ])
        .env("BINTABL_DATA_DIR", &dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
