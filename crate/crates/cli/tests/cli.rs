use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qdenoise::experiments::Dataset;

const SMALL: &[&str] = &[
    "--set",
    "data.count=300",
    "--set",
    "data.test_count=50",
    "--set",
    "train.epochs=2",
    "--set",
    "train.eval_every=1",
    "--set",
    "music.trials=4",
    "--set",
    "music.grid_step=0.1",
    "--set",
    "music.snr_db=[30.0]",
];

fn qdenoise(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdenoise"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = qdenoise(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL.iter().copied()).collect()
}

#[test]
fn generate_honors_count_override() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["generate", "--config", "base", "--set", "data.count=100", "--out", "o"]);
    let d = Dataset::read(dir.path().join("o/train.qdst")).unwrap();
    assert_eq!(d.len(), 100);
    assert_eq!(Dataset::read(dir.path().join("o/test.qdst")).unwrap().len(), 1000);
}

#[test]
fn train_then_eval_doa_has_recon_series() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &with_small(&["train", "--out", "o"]));
    assert!(dir.path().join("o/model.qdnn").is_file());
    let curve = fs::read_to_string(dir.path().join("o/train_curve.csv")).unwrap();
    assert!(curve.contains("\ntrain-loss,1,"));
    assert!(curve.contains("\ntest-loss,2,"));
    run_ok(dir.path(), &with_small(&["eval-doa", "--checkpoint", "o/model.qdnn", "--out", "o"]));
    let csv = fs::read_to_string(dir.path().join("o/doa_mse.csv")).unwrap();
    for series in ["recon-1bit", "raw-1bit", "raw-4bit", "unquantized"] {
        assert!(csv.contains(&format!("\n{series},30,")), "{series} missing:\n{csv}");
    }
}

#[test]
fn invalid_widths_exit_one_naming_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let out = qdenoise(dir.path(), &["train", "--set", "network.widths=[10,128,128,128,16]"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("network.widths[0] must equal 2M"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["train", "--set", "train.nonsense=3"],
        &["train", "--set", "no_equals_sign"],
        &["train", "--config", "missing.toml"],
        &["frobnicate"],
        &["eval-recon"],
        &["train", "--threads", "0"],
    ];
    for args in cases {
        assert_eq!(qdenoise(dir.path(), args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = qdenoise(dir.path(), &["compress", "--checkpoint", "nope.qdnn", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    fs::create_dir(dir.path().join("bad")).unwrap();
    fs::write(dir.path().join("bad/model.qdnn"), b"QDNNgarbage").unwrap();
    let out = qdenoise(dir.path(), &["eval-doa", "--checkpoint", "bad/model.qdnn", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_per_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["generate", "train", "eval-recon", "eval-doa", "spectrum", "compress", "bench", "ablate"] {
        let out = qdenoise(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--set"));
    }
}

#[test]
fn config_file_and_seed_recorded() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "seed = 5\n[music]\ntrials = 3\ngrid_step = 0.2\n[noise]\nsnr_db = [40.0]\n",
    )
    .unwrap();
    run_ok(dir.path(), &["eval-doa", "--config", "s.toml", "--out", "a"]);
    let a = fs::read_to_string(dir.path().join("a/doa_mse.csv")).unwrap();
    assert!(a.contains("# seed=5\n"));
    assert!(a.contains("# config_hash="));
    assert!(!a.contains("recon-1bit"));
    run_ok(dir.path(), &["eval-doa", "--config", "s.toml", "--seed", "9", "--out", "b"]);
    let b = fs::read_to_string(dir.path().join("b/doa_mse.csv")).unwrap();
    assert!(b.contains("# seed=9\n"));
}

#[test]
fn writes_stay_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &with_small(&["train", "--out", "nested/o"]));
    run_ok(dir.path(), &with_small(&["spectrum", "--checkpoint", "nested/o/model.qdnn", "--out", "nested/o"]));
    let top: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(top, vec!["nested"]);
    let mut files: Vec<String> = fs::read_dir(dir.path().join("nested/o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["model.qdnn", "spectrum.csv", "train_curve.csv"]);
}
