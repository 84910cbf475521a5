use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "side=12\nangles=5\ndetectors=12\ntrain_count=12\ntest_count=6\nvalidation_count=3\n\
epochs=1\nhidden=3\nalphas=0.01,0.003\ndeltas=0.02\nrate_deltas=1e-2,1e-3,1e-4,1e-5\n";

fn regnets(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regnets")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = regnets(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    for cmd in ["assemble", "phantoms", "train"] {
        ok(dir.path(), &["--config", "small.cfg", cmd]);
    }
    dir
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("run").join(name)).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| regnets(dir.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["--alpha", "x,1", "checkfilter"]), Some(1));
    assert_eq!(code(&["--alpha", "-1", "checkfilter"]), Some(1));
    assert_eq!(code(&["--config", "missing.cfg", "assemble"]), Some(3));
    assert_eq!(code(&["train"]), Some(3));
    std::fs::write(dir.path().join("bad.cfg"), "filter=wavelet\n").unwrap();
    assert_eq!(code(&["--config", "bad.cfg", "checkfilter"]), Some(1));
    std::fs::create_dir(dir.path().join("run")).unwrap();
    std::fs::write(dir.path().join("run/operator.rgn1"), b"RGN1garbage").unwrap();
    assert_eq!(code(&["train"]), Some(3));
}

#[test]
fn checkfilter_reports_every_filter() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["tikhonov", "tsvd", "landweber"] {
        std::fs::write(dir.path().join("f.cfg"), format!("filter={f}\nmu=1\n")).unwrap();
        ok(dir.path(), &["--config", "f.cfg", "checkfilter"]);
        assert!(read(dir.path(), &format!("checkfilter_{f}.txt")).contains("passed=true"));
    }
    // Tikhonov saturates at mu = 1
    std::fs::write(dir.path().join("f.cfg"), "filter=tikhonov\nmu=2\n").unwrap();
    assert_eq!(regnets(dir.path(), &["--config", "f.cfg", "rates"]).status.code(), Some(1));
}

#[test]
fn pipeline_outputs_carry_provenance() {
    let run = small_run();
    let dir = run.path();
    ok(dir, &["--config", "small.cfg", "evaluate"]);
    let summary = ok(dir, &["--config", "small.cfg", "reconstruct"]);
    assert_eq!(summary.lines().count(), 3);
    ok(dir, &["--config", "small.cfg", "distfn"]);
    let rates = ok(dir, &["--config", "small.cfg", "rates"]);
    assert!(rates.starts_with("slope="));

    let hash = read(dir, "evaluate_summary.txt").lines().next().unwrap().to_string();
    assert!(hash.starts_with("config_hash=") && hash.len() == "config_hash=".len() + 64);
    let hash = &hash["config_hash=".len()..];
    for name in [
        "eval_tsvd_delta0.02.csv",
        "eval_continued_delta0.02.csv",
        "manifest_nullspace.txt",
        "train_continued.log",
        "rates_tsvd_mu0.5.csv",
        "distfn_continued.txt",
        "recon/summary.txt",
    ] {
        let text = read(dir, name);
        assert!(text.contains(hash), "{name} lacks the config hash");
        assert!(text.contains("seed=1"), "{name} lacks the seed");
    }
    let csv = read(dir, "eval_nullspace_delta0.02.csv");
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "alpha,kept,mse,mae");
    assert_eq!(rows.len(), 3);
    let pgm = std::fs::read(dir.join("run/recon/delta0.02_continued.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    assert!(String::from_utf8_lossy(&pgm).contains(hash));
}

#[test]
fn seed_and_alpha_flags_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    ok(dir.path(), &["--config", "small.cfg", "phantoms"]);
    let a = std::fs::read(dir.path().join("run/train_phantoms.rgn1")).unwrap();
    ok(dir.path(), &["--config", "small.cfg", "--seed", "2", "phantoms"]);
    let b = std::fs::read(dir.path().join("run/train_phantoms.rgn1")).unwrap();
    assert_ne!(a, b);
    ok(dir.path(), &["--config", "small.cfg", "phantoms"]);
    assert_eq!(a, std::fs::read(dir.path().join("run/train_phantoms.rgn1")).unwrap());

    ok(dir.path(), &["--config", "small.cfg", "assemble"]);
    ok(dir.path(), &["--config", "small.cfg", "--alpha", "0.02,0.005,0.001", "train"]);
    assert_eq!(read(dir.path(), "manifest_continued.txt").lines().filter(|l| l.starts_with("alpha=")).count(), 3);
}

#[test]
fn delta_flag_targets_the_command() {
    let run = small_run();
    let dir = run.path();
    ok(dir, &["--config", "small.cfg", "--delta", "0.1", "evaluate"]);
    assert!(dir.join("run/eval_tsvd_delta0.1.csv").exists());
    ok(dir, &["--config", "small.cfg", "--delta", "1e-2,1e-3,1e-4,1e-5,1e-6", "rates"]);
    let rows = read(dir, "rates_tsvd_mu0.5.csv").lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 6);
    // the rate fit needs three noise levels
    assert_eq!(regnets(dir, &["--config", "small.cfg", "--delta", "1e-2,1e-3", "rates"]).status.code(), Some(2));
}
