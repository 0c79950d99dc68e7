use std::path::Path;
use std::process::{Command, Output};

use thermoface::gallery::Gallery;

fn thermoface(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoface"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Small dataset plus a quickly trained 16×16 model in `dir`.
fn small_run(dir: &Path, epochs: &str) {
    let o = thermoface(
        dir,
        &["synth", "--out_dir", "data", "--n_identities", "4", "--frames_per_identity", "4", "--image_size", "32"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = thermoface(
        dir,
        &[
            "train", "--manifest", "data/manifest.csv", "--out_dir", "run", "--epochs", epochs, "--input_size", "16",
            "--conv_blocks", "4:3:2", "--embedding_dim", "8", "--train_fraction", "0.5",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_writes_one_file_per_frame_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermoface(dir.path(), &["synth", "--out_dir", "data"]);
    assert_eq!(code(&o), 0);
    let frames = std::fs::read_dir(dir.path().join("data"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(frames, 480);
    let manifest = std::fs::read_to_string(dir.path().join("data/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 481);
    assert!(stdout(&o).contains("wrote 480 frames of 12 subjects"));
}

#[test]
fn synth_rejects_zero_identities() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermoface(dir.path(), &["synth", "--out_dir", "data", "--n_identities", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_keys_and_bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermoface(dir.path(), &["synth", "--out_dir", "data", "--epochs", "3"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `epochs`"));
}

#[test]
fn train_defaults_to_300_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    thermoface(d, &["synth", "--out_dir", "data", "--n_identities", "3", "--frames_per_identity", "2", "--image_size", "16"]);
    let o = thermoface(
        d,
        &[
            "train", "--manifest", "data/manifest.csv", "--out_dir", "run", "--input_size", "16", "--conv_blocks",
            "2:3:2", "--embedding_dim", "4", "--train_fraction", "0.67", "--augment",
            "false", "--pairs_per_epoch", "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("epochs = 300"));
    let history = std::fs::read_to_string(d.join("run/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 301);
}

#[test]
fn train_without_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermoface(dir.path(), &["train", "--manifest", "missing.csv", "--out_dir", "run"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn bad_frames_report_their_manifest_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let good = "30,31,32,33,34,35,36,37\n".repeat(8);
    for name in ["a.csv", "b.csv", "e.csv"] {
        std::fs::write(d.join(name), &good).unwrap();
    }
    std::fs::write(d.join("c.csv"), good.replacen("33", "NaN", 1)).unwrap();
    std::fs::write(d.join("m.csv"), "path,subject_id,session_id\na.csv,A,s\nb.csv,A,s\nc.csv,B,s\ne.csv,B,s\n").unwrap();
    let o = thermoface(d, &["train", "--manifest", "m.csv", "--out_dir", "run"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("manifest row 3"), "{err}");
}

#[test]
fn eval_echoes_tau_and_infinite_tau_accepts_all() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "1");
    let o = thermoface(d, &["eval", "--model", "run/model.tvm", "--manifest", "run/test_manifest.csv", "--n_pairs", "10", "--tau", "inf"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("tau = inf"), "{out}");
    assert!(out.contains("recall     1.0000"), "{out}");
    assert!(d.join("run/eval_report.csv").exists());
}

#[test]
fn echoed_configuration_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "2");
    let first = stdout(&thermoface(d, &["eval", "--model", "run/model.tvm", "--manifest", "run/test_manifest.csv", "--n_pairs", "12", "--seed", "5"]));
    let echoed: String = first
        .lines()
        .skip_while(|l| !l.starts_with("# effective"))
        .take_while(|l| !l.starts_with("# end"))
        .map(|l| format!("{l}\n"))
        .collect();
    let before = std::fs::read(d.join("run/eval_report.csv")).unwrap();
    std::fs::write(d.join("echo.cfg"), echoed).unwrap();
    let second = stdout(&thermoface(d, &["eval", "--config", "echo.cfg"]));
    assert_eq!(first, second);
    assert_eq!(before, std::fs::read(d.join("run/eval_report.csv")).unwrap());
}

const COMPLIANT: &str = "width = 640\nheight = 512\nnetd_mk = 25\nband_low_um = 8\nband_high_um = 14\nframe_rate_hz = 30\n";

#[test]
fn camera_validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ok.cfg"), COMPLIANT).unwrap();
    let o = thermoface(d, &["validate-camera", "ok.cfg"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("WARN netd"));

    let o = thermoface(d, &["validate-camera", "ok.cfg", "--frame_rate_hz", "9"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL frame_rate"));
    assert!(stdout(&o).contains("9 Hz or less"));

    std::fs::write(d.join("bad.cfg"), "width 640\n").unwrap();
    let o = thermoface(d, &["validate-camera", "bad.cfg"]);
    assert_ne!(code(&o), 0);
    assert_ne!(code(&o), 1);
}

#[test]
fn enroll_verify_identify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d, "1");
    let base = ["--gallery", "g.tvg", "--model", "run/model.tvm"];
    let with = |extra: &[&str]| -> Vec<String> { base.iter().chain(extra).map(|s| s.to_string()).collect() };

    let args = with(&["--subject", "id001", "--probes", "data/id001_000.pgm,data/id001_001.pgm"]);
    let o = thermoface(d, &[&["enroll"][..], &args.iter().map(String::as_str).collect::<Vec<_>>()].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("enrolled 2 probes for id001"));

    let run = |cmd: &str, extra: &[&str]| {
        let args = with(extra);
        thermoface(d, &[&[cmd][..], &args.iter().map(String::as_str).collect::<Vec<_>>()].concat())
    };
    let o = run("verify", &["--subject", "id001", "--probe", "data/id001_000.pgm", "--tau", "0"]);
    assert_eq!(stdout(&o).lines().last(), Some("ACCEPT 0.000000"));
    let o = run("identify", &["--probe", "data/id001_001.pgm", "--tau", "0.5"]);
    assert_eq!(stdout(&o).lines().last(), Some("id001 0.000000"));
    let o = run("identify", &["--probe", "data/id000_000.pgm", "--tau", "-1"]);
    assert!(stdout(&o).lines().last().unwrap().starts_with("UNKNOWN "));
    let o = run("verify", &["--subject", "id999", "--probe", "data/id001_000.pgm", "--tau", "1"]);
    assert_eq!(code(&o), 8);

    // A gallery built by a different model is refused.
    let o = thermoface(
        d,
        &[
            "train", "--manifest", "data/manifest.csv", "--out_dir", "other", "--epochs", "0", "--input_size", "16",
            "--conv_blocks", "4:3:2", "--embedding_dim", "8", "--train_fraction", "0.5", "--seed", "3",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = thermoface(d, &["identify", "--gallery", "g.tvg", "--model", "other/model.tvm", "--probe", "data/id001_000.pgm", "--tau", "1"]);
    assert_eq!(code(&o), 6);

    Gallery::new().save(d.join("empty.tvg")).unwrap();
    let o = thermoface(d, &["identify", "--gallery", "empty.tvg", "--model", "run/model.tvm", "--probe", "data/id001_000.pgm", "--tau", "1"]);
    assert_eq!(code(&o), 8);
}
