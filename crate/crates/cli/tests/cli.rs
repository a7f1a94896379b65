//! CLI behavior: flag surface, exit codes, run-directory handling, and
//! parity between CLI outputs and direct library calls.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use once_cell::sync::Lazy;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l0ward"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn l0ward");
    assert!(
        out.status.success(),
        "l0ward {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().expect("spawn l0ward").status.code().unwrap_or(-1)
}

/// Tiny corpus + target model shared by the CLI tests.
struct Base {
    _dir: TempDir,
    model: PathBuf,
    dataset: PathBuf,
    detector: PathBuf,
}

static BASE: Lazy<Base> = Lazy::new(|| {
    let dir = TempDir::new().expect("tempdir");
    let data = dir.path().join("data");
    let tgt = dir.path().join("tgt");
    let atk = dir.path().join("atk");
    let det = dir.path().join("det");
    run_ok(&[
        "synth-data", "--out", data.to_str().unwrap(),
        "--train", "700", "--test", "500", "--seed", "3",
    ]);
    run_ok(&[
        "train-target", "--data-dir", data.to_str().unwrap(),
        "--out", tgt.to_str().unwrap(),
        "--train-count", "500", "--val-count", "200", "--epochs", "2", "--seed", "42",
    ]);
    run_ok(&[
        "attack", "--data-dir", data.to_str().unwrap(),
        "--model", tgt.join("model.l0pk").to_str().unwrap(),
        "--out", atk.to_str().unwrap(),
        "--mode", "jsma", "--train-benign", "24", "--train-ae", "24",
        "--test-benign", "10", "--test-ae", "10", "--seed", "5",
    ]);
    run_ok(&[
        "train-detector", "--dataset", atk.join("dataset").to_str().unwrap(),
        "--out", det.to_str().unwrap(),
        "--epochs", "3", "--patience", "2", "--seed", "9",
    ]);
    Base {
        model: tgt.join("model.l0pk"),
        dataset: atk.join("dataset"),
        detector: det.join("detector.l0pd"),
        _dir: dir,
    }
});

#[test]
fn help_lists_every_flag_with_defaults() {
    for (cmd, flags) in [
        ("synth-data", vec!["--out", "--force", "--config", "--train", "--test", "--seed"]),
        (
            "train-target",
            vec!["--data-dir", "--out", "--train-count", "--val-count", "--epochs", "--seed"],
        ),
        (
            "attack",
            vec![
                "--mode", "--theta", "--budget", "--train-benign", "--train-ae", "--test-benign",
                "--test-ae", "--seed", "--adaptive-count", "--restarts", "--alpha", "--beta",
                "--gamma", "--elem", "--fmm-radius",
            ],
        ),
        ("inpaint", vec!["--input", "--dataset", "--split", "--sweep", "--alpha", "--beta"]),
        (
            "train-detector",
            vec!["--preprocessor", "--margin", "--epochs", "--patience", "--min-delta", "--val-fraction", "--seed"],
        ),
        ("detect", vec!["--detector", "--dataset", "--input", "--split"]),
        ("evaluate", vec!["--model", "--detector", "--dataset", "--transfer-dataset", "--weak-detector", "--sweep"]),
    ] {
        let out = run_ok(&[cmd, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help is missing {flag}");
        }
        // Parameters carry visible defaults.
        assert!(text.contains("[default:"), "{cmd} --help shows no defaults");
    }
}

#[test]
fn run_directory_requires_force_to_reuse() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("corpus");
    run_ok(&["synth-data", "--out", out.to_str().unwrap(), "--train", "10", "--test", "10"]);
    let code = exit_code(&["synth-data", "--out", out.to_str().unwrap(), "--train", "10", "--test", "10"]);
    assert_eq!(code, 3, "reuse without --force must be a config error");
    run_ok(&["synth-data", "--out", out.to_str().unwrap(), "--train", "10", "--test", "10", "--force"]);
}

#[test]
fn exit_codes_are_distinct_per_failure_class() {
    let dir = TempDir::new().unwrap();
    let scratch = |n: &str| dir.path().join(n).to_str().unwrap().to_string();

    // Missing input file -> 2.
    assert_eq!(
        exit_code(&["train-target", "--data-dir", &scratch("nope"), "--out", &scratch("a")]),
        2
    );
    // Malformed config -> 3.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(
        exit_code(&[
            "synth-data", "--out", &scratch("b"), "--config", bad.to_str().unwrap()
        ]),
        3
    );
    // Model/data shape mismatch -> 4: a 28x28 model attacked with 12x12 data.
    let tiny_data = dir.path().join("tiny");
    std::fs::create_dir_all(&tiny_data).unwrap();
    let imgs: Vec<l0ward_core::image::Image> = (0..8)
        .map(|i| l0ward_core::image::Image::constant(1, 12, 12, 0.1 * (i % 10) as f32))
        .collect();
    let ds = l0ward_core::image::LabeledDataset::new(
        imgs,
        (0..8u8).collect(),
        l0ward_core::image::Provenance::Synthetic,
    )
    .unwrap();
    l0ward_core::image::write_idx(
        &ds,
        &tiny_data.join("t10k-images-idx3-ubyte"),
        &tiny_data.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
    let code = exit_code(&[
        "attack", "--data-dir", tiny_data.to_str().unwrap(),
        "--model", BASE.model.to_str().unwrap(),
        "--out", &scratch("mismatch"),
        "--train-benign", "1", "--train-ae", "0", "--test-benign", "0", "--test-ae", "0",
    ]);
    assert_eq!(code, 4, "shape mismatch must exit 4");
}

#[test]
fn error_records_are_machine_readable_json() {
    let out = bin()
        .args(["train-target", "--data-dir", "/no/such/dir", "--out", "/tmp/l0ward-nonexistent-run"])
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).expect("stderr line is JSON");
    assert_eq!(v["error"]["code"], 2);
    assert_eq!(v["error"]["kind"], "missing-input");
}

#[test]
fn config_snapshot_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "synth-data", "--out", out.to_str().unwrap(),
        "--train", "30", "--test", "20", "--seed", "77",
    ]);
    let snapshot = std::fs::read_to_string(out.join("config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&snapshot).unwrap();
    assert_eq!(v["train"], 30);
    assert_eq!(v["test"], 20);
    assert_eq!(v["seed"], 77);

    // Replaying from the snapshot reproduces the corpus bytes.
    let replay = dir.path().join("replay");
    let cfg = out.join("config.json");
    run_ok(&[
        "synth-data", "--out", replay.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
    ]);
    for name in ["train-images-idx3-ubyte", "t10k-images-idx3-ubyte"] {
        assert_eq!(
            std::fs::read(out.join(name)).unwrap(),
            std::fs::read(replay.join(name)).unwrap(),
            "{name} differs under config replay"
        );
    }
}

#[test]
fn inpaint_changes_only_masked_positions() {
    // Synthetic sparse-attack fixture: mid-tone field with extreme pixels.
    let dir = TempDir::new().unwrap();
    let mut img = l0ward_core::image::Image::constant(1, 16, 16, 0.45);
    for (i, &(y, x)) in [(2usize, 3usize), (7, 12), (11, 5), (13, 13)].iter().enumerate() {
        img.set(0, y, x, if i % 2 == 0 { 1.0 } else { 0.0 });
    }
    let input = dir.path().join("ae.pgm");
    l0ward_core::image::save_pnm(&img, &input).unwrap();

    let run = dir.path().join("run");
    run_ok(&[
        "inpaint", "--input", input.to_str().unwrap(),
        "--out", run.to_str().unwrap(),
    ]);
    let processed = l0ward_core::image::load_pnm(&run.join("processed.pgm")).unwrap();
    let mask = l0ward_core::image::load_pnm(&run.join("mask_c0.pgm")).unwrap();
    let original = l0ward_core::image::load_pnm(&input).unwrap();
    let mut masked = 0;
    for i in 0..original.pixels() {
        if mask.data()[i] > 0.5 {
            masked += 1;
        } else {
            assert_eq!(
                original.data()[i], processed.data()[i],
                "unmasked pixel {i} changed"
            );
        }
    }
    assert_eq!(masked, 4, "exactly the four extreme pixels are masked");
}

#[test]
fn detect_csv_matches_library_results() {
    let base = &*BASE;
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("detect");
    run_ok(&[
        "detect", "--detector", base.detector.to_str().unwrap(),
        "--dataset", base.dataset.to_str().unwrap(),
        "--out", run.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(run.join("verdicts.csv")).unwrap();

    // The same config through the library must reproduce the CLI output.
    let mut f = std::fs::File::open(&base.detector).unwrap();
    let model = l0ward_core::detector::load_detector(&mut f).unwrap();
    let pp = *model.preprocessor();
    let items = load_items_like_cli(&base.dataset, "test");
    let (rows, _) = l0ward_core::harness::detection_run(&model, &pp, &items).unwrap();
    let mut expected = String::from("id,distance,verdict,label\n");
    for r in &rows {
        expected.push_str(&format!(
            "{},{:.6},{},{}\n",
            r.id,
            r.distance,
            u8::from(r.verdict),
            u8::from(r.label)
        ));
    }
    assert_eq!(csv, expected, "CLI and library disagree");
}

/// Mirrors the CLI's dataset loader for the parity check.
fn load_items_like_cli(dir: &Path, split: &str) -> Vec<l0ward_core::harness::AeItem> {
    let listing = std::fs::read_to_string(dir.join(format!("items_{split}.jsonl"))).unwrap();
    listing
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            l0ward_core::harness::AeItem {
                image: l0ward_core::image::load_pnm(&dir.join(v["path"].as_str().unwrap())).unwrap(),
                adversarial: v["adversarial"].as_bool().unwrap(),
                true_label: v["true_label"].as_u64().unwrap() as u8,
                source_index: v["source_index"].as_u64().unwrap() as usize,
            }
        })
        .collect()
}

#[test]
fn evaluate_replay_is_byte_identical() {
    let base = &*BASE;
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "evaluate", "--model", base.model.to_str().unwrap(),
            "--detector", base.detector.to_str().unwrap(),
            "--dataset", base.dataset.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--sweep",
        ]);
    }
    for report in ["detection.csv", "roc.csv", "metrics.json", "recovery.json", "sweep.csv"] {
        assert_eq!(
            std::fs::read(a.join(report)).unwrap(),
            std::fs::read(b.join(report)).unwrap(),
            "{report} differs between identical runs"
        );
    }
}
