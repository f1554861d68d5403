mod common;

use std::path::Path;

use common::{code, hrrp, small_config, stderr, write_config};
use hrrp_pipeline::{Mode, TrainingState};

const COMMANDS: [&str; 6] = ["gen-dataset", "train", "eval", "sweep-sjr", "export-attention", "gradcheck"];

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero_for_every_command() {
    let out = hrrp(["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for c in COMMANDS {
        assert!(text.contains(c), "top-level help lacks {c}");
    }
    for c in COMMANDS {
        let out = hrrp([c, "--help"]);
        assert_eq!(code(&out), 0, "{c} --help");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("Usage"), "{c}: {text}");
        assert!(text.contains("--threads") && text.contains("--quiet"), "{c}: {text}");
    }
}

#[test]
fn invalid_invocations_fail_with_a_diagnostic() {
    let cases: [&[&str]; 5] = [
        &["frobnicate"],
        &["gen-dataset", "--bogus"],
        &["train", "--dataset", "d", "--mode", "fancy", "--epochs", "1", "--batch", "8", "--seed", "0", "--out", "m"],
        &["eval", "--ckpt", "m"],
        &["gradcheck", "--f64", "extra"],
    ];
    for args in cases {
        let out = hrrp(args);
        assert_ne!(code(&out), 0, "{args:?}");
        assert!(!stderr(&out).trim().is_empty(), "{args:?}");
    }
}

#[test]
fn exit_codes_distinguish_config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dataset": {"samples_per_klass": 3}}"#).unwrap();
    let out = hrrp(["gen-dataset", "--config", s(&bad), "--seed", "1", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("samples_per_klass"));

    let missing = dir.path().join("missing.json");
    let out = hrrp(["gen-dataset", "--config", s(&missing), "--seed", "1", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let out = hrrp(["--threads", "0", "gradcheck"]);
    assert_eq!(code(&out), 2);

    let (nothing, model) = (dir.path().join("nothing"), dir.path().join("m.jrck"));
    let args = ["train", "--dataset", s(&nothing), "--mode", "none", "--epochs", "1", "--batch", "8", "--seed", "0"];
    let out = hrrp(args.into_iter().chain(["--out", s(&model)]));
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn workflow_is_deterministic_and_checks_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut config = small_config(10, &[-30.0, -50.0]);
    config.training.epochs = 1;
    config.training.batch = 16;
    config.training.modes = vec![Mode::Cfa, Mode::None];
    let cfg = write_config(d, &config);

    for name in ["a", "b"] {
        let out = hrrp(["--quiet", "gen-dataset", "--config", s(&cfg), "--seed", "5", "--out", s(&d.join(name))]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(out.stderr.is_empty(), "--quiet printed {}", stderr(&out));
    }
    for shard in ["sjr_-30dB.hrrp", "sjr_-50dB.hrrp"] {
        let a = std::fs::read(d.join("a").join(shard)).unwrap();
        assert_eq!(a, std::fs::read(d.join("b").join(shard)).unwrap(), "{shard}");
    }

    let ds = d.join("a");
    let train = |mode: &str, out: &Path, threads: &str| {
        let o = hrrp([
            "--threads",
            threads,
            "train",
            "--dataset",
            s(&ds),
            "--mode",
            mode,
            "--epochs",
            "2",
            "--batch",
            "16",
            "--seed",
            "3",
            "--sjr",
            "-50",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    let (m1, m2) = (d.join("m1.jrck"), d.join("m2.jrck"));
    train("cfa", &m1, "1");
    train("cfa", &m2, "2");
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let side = |p: &Path| std::fs::read(format!("{}.json", p.display())).unwrap();
    assert_eq!(side(&m1), side(&m2));
    let state: TrainingState = serde_json::from_slice(&side(&m1)).unwrap();
    assert_eq!(state.mode, Mode::Cfa);
    assert_eq!(state.history.len(), 2);

    let report = d.join("report");
    let out = hrrp(["eval", "--ckpt", s(&m1), "--dataset", s(&ds), "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(report.join("metrics.json")).unwrap()).unwrap();
    let confusion = std::fs::read_to_string(report.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 7);
    // The checkpoint holds the best epoch's weights.
    assert!((metrics["accuracy"].as_f64().unwrap() - state.best_test_accuracy).abs() < 1e-12);

    let out = hrrp(["eval", "--ckpt", s(&m1), "--dataset", s(&ds), "--report", s(&report), "--mode", "none"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let att = d.join("att");
    let out = hrrp(["export-attention", "--ckpt", s(&m1), "--dataset", s(&ds), "--out", s(&att)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(att.join("attention.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 2 * 16);
    assert!(std::fs::read_to_string(att.join("attention.svg")).unwrap().starts_with("<svg"));

    let plain = d.join("none.jrck");
    train("none", &plain, "1");
    let out = hrrp(["export-attention", "--ckpt", s(&plain), "--dataset", s(&ds), "--out", s(&att)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let sweep = d.join("sweep");
    let out = hrrp(["--quiet", "sweep-sjr", "--config", s(&cfg), "--out", s(&sweep)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2, "{csv}");
    assert!(sweep.join("sweep.svg").exists());
}
