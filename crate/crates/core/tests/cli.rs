use std::path::Path;
use std::process::{Command, Output};

use psg_stager::data::{synth_recording, write_epochs, write_native, EpochRecording, Stage};
use psg_stager::Tensor;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psg-stager"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in ["synth", "preprocess", "split", "train", "evaluate", "predict", "gradcheck"] {
        let o = bin(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"));
    }
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&[]).status.code(), Some(1));
}

#[test]
fn synth_is_deterministic_and_guards_non_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = bin(&["synth", "--out", s(d), "--n", "2", "--seed", "5", "--duration", "2"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["synth-5.psgr", "synth-6.psgr", "synth-6.hyp"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    assert_eq!(std::fs::read_to_string(a.join("synth-5.hyp")).unwrap().lines().count(), 4);
    assert_eq!(bin(&["synth", "--out", s(&a), "--n", "1"]).status.code(), Some(2));
    assert_eq!(bin(&["synth", "--out", s(&a), "--n", "1", "--force", "--duration", "1"]).status.code(), Some(0));

    let empty = dir.path().join("empty");
    assert_eq!(bin(&["synth", "--out", s(&empty), "--n", "0"]).status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&empty).unwrap().count(), 0);
}

#[test]
fn preprocess_reports_missing_channel_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = synth_recording(3, 3, None);
    let good = dir.path().join("good.psgr");
    write_native(&rec, &good).unwrap();
    rec.channels.retain(|c| c.name != "EOG_R");
    let bad = dir.path().join("bad.psgr");
    write_native(&rec, &bad).unwrap();

    let o = bin(&["preprocess", "--in", s(&bad), "--out", s(&dir.path().join("bad.psge"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("EOG_R"));

    let out = dir.path().join("x.psge");
    let o = bin(&["preprocess", "--in", s(&good), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("3 epochs"));
    let first = std::fs::read(&out).unwrap();
    assert!(dir.path().join("x.diag.json").exists());
    bin(&["preprocess", "--in", s(&good), "--out", s(&out)]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn pipeline_from_synthesis_to_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert!(bin(&["synth", "--out", s(&p("raw")), "--n", "10", "--seed", "1", "--duration", "2"]).status.success());
    assert!(bin(&["preprocess", "--in", s(&p("raw")), "--out", s(&p("epochs"))]).status.success());
    let o = bin(&["split", "--in", s(&p("epochs")), "--out", s(&p("split")), "--seed", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("train 8 / eval 1 / test 1"));

    std::fs::write(
        p("run.toml"),
        "max_steps = 3\neval_every = 2\nbatch_size = 4\ncheckpoint_dir = \"ckpt\"\n\
         train_data = \"split/train\"\neval_data = \"split/eval\"\n\
         [model]\nnum_block_layers = 2\nblocks_per_layer = 1\nbase_filters = 2\ninitial_filters = 4\n",
    )
    .unwrap();
    let o = bin(&["train", "--config", s(&p("run.toml")), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["latest.ckpt", "best.ckpt", "train.jsonl"] {
        assert!(p("ckpt").join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(p("ckpt/train.jsonl")).unwrap().lines().count(), 3);

    let ckpt = p("ckpt/latest.ckpt");
    let o = bin(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&p("split/test")), "--out", s(&p("report"))]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("true\\pred,W,N1,N2,N3,REM,Pr (%),Re (%),F1 (%)"));
    assert!(p("report/report.json").exists() && p("report/recordings.csv").exists());

    let test_file = std::fs::read_dir(p("split/test")).unwrap().next().unwrap().unwrap().path();
    let o = bin(&[
        "predict", "--checkpoint", s(&ckpt), "--in", s(&test_file),
        "--hypnodensity", s(&p("dens.csv")), "--hypnogram", s(&p("hyp.txt")),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(p("dens.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("W,N1,N2,N3,REM"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let sum: f64 = r.split(',').map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-5);
        assert!(r.split(',').all(|v| v.split('.').nth(1).unwrap().len() == 6));
    }
    assert_eq!(std::fs::read_to_string(p("hyp.txt")).unwrap().lines().count(), 4);

    // a raw recording is preprocessed on the fly
    let raw = std::fs::read_dir(p("raw")).unwrap().map(|e| e.unwrap().path()).find(|f| f.extension().unwrap() == "psgr").unwrap();
    assert!(bin(&["predict", "--checkpoint", s(&ckpt), "--in", s(&raw)]).status.success());
}

#[test]
fn non_finite_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("train")).unwrap();
    let mut x = Tensor::<f32>::full(&[4, 2, 32], 0.5);
    x.row_mut(1).fill(f32::INFINITY);
    let labels = [Some(Stage::W), Some(Stage::N1), Some(Stage::N2), Some(Stage::W)];
    write_epochs(&EpochRecording::new("nan", x, Some(&labels)).unwrap(), &dir.path().join("train/nan.psge")).unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "max_steps = 2\nbatch_size = 4\ncheckpoint_dir = \"ckpt\"\ntrain_data = \"train\"\n\
         [model]\nnum_block_layers = 2\nblocks_per_layer = 1\nbase_filters = 2\ninitial_filters = 8\n\
         num_classes = 5\ninput_channels = 2\nepoch_samples = 32\n",
    )
    .unwrap();
    let o = bin(&["train", "--config", s(&dir.path().join("run.toml"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nan#1"));
}

#[test]
fn gradcheck_passes_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("g.json");
    let o = bin(&["gradcheck", "--json", s(&json)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("stem.weight"));
    assert!(json.exists());
}
