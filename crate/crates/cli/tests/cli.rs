use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icclass::io::{self, FeatureBundle};
use icclass::network::{load_weights, validation_loss, TrainConfig};
use icclass::{Category, Execution, LabelVector};
use serde_json::Value;

fn icclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icclass")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = icclass(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn join(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn recording(dir: &Dir, name: &str, components: usize, seed: u64) -> PathBuf {
    let p = dir.join(name);
    let c = components.to_string();
    let seed = seed.to_string();
    ok(&[
        "synth", "recording", "-o", s(&p), "--channels", "8", "--components", &c, "--seconds", "60", "--seed", &seed,
    ]);
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn extract_is_deterministic_and_shape_valid() {
    let d = Dir::new();
    let rec = recording(&d, "rec", 8, 1);
    let (a, b) = (d.join("a.iclf"), d.join("b.iclf"));
    ok(&["extract", s(&rec), "-o", s(&a)]);
    ok(&["--sequential", "extract", s(&rec), "-o", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let f = io::read_feature_file(&a).unwrap();
    assert_eq!(f.components.len(), 8);
    assert_eq!(f.provenance.recording_id, "rec");
    for (_, c) in &f.components {
        assert_eq!(c.topo.pixels().dim(), (32, 32));
        assert_eq!((c.psd.len(), c.autocorr.len()), (100, 100));
    }
}

#[test]
fn constant_component_is_reported_by_name() {
    let d = Dir::new();
    let rec = recording(&d, "rec", 8, 2);
    let mut bundle = io::read_recording_bundle(&rec).unwrap();
    let mut activity = bundle.recording.component_activity().clone();
    activity.row_mut(5).fill(0.25);
    let r = &bundle.recording;
    bundle.recording = icclass::features::Recording::new(
        r.channel_data().clone(),
        r.sample_rate(),
        r.electrode_positions().to_vec(),
        r.mixing_matrix().clone(),
        activity,
    )
    .unwrap();
    io::write_recording_bundle(&rec, &bundle).unwrap();
    let out_path = d.join("f.iclf");
    let out = icclass(&["extract", s(&rec), "-o", s(&out_path)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ic6"));
    assert_eq!(io::read_feature_file(&out_path).unwrap().components.len(), 7);
}

#[test]
fn classify_merge_and_tta() {
    let d = Dir::new();
    let rec = recording(&d, "rec", 6, 3);
    let (f, w) = (d.join("f.iclf"), d.join("w.iclw"));
    ok(&["extract", s(&rec), "-o", s(&f)]);
    ok(&["synth", "weights", "-o", s(&w), "--seed", "4"]);

    let out = ok(&["classify", "--weights", s(&w), "--features", s(&f), "--merge", "2"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    for c in report["components"].as_array().unwrap() {
        let p: Vec<f64> = c["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(p.len(), 2);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    }

    let bundle = io::read_feature_file(&f).unwrap();
    let mirrored = FeatureBundle {
        provenance: bundle.provenance.clone(),
        components: bundle.components.iter().map(|(id, x)| (id.clone(), x.mirrored().negated())).collect(),
    };
    let m = d.join("m.iclf");
    io::write_feature_file(&m, &mirrored).unwrap();
    let probs = |features: &Path, tta: &str| -> Vec<Vec<f64>> {
        let out = ok(&["classify", "--weights", s(&w), "--features", s(features), tta]);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["components"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
            .collect()
    };
    for (a, b) in probs(&f, "--tta").iter().zip(&probs(&m, "--tta")) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
    assert_ne!(probs(&f, "--no-tta"), probs(&m, "--no-tta"));

    let csv = d.join("p.csv");
    ok(&["classify", "--weights", s(&w), "--features", s(&f), "--csv", s(&csv), "-o", s(&d.join("r.json"))]);
    assert_eq!(io::read_labels(&csv).unwrap().len(), 6);

    assert_eq!(code(&icclass(&["classify", "--weights", s(&w), "--features", s(&f), "--merge", "3"])), 1);
}

#[test]
fn train_writes_reproducible_weights() {
    let d = Dir::new();
    let (tf, tl, vf, vl) = (d.join("t.iclf"), d.join("t.csv"), d.join("v.iclf"), d.join("v.csv"));
    ok(&["synth", "toy", "--features", s(&tf), "--labels", s(&tl), "--n", "60", "--seed", "1"]);
    ok(&["synth", "toy", "--features", s(&vf), "--labels", s(&vl), "--n", "15", "--seed", "2"]);
    // A few wrong validation labels keep the best validation loss well above zero.
    let mut vlabels = io::read_labels(&vl).unwrap();
    for (_, l) in vlabels.iter_mut().take(3) {
        *l = LabelVector::one_hot(Category::Heart);
    }
    io::write_labels(&vl, &vlabels).unwrap();
    let cfg = d.join("train.cfg");
    fs::write(&cfg, "batch_size = 8\nvalidation_interval = 5\nearly_stop_window = 10\nseed = 3\nlearning_rate = 0.01\n").unwrap();
    let run = |out: &Path| {
        let o = ok(&[
            "train", "--features", s(&tf), "--labels", s(&tl), "--validation-features", s(&vf), "--validation-labels",
            s(&vl), "--config", s(&cfg), "--max-batches", "200", "-o", s(out),
        ]);
        String::from_utf8(o.stdout).unwrap()
    };
    let (a, b) = (d.join("a.iclw"), d.join("b.iclw"));
    let stdout = run(&a);
    run(&b);
    assert!(stdout.contains("EarlyStop"), "{stdout}");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    // The reloaded weights reproduce the best logged validation loss.
    let best: f64 = stdout.split("best validation loss ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    let log = fs::read_to_string(d.join("a.log")).unwrap();
    let logged: Vec<f64> = log.lines().skip(1).map(|l| l.split(' ').nth(2).unwrap().parse().unwrap()).collect();
    assert!(logged.iter().any(|v| (v - best).abs() < 1e-9));
    let weights = load_weights(&a).unwrap();
    let feats = io::read_feature_file(&vf).unwrap();
    let labels = io::read_labels(&vl).unwrap();
    let set = icclass::pipeline::join_labels(&feats, &labels).unwrap();
    let loss = validation_loss(&weights, &set, &TrainConfig::default().class_weights, Execution::Sequential).unwrap();
    assert!(best > 0.1, "{best}");
    assert!((loss - best).abs() < 1e-6, "{loss} vs {best}");

    let empty = d.join("empty.csv");
    fs::write(&empty, "component_id,brain,muscle,eye,heart,line_noise,channel_noise,other\n").unwrap();
    let o = icclass(&["train", "--features", s(&tf), "--labels", s(&empty), "-o", s(&d.join("c.iclw"))]);
    assert_eq!(code(&o), 2);
    assert!(!d.join("c.iclw").exists());

    fs::write(&cfg, "learning_rate = -1\n").unwrap();
    let o = icclass(&["train", "--features", s(&tf), "--labels", s(&tl), "--config", s(&cfg), "-o", s(&d.join("c.iclw"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn aggregate_fixture_and_errors() {
    let d = Dir::new();
    let votes = d.join("v.csv");
    let header = io::VOTE_HEADER;
    fs::write(
        &votes,
        format!("{header}\na,c1,1,0,0,0,0,0,0,0,0\nb,c1,1,0,0,0,0,0,0,0,0\nc,c1,1,0,0,0,0,0,0,0,0\n"),
    )
    .unwrap();
    let out = ok(&["aggregate", "--votes", s(&votes), "--min-votes", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let label: Vec<f64> = v["labels"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(icclass::labels::argmax(&label), Category::Brain.index());

    let o = icclass(&["aggregate", "--votes", s(&votes)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 10"));

    let planted = d.join("p.csv");
    ok(&["synth", "votes", "-o", s(&planted), "--components", "30", "--seed", "5"]);
    let (a, b) = (d.join("a.json"), d.join("b.json"));
    ok(&["aggregate", "--votes", s(&planted), "--seed", "9", "--epochs", "200", "-o", s(&a)]);
    ok(&["aggregate", "--votes", s(&planted), "--seed", "9", "--epochs", "200", "-o", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let chains = d.join("chains.json");
    ok(&["aggregate", "--votes", s(&planted), "--epochs", "50", "--chains", "3", "-o", s(&chains)]);
    assert_eq!(json(&chains).as_array().unwrap().len(), 3);

    fs::write(&votes, format!("{header}\na,c1,1,0,0,0,0,0,0,0,0\na,c2,1,0,x,0,0,0,0,0,0\n")).unwrap();
    let o = icclass(&["aggregate", "--votes", s(&votes)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

fn write_labels(path: &Path, rows: &[(&str, [f64; 7])]) {
    let rows: Vec<(String, LabelVector)> =
        rows.iter().map(|(id, p)| (id.to_string(), LabelVector::new(*p).unwrap())).collect();
    io::write_labels(path, &rows).unwrap();
}

#[test]
fn evaluate_identity_merge_flip_and_mismatch() {
    let d = Dir::new();
    let (t, p) = (d.join("t.csv"), d.join("p.csv"));
    let one = |k: usize| {
        let mut a = [0.0; 7];
        a[k] = 1.0;
        a
    };
    write_labels(&t, &[("a", one(0)), ("b", one(1)), ("c", one(6))]);
    let out = ok(&["evaluate", "--targets", s(&t), "--predictions", s(&t)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["balanced_accuracy"].as_f64().unwrap(), 1.0);
    assert!(v["cross_entropy"].as_f64().unwrap().abs() < 1e-12);

    // Brain 0.45 against 0.4 + 0.15 spread over categories that merge.
    write_labels(&t, &[("a", one(6))]);
    write_labels(&p, &[("a", [0.45, 0.0, 0.0, 0.0, 0.4, 0.0, 0.15])]);
    let seven: Value = serde_json::from_slice(&ok(&["evaluate", "--targets", s(&t), "--predictions", s(&p)]).stdout).unwrap();
    assert_eq!(seven["confusion_counts"][6][0].as_f64().unwrap(), 1.0);
    let svg = d.join("plot.svg");
    let five: Value = serde_json::from_slice(
        &ok(&["evaluate", "--targets", s(&t), "--predictions", s(&p), "--classes", "5", "--svg", s(&svg)]).stdout,
    )
    .unwrap();
    assert_eq!(five["confusion_counts"][4][4].as_f64().unwrap(), 1.0);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    write_labels(&p, &[("z", one(0))]);
    let o = icclass(&["evaluate", "--targets", s(&t), "--predictions", s(&p)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"a\"") && err.contains("\"z\""), "{err}");
}

#[test]
fn bench_reports_two_recordings() {
    let d = Dir::new();
    let a = recording(&d, "a", 10, 6);
    let b = recording(&d, "b", 10, 7);
    let w = d.join("w.iclw");
    ok(&["synth", "weights", "-o", s(&w)]);
    let out = ok(&["bench", "--weights", s(&w), s(&a), s(&b), "--repetitions", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = v["recordings"].as_array().unwrap();
    assert_eq!(recs.len(), 2);
    let per: Vec<f64> = recs.iter().map(|r| r["per_component_seconds"].as_f64().unwrap()).collect();
    for r in recs {
        let total = r["total_seconds"].as_f64().unwrap();
        assert_eq!(r["per_component_seconds"].as_f64().unwrap(), total / 10.0);
    }
    assert_eq!(v["per_component"]["median"].as_f64().unwrap(), (per[0] + per[1]) / 2.0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&icclass(&[])), 1);
    assert_eq!(code(&icclass(&["frobnicate"])), 1);
    assert_eq!(code(&icclass(&["--help"])), 0);
}
