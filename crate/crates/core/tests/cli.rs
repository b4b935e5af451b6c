use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use masklift::association::{associate, AssociationConfig};
use masklift::colmap::{parse_model, validate};
use masklift::masks::load_detections;
use masklift::predictions::PredictionFile;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masklift"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            for (name, bytes) in tree(&p) {
                files.push((format!("{}/{name}", p.file_name().unwrap().to_string_lossy()), bytes));
            }
        } else {
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "num_buildings = 4\nkeypoint_noise_sigma = 1.0\nmask_mode = \"per-building-region\"\n").unwrap();
    ok(&run(&["synth", "--spec", "spec.toml", "--seed", "3", "-o", "a"], dir.path()));
    ok(&run(&["synth", "--spec", "spec.toml", "--seed", "3", "-o", "b"], dir.path()));
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));
    let recon = parse_model(dir.path().join("a/model")).unwrap();
    assert!(validate(&recon).is_empty());
    for f in ["detections.json", "gt.csv", "truth.json", "frames.txt", "model/cameras.txt"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn synth_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), "num_buildings = 0\n").unwrap();
    let out = run(&["synth", "--spec", "spec.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn associate_matches_library_and_evaluates_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["synth", "-o", "scene"], dir.path()));
    let summary = ok(&run(&["associate", "scene/model", "scene/detections.json", "-o", "out", "--json"], dir.path()));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["instances"], 10);

    let recon = parse_model(dir.path().join("scene/model")).unwrap();
    let dets = load_detections(dir.path().join("scene/detections.json"), 0.3).unwrap();
    let lib = associate(&recon, &dets, &AssociationConfig::default()).unwrap().to_predictions(&recon);
    assert_eq!(PredictionFile::load(dir.path().join("out/instances.json")).unwrap(), lib);
    assert!(dir.path().join("out/points.ply").exists() && dir.path().join("out/tracks.json").exists());

    let report = ok(&run(
        &["evaluate", "out/instances.json", "scene/detections.json", "scene/gt.csv", "-o", "eval", "--json"],
        dir.path(),
    ));
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["mean_coverage"], 1.0);
    assert_eq!(report["mean_adjusted_coverage"], 1.0);
    assert!(dir.path().join("eval/report.csv").exists());

    let table = ok(&run(&["evaluate", "out/instances.json", "scene/detections.json", "scene/gt.csv"], dir.path()));
    assert!(table.lines().count() > 10);
}

#[test]
fn baseline_tracks_stay_inside_sequences() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["synth", "-o", "scene"], dir.path()));
    ok(&run(&["baseline", "scene/detections.json", "scene/frames.txt", "-o", "base", "--tau-iou", "0.3"], dir.path()));
    let preds = PredictionFile::load(dir.path().join("base/instances.json")).unwrap();
    let total: usize = preds.instances.iter().map(|i| i.masks.len()).sum();
    let dets = load_detections(dir.path().join("scene/detections.json"), 0.3).unwrap();
    assert_eq!(total, dets.num_masks());
    for inst in &preds.instances {
        let seqs: std::collections::BTreeSet<&str> = inst.masks.iter().map(|(img, _)| &img[..3]).collect();
        assert_eq!(seqs.len(), 1, "track {} spans {seqs:?}", inst.id);
    }
}

#[test]
fn baseline_single_frame_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.json"), r#"{"images": []}"#).unwrap();
    fs::write(d.join("none.txt"), "").unwrap();
    let out = ok(&run(&["baseline", "empty.json", "none.txt", "-o", "e", "--json"], d));
    assert!(out.contains("\"tracks\": 0"));

    fs::write(
        d.join("one.json"),
        r#"{"images": [{"name": "a.jpg", "width": 4, "height": 1, "masks": [
            {"label": "building", "score": 0.9, "rle": [0, 2, 2]},
            {"label": "building", "score": 0.9, "rle": [2, 2]}]}]}"#,
    )
    .unwrap();
    fs::write(d.join("one.txt"), "a.jpg\n").unwrap();
    let out = ok(&run(&["baseline", "one.json", "one.txt", "-o", "o", "--json"], d));
    assert!(out.contains("\"tracks\": 2"), "{out}");
}

#[test]
fn empty_inputs_give_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("model")).unwrap();
    fs::write(d.join("model/images.txt"), "").unwrap();
    fs::write(d.join("model/points3D.txt"), "").unwrap();
    fs::write(d.join("dets.json"), r#"{"images": []}"#).unwrap();
    ok(&run(&["associate", "model", "dets.json", "-o", "out"], d));
    let preds = PredictionFile::load(d.join("out/instances.json")).unwrap();
    assert_eq!(preds, PredictionFile::default());
}

#[test]
fn missing_file_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["associate", "nowhere", "missing.json"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run(&["synth", "-o", "scene"], d));
    fs::write(d.join("run.toml"), "n_min = 5000\ntau_j = 0.2\n").unwrap();
    // the config drops every instance, the flag restores the default
    let out = ok(&run(&["associate", "scene/model", "scene/detections.json", "--config", "run.toml", "--json"], d));
    assert!(out.contains("\"instances\": 0"), "{out}");
    let out = ok(&run(
        &["associate", "scene/model", "scene/detections.json", "--config", "run.toml", "--n-min", "10", "--json"],
        d,
    ));
    assert!(out.contains("\"instances\": 10"), "{out}");

    fs::write(d.join("bad.toml"), "tau_q = 1\n").unwrap();
    let out = run(&["associate", "scene/model", "scene/detections.json", "--config", "bad.toml"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}
