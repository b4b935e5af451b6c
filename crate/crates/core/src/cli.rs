//! Subcommand implementations behind the `masklift` binary.
//!
//! Every command takes a [`RunConfig`], writes its files, and returns a
//! summary that the binary prints as text or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::{associate, AssociationConfig};
use crate::baseline::{load_frame_order, track_detections, tracks_to_predictions, DEFAULT_TAU_IOU};
use crate::colmap::parse_model;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, load_gt, EvaluationReport, DEFAULT_TAU_EVAL};
use crate::export::{export_ply, export_tracks, ColorMode};
use crate::masks::{load_detections_with, DetectionSet, LoadOptions, DEFAULT_MIN_SCORE};
use crate::predictions::PredictionFile;
use crate::synth::{generate, write_scene, SceneSpec};

pub const INSTANCES_FILE: &str = "instances.json";
pub const PLY_FILE: &str = "points.ply";
pub const TRACKS_FILE: &str = "tracks.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// Recommended band for each tunable; values outside only warn.
pub const RECOMMENDED: [(&str, f64, f64); 4] =
    [("tau_j", 0.15, 0.30), ("tau_m", 0.10, 0.25), ("n_min", 5.0, 20.0), ("min_score", 0.2, 0.5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tau_j: f64,
    pub tau_m: f64,
    pub n_min: usize,
    pub min_score: f64,
    /// Keep only masks with this class label.
    pub label: Option<String>,
    pub tau_iou: f64,
    pub tau_eval: f64,
    pub rng_seed: Option<u64>,
    /// `instance-palette`, `original-rgb` or `single-instance:<id>`.
    pub color_mode: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = AssociationConfig::default();
        Self {
            tau_j: a.tau_j,
            tau_m: a.tau_m,
            n_min: a.n_min,
            min_score: DEFAULT_MIN_SCORE,
            label: None,
            tau_iou: DEFAULT_TAU_IOU,
            tau_eval: DEFAULT_TAU_EVAL,
            rng_seed: None,
            color_mode: "instance-palette".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn association(&self) -> AssociationConfig {
        AssociationConfig { tau_j: self.tau_j, tau_m: self.tau_m, n_min: self.n_min }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions { min_score: self.min_score, label: self.label.clone() }
    }

    /// Hard range checks shared with the library.
    pub fn validate(&self) -> Result<()> {
        self.association().validate()?;
        for (name, v) in [("min_score", self.min_score), ("tau_iou", self.tau_iou), ("tau_eval", self.tau_eval)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} {v} outside [0, 1]")));
            }
        }
        self.color_mode.parse::<ColorMode>()?;
        Ok(())
    }

    /// One message per parameter outside its recommended band.
    pub fn range_warnings(&self) -> Vec<String> {
        RECOMMENDED
            .iter()
            .filter_map(|&(name, lo, hi)| {
                let v = match name {
                    "tau_j" => self.tau_j,
                    "tau_m" => self.tau_m,
                    "n_min" => self.n_min as f64,
                    _ => self.min_score,
                };
                (v < lo || v > hi).then(|| format!("{name} = {v} is outside the recommended range {lo}..{hi}"))
            })
            .collect()
    }
}

fn load_dets(path: &Path, cfg: &RunConfig) -> Result<DetectionSet> {
    load_detections_with(path, &cfg.load_options())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssociateSummary {
    pub instances: usize,
    pub points_labeled: usize,
    pub masks_assigned: usize,
    pub masks_unassigned: usize,
    pub masks_unmatched: usize,
    pub outputs: Vec<PathBuf>,
}

impl std::fmt::Display for AssociateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "instances:        {}", self.instances)?;
        writeln!(f, "points labeled:   {}", self.points_labeled)?;
        writeln!(f, "masks assigned:   {}", self.masks_assigned)?;
        writeln!(f, "masks unassigned: {}", self.masks_unassigned)?;
        write!(f, "masks unmatched:  {}", self.masks_unmatched)
    }
}

/// Model + detections -> `instances.json`, `points.ply`, `tracks.json`.
pub fn cmd_associate(model_dir: &Path, detections: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<AssociateSummary> {
    cfg.validate()?;
    let mode: ColorMode = cfg.color_mode.parse()?;
    let recon = parse_model(model_dir)?;
    let dets = load_dets(detections, cfg)?;
    let result = associate(&recon, &dets, &cfg.association())?;
    let preds = result.to_predictions(&recon);

    create_dir(out_dir)?;
    let outputs = vec![out_dir.join(INSTANCES_FILE), out_dir.join(PLY_FILE), out_dir.join(TRACKS_FILE)];
    preds.save(&outputs[0])?;
    export_ply(&recon, &result, &outputs[1], mode)?;
    export_tracks(&preds, &dets, &outputs[2])?;

    Ok(AssociateSummary {
        instances: result.instances.len(),
        points_labeled: result.point_labels.len(),
        masks_assigned: result.instances.iter().map(|b| b.members.len()).sum(),
        masks_unassigned: result.unassigned_masks.len(),
        masks_unmatched: result.unmatched_masks.len(),
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaselineSummary {
    pub tracks: usize,
    pub masks: usize,
    pub sequences: usize,
    pub outputs: Vec<PathBuf>,
}

impl std::fmt::Display for BaselineSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "sequences: {}", self.sequences)?;
        writeln!(f, "masks:     {}", self.masks)?;
        write!(f, "tracks:    {}", self.tracks)
    }
}

/// Detections + frame order -> `instances.json`, `tracks.json`.
pub fn cmd_baseline(detections: &Path, frame_order: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<BaselineSummary> {
    cfg.validate()?;
    let dets = load_dets(detections, cfg)?;
    let order = load_frame_order(frame_order)?;
    let tracks = track_detections(&dets, &order, cfg.tau_iou)?;
    let preds = tracks_to_predictions(&tracks);

    create_dir(out_dir)?;
    let outputs = vec![out_dir.join(INSTANCES_FILE), out_dir.join(TRACKS_FILE)];
    preds.save(&outputs[0])?;
    export_tracks(&preds, &dets, &outputs[1])?;

    Ok(BaselineSummary {
        tracks: tracks.len(),
        masks: tracks.iter().map(|t| t.entries.len()).sum(),
        sequences: order.len(),
        outputs,
    })
}

/// Scores predictions; writes `report.json` and `report.csv` when `out_dir` is given.
pub fn cmd_evaluate(
    predictions: &Path,
    detections: &Path,
    gt: &Path,
    out_dir: Option<&Path>,
    cfg: &RunConfig,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let preds = PredictionFile::load(predictions)?;
    let dets = load_dets(detections, cfg)?;
    let gt = load_gt(gt)?;
    let report = evaluate(&preds, &dets, &gt, cfg.tau_eval)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        write(REPORT_JSON, report.to_json())?;
        write(REPORT_CSV, report.to_csv())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthSummary {
    pub images: usize,
    pub points: usize,
    pub masks: usize,
    pub gt_boxes: usize,
    pub out_dir: PathBuf,
}

impl std::fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "images:   {}", self.images)?;
        writeln!(f, "points:   {}", self.points)?;
        writeln!(f, "masks:    {}", self.masks)?;
        writeln!(f, "gt boxes: {}", self.gt_boxes)?;
        write!(f, "written to {}", self.out_dir.display())
    }
}

/// Scene spec (defaults when `spec_path` is `None`) -> scene files in `out_dir`.
/// A seed in `cfg` overrides the scene file's seed.
pub fn cmd_synth(spec_path: Option<&Path>, out_dir: &Path, cfg: &RunConfig) -> Result<SynthSummary> {
    let mut spec = match spec_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SceneSpec::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SceneSpec::default(),
    };
    if let Some(seed) = cfg.rng_seed {
        spec.rng_seed = seed;
    }
    let scene = generate(&spec)?;
    create_dir(out_dir)?;
    write_scene(&scene, out_dir)?;
    Ok(SynthSummary {
        images: scene.recon.images.len(),
        points: scene.recon.points3d.len(),
        masks: scene.detections.num_masks(),
        gt_boxes: scene.gt.len(),
        out_dir: out_dir.to_owned(),
    })
}
