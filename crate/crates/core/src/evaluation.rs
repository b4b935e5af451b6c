//! Coverage and Adjusted Coverage against ground-truth boxes.
//!
//! A predicted instance matches a ground-truth instance in a frame when one of
//! its member masks in that frame has a bounding box with IoU at least
//! `tau_eval` against the ground-truth box. Predicted instances are mapped one
//! to one onto ground-truth ids by an optimal assignment that maximises the
//! total number of matched frames.
//!
//! * coverage = matched frames / ground-truth frames
//! * adjusted coverage = matched frames / (ground-truth frames - missed frames),
//!   where a missed frame is one in which no detected mask at all reaches
//!   `tau_eval` against the ground-truth box.
//!
//! When every frame of an instance is missed its adjusted coverage is 1, it
//! is flagged `vacuous`, and it does not enter the adjusted mean.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::{BBox, DetectionSet};
use crate::predictions::PredictionFile;

pub const DEFAULT_TAU_EVAL: f64 = 0.5;
pub const GT_HEADER: [&str; 6] = ["frame", "gt_id", "x_min", "y_min", "x_max", "y_max"];

pub type GtId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub frame: String,
    pub gt_id: GtId,
    pub bbox: BBox,
}

#[derive(Debug, Deserialize)]
struct GtRow {
    frame: String,
    gt_id: GtId,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

pub fn parse_gt(text: &str) -> Result<Vec<GtBox>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers =
        reader.headers().map_err(|e| Error::Parse { file: "gt".into(), line: 1, message: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != GT_HEADER {
        return Err(Error::Parse {
            file: "gt".into(),
            line: 1,
            message: format!("expected header {}", GT_HEADER.join(",")),
        });
    }
    let mut boxes = Vec::new();
    for record in reader.deserialize::<GtRow>() {
        let row = record.map_err(|e| Error::Parse {
            file: "gt".into(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let bbox = BBox::new(row.x_min, row.y_min, row.x_max, row.y_max);
        if !(bbox.x_min <= bbox.x_max && bbox.y_min <= bbox.y_max) {
            return Err(Error::Validation(format!(
                "inverted box for gt {} in frame {}: {:?}",
                row.gt_id,
                row.frame,
                bbox.as_array()
            )));
        }
        boxes.push(GtBox { frame: row.frame, gt_id: row.gt_id, bbox });
    }
    Ok(boxes)
}

pub fn load_gt(path: impl AsRef<Path>) -> Result<Vec<GtBox>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gt(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse { file: path.display().to_string(), line, message },
        other => other,
    })
}

pub fn format_gt(boxes: &[GtBox]) -> String {
    let mut s = GT_HEADER.join(",");
    s.push('\n');
    for b in boxes {
        let [x0, y0, x1, y1] = b.bbox.as_array();
        let _ = writeln!(s, "{},{},{x0},{y0},{x1},{y1}", b.frame, b.gt_id);
    }
    s
}

/// IoU of two boxes with inclusive pixel corners.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min) + 1.0;
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min) + 1.0;
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let area = |r: &BBox| (r.x_max - r.x_min + 1.0) * (r.y_max - r.y_min + 1.0);
    let inter = iw * ih;
    inter / (area(a) + area(b) - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub gt_id: GtId,
    pub total_frames: usize,
    pub matched_frames: usize,
    pub missed_seg_frames: usize,
    pub coverage: f64,
    pub adjusted_coverage: f64,
    /// Every frame was a missed detection.
    pub vacuous: bool,
    pub predicted_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_instance: Vec<InstanceScore>,
    pub mean_coverage: f64,
    pub mean_adjusted_coverage: f64,
    pub weighted_coverage: f64,
    pub weighted_adjusted_coverage: f64,
    /// Predicted instance id to ground-truth id.
    pub id_mapping: BTreeMap<u32, GtId>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize")
    }

    pub fn total_matched(&self) -> usize {
        self.per_instance.iter().map(|s| s.matched_frames).sum()
    }

    /// Aligned-column text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>9} {:>6} {:>7} {:>6} {:>9} {:>9}",
            "gt_id", "predicted", "total", "matched", "missed", "coverage", "adjusted"
        );
        for r in &self.per_instance {
            let pred = r.predicted_id.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
            let adjusted =
                if r.vacuous { format!("{:.3}*", r.adjusted_coverage) } else { format!("{:.3}", r.adjusted_coverage) };
            let _ = writeln!(
                s,
                "{:>8} {:>9} {:>6} {:>7} {:>6} {:>9.3} {:>9}",
                r.gt_id, pred, r.total_frames, r.matched_frames, r.missed_seg_frames, r.coverage, adjusted
            );
        }
        let _ = writeln!(
            s,
            "mean coverage {:.3}, mean adjusted coverage {:.3} (frame-weighted {:.3} / {:.3})",
            self.mean_coverage, self.mean_adjusted_coverage, self.weighted_coverage, self.weighted_adjusted_coverage
        );
        if self.per_instance.iter().any(|r| r.vacuous) {
            s.push_str("* every frame missed by the detector; excluded from the adjusted mean\n");
        }
        s
    }

    /// Per-instance rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "gt_id,predicted_id,total_frames,matched_frames,missed_seg_frames,coverage,adjusted_coverage,vacuous\n",
        );
        for r in &self.per_instance {
            let pred = r.predicted_id.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.gt_id,
                pred,
                r.total_frames,
                r.matched_frames,
                r.missed_seg_frames,
                r.coverage,
                r.adjusted_coverage,
                r.vacuous
            );
        }
        s
    }
}

/// Scores predicted instances against ground truth.
pub fn evaluate(
    predictions: &PredictionFile,
    dets: &DetectionSet,
    gt: &[GtBox],
    tau_eval: f64,
) -> Result<EvaluationReport> {
    if !(tau_eval > 0.0 && tau_eval <= 1.0) {
        return Err(Error::Validation(format!("tau_eval {tau_eval} outside (0, 1]")));
    }

    let mut gt_frames: BTreeMap<GtId, BTreeMap<&str, BBox>> = BTreeMap::new();
    for b in gt {
        if gt_frames.entry(b.gt_id).or_default().insert(&b.frame, b.bbox).is_some() {
            return Err(Error::Validation(format!("gt {} has more than one box in frame {}", b.gt_id, b.frame)));
        }
    }
    let mut warnings: Vec<String> = gt
        .iter()
        .map(|b| b.frame.as_str())
        .filter(|f| !dets.images.contains_key(*f))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|f| format!("ground-truth frame {f} has no detections entry"))
        .collect();

    // canonical column order: by smallest member mask, so results do not depend on predicted ids
    let mut order: Vec<usize> = (0..predictions.instances.len()).collect();
    let keys: Vec<Option<&(String, u32)>> = predictions.instances.iter().map(|p| p.masks.iter().min()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(predictions.instances[a].id.cmp(&predictions.instances[b].id)));

    // frame -> (column, member box)
    let mut members_in_frame: HashMap<&str, Vec<(usize, BBox)>> = HashMap::new();
    for (col, &k) in order.iter().enumerate() {
        for (image, mask_id) in &predictions.instances[k].masks {
            let mask = dets.get(image, *mask_id).ok_or_else(|| {
                Error::Validation(format!(
                    "predicted instance {} references unknown mask ({image}, {mask_id})",
                    predictions.instances[k].id
                ))
            })?;
            members_in_frame.entry(image.as_str()).or_default().push((col, mask.bounding_box()));
        }
    }

    let gt_ids: Vec<GtId> = gt_frames.keys().copied().collect();
    let cols = order.len();
    let mut counts = vec![vec![0i64; cols]; gt_ids.len()];
    let mut missed = vec![0usize; gt_ids.len()];
    for (row, frames) in gt_frames.values().enumerate() {
        for (&frame, gbox) in frames {
            let detected = dets
                .images
                .get(frame)
                .is_some_and(|d| d.masks.iter().any(|m| box_iou(&m.bounding_box(), gbox) >= tau_eval));
            if !detected {
                missed[row] += 1;
            }
            let mut hit = vec![false; cols];
            for &(col, mbox) in members_in_frame.get(frame).map(Vec::as_slice).unwrap_or(&[]) {
                if !hit[col] && box_iou(&mbox, gbox) >= tau_eval {
                    hit[col] = true;
                    counts[row][col] += 1;
                }
            }
        }
    }

    let assignment = optimal_assignment(&counts, gt_ids.len(), cols);
    let mut id_mapping = BTreeMap::new();
    let mut per_instance = Vec::with_capacity(gt_ids.len());
    for (row, (&gt_id, frames)) in gt_frames.iter().enumerate() {
        let (matched, predicted_id) = match assignment[row] {
            Some(col) if counts[row][col] > 0 => {
                let pid = predictions.instances[order[col]].id;
                id_mapping.insert(pid, gt_id);
                (counts[row][col] as usize, Some(pid))
            }
            _ => (0, None),
        };
        let total = frames.len();
        let chances = total - missed[row];
        let vacuous = chances == 0;
        per_instance.push(InstanceScore {
            gt_id,
            total_frames: total,
            matched_frames: matched,
            missed_seg_frames: missed[row],
            coverage: matched as f64 / total as f64,
            adjusted_coverage: if vacuous { 1.0 } else { matched as f64 / chances as f64 },
            vacuous,
            predicted_id,
        });
    }

    let mean = |vals: Vec<f64>| -> Option<f64> {
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let mean_coverage = mean(per_instance.iter().map(|s| s.coverage).collect()).unwrap_or(0.0);
    let mean_adjusted_coverage =
        mean(per_instance.iter().filter(|s| !s.vacuous).map(|s| s.adjusted_coverage).collect())
            .unwrap_or(if per_instance.is_empty() { 0.0 } else { 1.0 });
    let matched: usize = per_instance.iter().map(|s| s.matched_frames).sum();
    let total: usize = per_instance.iter().map(|s| s.total_frames).sum();
    let chances: usize = per_instance.iter().map(|s| s.total_frames - s.missed_seg_frames).sum();
    let weighted_coverage = if total == 0 { 0.0 } else { matched as f64 / total as f64 };
    let weighted_adjusted_coverage = if chances == 0 {
        if total == 0 {
            0.0
        } else {
            1.0
        }
    } else {
        matched as f64 / chances as f64
    };

    if per_instance.iter().any(|s| s.vacuous) {
        warnings.push("some ground-truth instances were never detected; see `vacuous`".into());
    }

    Ok(EvaluationReport {
        per_instance,
        mean_coverage,
        mean_adjusted_coverage,
        weighted_coverage,
        weighted_adjusted_coverage,
        id_mapping,
        warnings,
    })
}

/// Maximum-weight one-to-one assignment of rows to columns; `None` for
/// rows left without a column.
fn optimal_assignment(weights: &[Vec<i64>], rows: usize, cols: usize) -> Vec<Option<usize>> {
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        let m = Matrix::from_rows(weights.iter().cloned()).expect("rectangular weights");
        let (_, assign) = kuhn_munkres(&m);
        assign.into_iter().map(Some).collect()
    } else {
        let transposed: Vec<Vec<i64>> = (0..cols).map(|c| (0..rows).map(|r| weights[r][c]).collect()).collect();
        let m = Matrix::from_rows(transposed).expect("rectangular weights");
        let (_, assign) = kuhn_munkres(&m);
        let mut out = vec![None; rows];
        for (col, row) in assign.into_iter().enumerate() {
            out[row] = Some(col);
        }
        out
    }
}
