//! Labeled point clouds (ASCII PLY) and per-instance mask listings.
//!
//! Track JSON layout:
//!
//! ```json
//! {
//!   "instances": { "0": [ { "image": "a.jpg", "mask_id": 2, "bbox": [x_min, y_min, x_max, y_max] } ] },
//!   "unassigned": [ { "image": "b.jpg", "mask_id": 0, "bbox": [...] } ]
//! }
//! ```
//!
//! Entries are ordered by image name, then mask id.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::association::AssociationResult;
use crate::colmap::Reconstruction;
use crate::error::{Error, Result};
use crate::masks::DetectionSet;
use crate::predictions::PredictionFile;

pub const UNLABELED_ID: i64 = -1;
pub const UNLABELED_GRAY: [u8; 3] = [128, 128, 128];
pub const HIGHLIGHT: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    InstancePalette,
    OriginalRgb,
    /// The chosen instance in red, every other point in its original color.
    SingleInstance(u32),
}

impl std::str::FromStr for ColorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instance-palette" | "palette" => Ok(Self::InstancePalette),
            "original-rgb" | "rgb" => Ok(Self::OriginalRgb),
            _ => {
                s.strip_prefix("single-instance:").and_then(|id| id.parse().ok()).map(Self::SingleInstance).ok_or_else(
                    || {
                        Error::Config(format!(
                            "color mode {s:?}: expected instance-palette, original-rgb or single-instance:<id>"
                        ))
                    },
                )
            }
        }
    }
}

/// Color for an instance id; evenly spread hues, never gray.
pub fn palette_color(instance_id: u32) -> [u8; 3] {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    let hue = (instance_id as f64 * GOLDEN).fract() * 6.0;
    let (s, v) = (0.75, 0.95);
    let sector = hue.floor();
    let f = hue - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let rgb = match sector as u32 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    };
    rgb.map(|c| (c * 255.0).round() as u8)
}

/// PLY text with one vertex per 3D point, in point id order.
pub fn format_ply(recon: &Reconstruction, result: &AssociationResult, mode: ColorMode) -> Result<String> {
    if let ColorMode::SingleInstance(id) = mode {
        if result.instance(id).is_none() {
            return Err(Error::UnknownInstance(id));
        }
    }
    let mut out = String::with_capacity(64 * recon.points3d.len() + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", recon.points3d.len());
    for prop in ["float x", "float y", "float z", "uchar red", "uchar green", "uchar blue", "int instance_id"] {
        let _ = writeln!(out, "property {prop}");
    }
    out.push_str("end_header\n");
    for (id, p) in &recon.points3d {
        let label = result.point_labels.get(id).copied();
        let color = match (mode, label) {
            (ColorMode::InstancePalette, Some(l)) => palette_color(l),
            (ColorMode::InstancePalette, None) => UNLABELED_GRAY,
            (ColorMode::SingleInstance(sel), Some(l)) if l == sel => HIGHLIGHT,
            _ => p.color,
        };
        let [x, y, z] = p.position.map(|c| c as f32);
        let _ = writeln!(
            out,
            "{x} {y} {z} {} {} {} {}",
            color[0],
            color[1],
            color[2],
            label.map_or(UNLABELED_ID, i64::from)
        );
    }
    Ok(out)
}

pub fn export_ply(
    recon: &Reconstruction,
    result: &AssociationResult,
    path: impl AsRef<Path>,
    mode: ColorMode,
) -> Result<()> {
    let path = path.as_ref();
    let text = format_ply(recon, result, mode)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub image: String,
    pub mask_id: u32,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackListing {
    pub instances: BTreeMap<u32, Vec<TrackEntry>>,
    pub unassigned: Vec<TrackEntry>,
}

impl TrackListing {
    /// Builds the listing; every referenced mask must exist in `dets`.
    pub fn new(preds: &PredictionFile, dets: &DetectionSet) -> Result<Self> {
        let entries = |masks: &[(String, u32)]| -> Result<Vec<TrackEntry>> {
            let mut out = masks
                .iter()
                .map(|(image, mask_id)| {
                    let mask = dets.get(image, *mask_id).ok_or_else(|| {
                        Error::Consistency(format!("mask ({image}, {mask_id}) is not among the detections"))
                    })?;
                    Ok(TrackEntry { image: image.clone(), mask_id: *mask_id, bbox: mask.bounding_box().as_array() })
                })
                .collect::<Result<Vec<_>>>()?;
            out.sort_by(|a, b| (&a.image, a.mask_id).cmp(&(&b.image, b.mask_id)));
            Ok(out)
        };
        Ok(Self {
            instances: preds.instances.iter().map(|i| Ok((i.id, entries(&i.masks)?))).collect::<Result<_>>()?,
            unassigned: entries(&preds.unassigned)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("track listing serialize")
    }
}

pub fn export_tracks(preds: &PredictionFile, dets: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let listing = TrackListing::new(preds, dets)?;
    fs::write(path, listing.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{associate, AssociationConfig};
    use crate::synth::{generate, SceneSpec};
    use std::collections::HashMap;

    fn scene3() -> (Reconstruction, DetectionSet, AssociationResult) {
        let spec = SceneSpec {
            num_buildings: 3,
            points_per_building: 60,
            num_frames: 12,
            num_sequences: 2,
            ..Default::default()
        };
        let scene = generate(&spec).unwrap();
        let result = associate(&scene.recon, &scene.detections, &AssociationConfig::default()).unwrap();
        (scene.recon, scene.detections, result)
    }

    fn vertices(ply: &str) -> Vec<Vec<&str>> {
        ply.split("end_header\n").nth(1).unwrap().lines().map(|l| l.split(' ').collect()).collect()
    }

    #[test]
    fn empty_result_keeps_original_colors() {
        let (recon, _, _) = scene3();
        let ply = format_ply(&recon, &AssociationResult::default(), ColorMode::OriginalRgb).unwrap();
        let rows = vertices(&ply);
        assert_eq!(rows.len(), recon.points3d.len());
        for (row, p) in rows.iter().zip(recon.points3d.values()) {
            assert_eq!(row[6], "-1");
            assert_eq!(row[3..6], p.color.map(|c| c.to_string()).iter().map(String::as_str).collect::<Vec<_>>());
        }
    }

    #[test]
    fn palette_counts_follow_labels() {
        let (recon, _, result) = scene3();
        assert_eq!(result.instances.len(), 3);
        let ply = format_ply(&recon, &result, ColorMode::InstancePalette).unwrap();
        let mut by_color: HashMap<String, usize> = HashMap::new();
        for row in vertices(&ply) {
            *by_color.entry(row[3..6].join(" ")).or_default() += 1;
        }
        for b in &result.instances {
            let c = palette_color(b.instance_id).map(|v| v.to_string()).join(" ");
            let labeled = result.point_labels.values().filter(|&&l| l == b.instance_id).count();
            assert_eq!(by_color[&c], labeled);
        }
        let unlabeled = recon.points3d.len() - result.point_labels.len();
        assert_eq!(by_color.get("128 128 128").copied().unwrap_or(0), unlabeled);
    }

    #[test]
    fn palette_is_distinct_and_stable() {
        let colors: Vec<[u8; 3]> = (0..50).map(palette_color).collect();
        for (i, a) in colors.iter().enumerate() {
            assert_ne!(*a, UNLABELED_GRAY);
            for b in &colors[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(palette_color(7), palette_color(7));
    }

    #[test]
    fn single_instance_mode() {
        let (recon, _, result) = scene3();
        assert!(matches!(format_ply(&recon, &result, ColorMode::SingleInstance(99)), Err(Error::UnknownInstance(99))));
        let ply = format_ply(&recon, &result, ColorMode::SingleInstance(1)).unwrap();
        let red = vertices(&ply).iter().filter(|r| r[3..6] == ["255", "0", "0"]).count();
        assert_eq!(red, result.point_labels.values().filter(|&&l| l == 1).count());
    }

    #[test]
    fn color_mode_parsing() {
        assert_eq!("palette".parse::<ColorMode>().unwrap(), ColorMode::InstancePalette);
        assert_eq!("single-instance:12".parse::<ColorMode>().unwrap(), ColorMode::SingleInstance(12));
        assert!("single-instance:x".parse::<ColorMode>().is_err());
    }

    #[test]
    fn track_listing_references_detections() {
        let (recon, dets, result) = scene3();
        let preds = result.to_predictions(&recon);
        let listing = TrackListing::new(&preds, &dets).unwrap();
        for entries in listing.instances.values() {
            assert!(entries.windows(2).all(|w| w[0].image <= w[1].image));
            for e in entries {
                assert_eq!(dets.get(&e.image, e.mask_id).unwrap().bounding_box().as_array(), e.bbox);
            }
        }
        let json: serde_json::Value = serde_json::from_str(&listing.to_json()).unwrap();
        assert!(json["unassigned"].is_array());
    }

    #[test]
    fn unassigned_and_unknown_masks() {
        let (_, dets, _) = scene3();
        let (image, d) = dets.images.iter().next().unwrap();
        let preds = PredictionFile { unassigned: vec![(image.clone(), d.masks[0].mask_id)], ..Default::default() };
        let listing = TrackListing::new(&preds, &dets).unwrap();
        assert_eq!(listing.unassigned.len(), 1);
        let bad = PredictionFile { unassigned: vec![("nope.jpg".into(), 0)], ..Default::default() };
        assert!(TrackListing::new(&bad, &dets).is_err());
    }
}
