//! Instance masks produced by an external segmenter, stored as run-length
//! encoded binary grids.
//!
//! Runs alternate background/foreground, starting with background, over the
//! row-major flattening of the `height x width` grid. A leading `0` means the
//! mask starts with foreground.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colmap::Reconstruction;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_SCORE: f64 = 0.3;

/// Axis-aligned pixel box with inclusive corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub mask_id: u32,
    pub label: String,
    pub score: f64,
    pub width: u32,
    pub height: u32,
    rle: Vec<u32>,
    /// Foreground runs as half-open flat index ranges, ascending.
    runs: Vec<(u64, u64)>,
    area: u64,
    bbox: BBox,
}

impl InstanceMask {
    pub fn from_rle(
        mask_id: u32,
        label: impl Into<String>,
        score: f64,
        width: u32,
        height: u32,
        rle: Vec<u32>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Format(format!("score {score} outside [0, 1]")));
        }
        let total: u64 = rle.iter().map(|&c| c as u64).sum();
        let expected = width as u64 * height as u64;
        if total != expected {
            return Err(Error::Format(format!("run lengths sum to {total}, expected {width}x{height} = {expected}")));
        }

        let mut runs = Vec::with_capacity(rle.len() / 2);
        let mut pos = 0u64;
        for (k, &count) in rle.iter().enumerate() {
            let next = pos + count as u64;
            if k % 2 == 1 && count > 0 {
                match runs.last_mut() {
                    // zero-length background runs make adjacent foreground runs touch
                    Some((_, end)) if *end == pos => *end = next,
                    _ => runs.push((pos, next)),
                }
            }
            pos = next;
        }
        let area: u64 = runs.iter().map(|(s, e)| e - s).sum();
        if area == 0 {
            return Err(Error::Format("mask has no foreground pixels".into()));
        }
        let bbox = runs_bbox(&runs, width as u64);
        Ok(Self { mask_id, label: label.into(), score, width, height, rle, runs, area, bbox })
    }

    pub fn from_bitmap(
        mask_id: u32,
        label: impl Into<String>,
        score: f64,
        width: u32,
        height: u32,
        bits: &[bool],
    ) -> Result<Self> {
        if bits.len() as u64 != width as u64 * height as u64 {
            return Err(Error::Format(format!("bitmap has {} cells, expected {width}x{height}", bits.len())));
        }
        Self::from_rle(mask_id, label, score, width, height, rle_encode(bits))
    }

    pub fn rle(&self) -> &[u32] {
        &self.rle
    }

    pub fn foreground_runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.area
    }

    /// True iff pixel `(floor(x), floor(y))` lies inside the image and is foreground.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        if !(x >= 0.0 && y >= 0.0) {
            return false;
        }
        let (px, py) = (x.floor(), y.floor());
        if px >= self.width as f64 || py >= self.height as f64 {
            return false;
        }
        self.contains_index(py as u64 * self.width as u64 + px as u64)
    }

    fn contains_index(&self, idx: u64) -> bool {
        let i = self.runs.partition_point(|&(_, end)| end <= idx);
        self.runs.get(i).is_some_and(|&(start, _)| start <= idx)
    }

    /// Tightest inclusive box around the foreground.
    pub fn bounding_box(&self) -> BBox {
        self.bbox
    }

    /// Expands the mask into a row-major grid.
    pub fn decode(&self) -> Vec<bool> {
        rle_decode(&self.rle)
    }
}

fn runs_bbox(runs: &[(u64, u64)], width: u64) -> BBox {
    let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0, 0);
    for &(start, end) in runs {
        let last = end - 1;
        let (r0, r1) = (start / width, last / width);
        if r0 == r1 {
            x0 = x0.min(start % width);
            x1 = x1.max(last % width);
        } else {
            x0 = 0;
            x1 = width - 1;
        }
        y0 = y0.min(r0);
        y1 = y1.max(r1);
    }
    BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64)
}

/// Background-first run-length encoding of a flat binary grid.
pub fn rle_encode(bits: &[bool]) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &b in bits {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    if run > 0 || counts.is_empty() {
        counts.push(run);
    }
    counts
}

pub fn rle_decode(counts: &[u32]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(counts.iter().map(|&c| c as usize).sum());
    for (k, &c) in counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(k % 2 == 1, c as usize));
    }
    bits
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDetections {
    pub width: u32,
    pub height: u32,
    pub masks: Vec<InstanceMask>,
}

/// Masks of every image, keyed by image name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub images: BTreeMap<String, ImageDetections>,
}

impl DetectionSet {
    pub fn get(&self, image: &str, mask_id: u32) -> Option<&InstanceMask> {
        self.images.get(image)?.masks.get(mask_id as usize)
    }

    pub fn num_masks(&self) -> usize {
        self.images.values().map(|d| d.masks.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_masks() == 0
    }

    /// Names of images that have no counterpart in the reconstruction.
    pub fn unmatched(&self, recon: &Reconstruction) -> Vec<String> {
        let names = recon.name_index();
        self.images.keys().filter(|n| !names.contains_key(n.as_str())).cloned().collect()
    }

    pub fn to_json(&self) -> String {
        let file = DetectionsFile {
            images: self
                .images
                .iter()
                .map(|(name, d)| ImageEntry {
                    name: name.clone(),
                    width: d.width,
                    height: d.height,
                    masks: d
                        .masks
                        .iter()
                        .map(|m| MaskEntry { label: m.label.clone(), score: m.score, rle: m.rle.clone() })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("detections serialize")
    }

    pub fn from_json(text: &str, opts: &LoadOptions) -> Result<Self> {
        if !(0.0..=1.0).contains(&opts.min_score) {
            return Err(Error::Validation(format!("min_score {} outside [0, 1]", opts.min_score)));
        }
        let file: DetectionsFile = serde_json::from_str(text)?;
        let mut seen = std::collections::HashSet::new();
        for entry in &file.images {
            if !seen.insert(entry.name.as_str()) {
                return Err(Error::Format(format!("duplicate image entry {:?}", entry.name)));
            }
        }
        let decoded: Vec<(String, ImageDetections)> =
            file.images.into_par_iter().map(|entry| decode_image(entry, opts)).collect::<Result<_>>()?;
        Ok(Self { images: decoded.into_iter().collect() })
    }
}

fn decode_image(entry: ImageEntry, opts: &LoadOptions) -> Result<(String, ImageDetections)> {
    let mut masks = Vec::new();
    for (k, m) in entry.masks.into_iter().enumerate() {
        let named = |e: Error| Error::Format(format!("image {:?} mask {k}: {e}", entry.name));
        if !(0.0..=1.0).contains(&m.score) {
            return Err(named(Error::Format(format!("score {} outside [0, 1]", m.score))));
        }
        if m.score < opts.min_score {
            continue;
        }
        if opts.label.as_ref().is_some_and(|l| *l != m.label) {
            continue;
        }
        let id = masks.len() as u32;
        let mask = InstanceMask::from_rle(id, m.label, m.score, entry.width, entry.height, m.rle).map_err(named)?;
        masks.push(mask);
    }
    Ok((entry.name, ImageDetections { width: entry.width, height: entry.height, masks }))
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub min_score: f64,
    /// Keep only masks whose label matches exactly.
    pub label: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { min_score: DEFAULT_MIN_SCORE, label: None }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionsFile {
    images: Vec<ImageEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageEntry {
    name: String,
    width: u32,
    height: u32,
    #[serde(default)]
    masks: Vec<MaskEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskEntry {
    label: String,
    score: f64,
    rle: Vec<u32>,
}

/// Reads a detections file, dropping masks scored below `min_score`.
pub fn load_detections(path: impl AsRef<Path>, min_score: f64) -> Result<DetectionSet> {
    load_detections_with(path, &LoadOptions { min_score, label: None })
}

pub fn load_detections_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<DetectionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DetectionSet::from_json(&text, opts)
}

pub fn write_detections(dets: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dets.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: u32, h: u32, rle: Vec<u32>) -> InstanceMask {
        InstanceMask::from_rle(0, "building", 0.9, w, h, rle).unwrap()
    }

    fn one_image(scores: &[f64]) -> String {
        let masks: Vec<String> =
            scores.iter().map(|s| format!(r#"{{"label":"building","score":{s},"rle":[1,2,1]}}"#)).collect();
        format!(r#"{{"images":[{{"name":"a.jpg","width":2,"height":2,"masks":[{}]}}]}}"#, masks.join(","))
    }

    #[test]
    fn decode_background_first() {
        let m = mask(4, 2, vec![3, 2, 3]);
        let bits = m.decode();
        let fg: Vec<usize> = bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect();
        assert_eq!(fg, vec![3, 4]);
        assert_eq!(m.area(), 2);
    }

    #[test]
    fn contains_cases() {
        let full = mask(10, 10, vec![0, 100]);
        assert!(full.contains(5.7, 3.2));
        assert!(!full.contains(-1.0, 0.0));
        assert!(!full.contains(10.0, 0.0));
        assert!(!full.contains(f64::NAN, 0.0));

        // foreground at (0,0) and (1,1)
        let checker = mask(2, 2, vec![0, 1, 2, 1]);
        assert!(!checker.contains(1.0, 0.0));
        assert!(checker.contains(0.2, 0.9));
        assert!(checker.contains(1.5, 1.5));
    }

    #[test]
    fn bounding_boxes() {
        let mut bits = vec![false; 10 * 10];
        bits[7 * 10 + 3] = true;
        let m = InstanceMask::from_bitmap(0, "b", 1.0, 10, 10, &bits).unwrap();
        assert_eq!(m.bounding_box(), BBox::new(3.0, 7.0, 3.0, 7.0));

        let full = mask(6, 4, vec![0, 24]);
        assert_eq!(full.bounding_box(), BBox::new(0.0, 0.0, 5.0, 3.0));

        let mut bits = vec![false; 10 * 10];
        bits[5 * 10 + 2] = true;
        bits[10 + 9] = true;
        let m = InstanceMask::from_bitmap(0, "b", 1.0, 10, 10, &bits).unwrap();
        assert_eq!(m.bounding_box(), BBox::new(2.0, 1.0, 9.0, 5.0));
    }

    #[test]
    fn invalid_masks_rejected() {
        assert!(InstanceMask::from_rle(0, "b", 0.9, 4, 2, vec![3, 2, 2]).is_err());
        assert!(InstanceMask::from_rle(0, "b", 0.9, 4, 2, vec![8]).is_err());
        assert!(InstanceMask::from_rle(0, "b", 1.5, 4, 2, vec![3, 2, 3]).is_err());
    }

    #[test]
    fn score_filtering() {
        let dets = DetectionSet::from_json(&one_image(&[0.9, 0.25, 0.4]), &LoadOptions { min_score: 0.3, label: None })
            .unwrap();
        let masks = &dets.images["a.jpg"].masks;
        assert_eq!(masks.len(), 2);
        assert_eq!(masks.iter().map(|m| m.mask_id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(masks[1].score, 0.4);
    }

    #[test]
    fn label_filter_is_exact() {
        let text = r#"{"images":[{"name":"a","width":2,"height":1,"masks":[
            {"label":"building","score":0.9,"rle":[0,2]},
            {"label":"buildings","score":0.9,"rle":[0,2]}]}]}"#;
        let dets =
            DetectionSet::from_json(text, &LoadOptions { min_score: 0.0, label: Some("building".into()) }).unwrap();
        assert_eq!(dets.num_masks(), 1);
    }

    #[test]
    fn empty_file() {
        let dets = DetectionSet::from_json(r#"{"images": []}"#, &LoadOptions::default()).unwrap();
        assert!(dets.images.is_empty());
    }

    #[test]
    fn format_errors() {
        let text = r#"{"images":[{"name":"a","width":2,"height":2,"masks":[
            {"label":"b","score":0.9,"rle":[0,2]}]}]}"#;
        let err = DetectionSet::from_json(text, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("\"a\"") && err.contains("mask 0"), "{err}");

        let text = r#"{"images":[{"name":"a","width":1,"height":1,"masks":[]},
                                 {"name":"a","width":1,"height":1,"masks":[]}]}"#;
        assert!(matches!(DetectionSet::from_json(text, &LoadOptions::default()), Err(Error::Format(_))));
    }

    #[test]
    fn unmatched_images_are_reported() {
        let dets = DetectionSet::from_json(&one_image(&[0.9]), &LoadOptions::default()).unwrap();
        let recon = Reconstruction::default();
        assert_eq!(dets.unmatched(&recon), vec!["a.jpg".to_string()]);
    }

    #[test]
    fn json_round_trip() {
        let dets = DetectionSet::from_json(&one_image(&[0.9, 0.5]), &LoadOptions::default()).unwrap();
        let back = DetectionSet::from_json(&dets.to_json(), &LoadOptions { min_score: 0.0, label: None }).unwrap();
        assert_eq!(back, dets);
    }

    fn bitmap() -> impl Strategy<Value = (u32, u32, Vec<bool>)> {
        (1u32..12, 1u32..12)
            .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), (w * h) as usize)))
    }

    proptest! {
        #[test]
        fn rle_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            prop_assert_eq!(rle_decode(&rle_encode(&bits)), bits);
        }

        #[test]
        fn contains_matches_naive_decode((w, h, mut bits) in bitmap(), x in -2.0f64..14.0, y in -2.0f64..14.0) {
            bits[0] = true;
            let m = InstanceMask::from_bitmap(0, "b", 0.5, w, h, &bits).unwrap();
            let naive = x >= 0.0 && y >= 0.0 && (x.floor() as u32) < w && (y.floor() as u32) < h
                && bits[(y.floor() as u32 * w + x.floor() as u32) as usize];
            prop_assert_eq!(m.contains(x, y), naive);
            prop_assert_eq!(m.decode(), bits.clone());

            let fg: Vec<(u32, u32)> = (0..w * h).filter(|&i| bits[i as usize]).map(|i| (i % w, i / w)).collect();
            let bb = m.bounding_box();
            prop_assert_eq!(bb.x_min as u32, fg.iter().map(|p| p.0).min().unwrap());
            prop_assert_eq!(bb.x_max as u32, fg.iter().map(|p| p.0).max().unwrap());
            prop_assert_eq!(bb.y_min as u32, fg.iter().map(|p| p.1).min().unwrap());
            prop_assert_eq!(bb.y_max as u32, fg.iter().map(|p| p.1).max().unwrap());
        }

        #[test]
        fn raising_min_score_never_adds(scores in proptest::collection::vec(0.0f64..=1.0, 0..8), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let text = one_image(&scores);
            let a = DetectionSet::from_json(&text, &LoadOptions { min_score: lo, label: None }).unwrap();
            let b = DetectionSet::from_json(&text, &LoadOptions { min_score: hi, label: None }).unwrap();
            prop_assert!(b.num_masks() <= a.num_masks());
        }
    }
}
