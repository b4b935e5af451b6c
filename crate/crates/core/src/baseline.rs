//! Frame-to-frame 2D IoU tracker used as the comparison baseline.
//!
//! Masks are linked only to masks of the immediately preceding frame. A track
//! that finds no partner in the next frame is closed for good.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::masks::{DetectionSet, InstanceMask};
use crate::predictions::{PredictedInstance, PredictionFile};

pub const DEFAULT_TAU_IOU: f64 = 0.5;

/// Pixel IoU of two masks of the same size.
pub fn mask_iou(a: &InstanceMask, b: &InstanceMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(a.width, a.height, b.width, b.height));
    }
    let (ra, rb) = (a.foreground_runs(), b.foreground_runs());
    let (mut i, mut j, mut inter) = (0, 0, 0u64);
    while i < ra.len() && j < rb.len() {
        let lo = ra[i].0.max(rb[j].0);
        let hi = ra[i].1.min(rb[j].1);
        if hi > lo {
            inter += hi - lo;
        }
        if ra[i].1 <= rb[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = a.area() + b.area() - inter;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// One frame of the tracker input.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub index: usize,
    pub image: &'a str,
    pub masks: &'a [InstanceMask],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackStep {
    pub frame_index: usize,
    pub image: String,
    pub mask_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track2D {
    pub track_id: u32,
    pub entries: Vec<TrackStep>,
}

/// Tracks masks through one ordered frame sequence.
pub fn track_iou(frames: &[Frame<'_>], tau_iou: f64) -> Result<Vec<Track2D>> {
    let mut tracks = Vec::new();
    extend_tracks(&mut tracks, frames, tau_iou)?;
    Ok(tracks)
}

/// Tracks each sequence independently; no track spans two sequences.
pub fn track_sequences(sequences: &[Vec<Frame<'_>>], tau_iou: f64) -> Result<Vec<Track2D>> {
    let mut tracks = Vec::new();
    for seq in sequences {
        extend_tracks(&mut tracks, seq, tau_iou)?;
    }
    Ok(tracks)
}

fn extend_tracks(tracks: &mut Vec<Track2D>, frames: &[Frame<'_>], tau_iou: f64) -> Result<()> {
    if !(tau_iou > 0.0 && tau_iou <= 1.0) {
        return Err(Error::Validation(format!("tau_iou {tau_iou} outside (0, 1]")));
    }

    // candidate pairs for every consecutive frame pair
    let links: Vec<Vec<(usize, usize)>> =
        frames.par_windows(2).map(|w| greedy_links(w[0].masks, w[1].masks, tau_iou)).collect::<Result<_>>()?;

    let start = |tracks: &mut Vec<Track2D>, frame: &Frame<'_>, k: usize| -> usize {
        let id = tracks.len();
        tracks.push(Track2D {
            track_id: id as u32,
            entries: vec![TrackStep {
                frame_index: frame.index,
                image: frame.image.to_owned(),
                mask_id: frame.masks[k].mask_id,
            }],
        });
        id
    };

    let Some(first) = frames.first() else { return Ok(()) };
    // track holding each mask of the previous frame
    let mut owner: Vec<usize> = (0..first.masks.len()).map(|k| start(tracks, first, k)).collect();

    for (w, frame) in frames.iter().enumerate().skip(1) {
        let mut next: Vec<Option<usize>> = vec![None; frame.masks.len()];
        for &(prev, cur) in &links[w - 1] {
            next[cur] = Some(owner[prev]);
        }
        owner = next
            .into_iter()
            .enumerate()
            .map(|(k, t)| match t {
                Some(t) => {
                    tracks[t].entries.push(TrackStep {
                        frame_index: frame.index,
                        image: frame.image.to_owned(),
                        mask_id: frame.masks[k].mask_id,
                    });
                    t
                }
                None => start(tracks, frame, k),
            })
            .collect();
    }
    Ok(())
}

/// Accepts pairs in descending IoU order while both sides are free.
fn greedy_links(prev: &[InstanceMask], cur: &[InstanceMask], tau_iou: f64) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in cur.iter().enumerate() {
            let iou = mask_iou(a, b)?;
            if iou >= tau_iou {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut used_prev = vec![false; prev.len()];
    let mut used_cur = vec![false; cur.len()];
    let mut links = Vec::new();
    for (_, i, j) in pairs {
        if !used_prev[i] && !used_cur[j] {
            used_prev[i] = true;
            used_cur[j] = true;
            links.push((i, j));
        }
    }
    Ok(links)
}

/// Reads a frame order file: one image name per line, blank lines separate sequences.
pub fn parse_frame_order(text: &str) -> Vec<Vec<String>> {
    let mut sequences = vec![Vec::new()];
    for line in text.lines() {
        let name = line.trim();
        if name.is_empty() {
            if !sequences.last().unwrap().is_empty() {
                sequences.push(Vec::new());
            }
        } else {
            sequences.last_mut().unwrap().push(name.to_owned());
        }
    }
    if sequences.last().unwrap().is_empty() {
        sequences.pop();
    }
    sequences
}

pub fn load_frame_order(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_frame_order(&text))
}

/// Runs the tracker over named sequences, taking masks from `dets`. Frames
/// without detections are kept and break every open track.
pub fn track_detections(dets: &DetectionSet, order: &[Vec<String>], tau_iou: f64) -> Result<Vec<Track2D>> {
    let mut index = 0;
    let sequences: Vec<Vec<Frame<'_>>> = order
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|name| {
                    let frame = Frame {
                        index,
                        image: name.as_str(),
                        masks: dets.images.get(name).map(|d| d.masks.as_slice()).unwrap_or(&[]),
                    };
                    index += 1;
                    frame
                })
                .collect()
        })
        .collect();
    track_sequences(&sequences, tau_iou)
}

/// Tracks in the shared instance schema, without 3D points.
pub fn tracks_to_predictions(tracks: &[Track2D]) -> PredictionFile {
    PredictionFile {
        instances: tracks
            .iter()
            .map(|t| PredictedInstance {
                id: t.track_id,
                masks: t.entries.iter().map(|e| (e.image.clone(), e.mask_id)).collect(),
                num_points: 0,
            })
            .collect(),
        ..Default::default()
    }
}
