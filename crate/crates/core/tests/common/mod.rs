//! Independent reference implementations and random fixtures for the
//! integration tests. Nothing here calls into the code it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use masklift::association::{BuildingInstance, MaskRef, PointSet, SegmentSupport};
use masklift::colmap::PointId;
use masklift::evaluation::GtBox;
use masklift::masks::{BBox, DetectionSet, ImageDetections, InstanceMask};
use masklift::predictions::{PredictedInstance, PredictionFile};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Group = (Vec<MaskRef>, BTreeSet<PointId>);

fn jac(a: &BTreeSet<PointId>, b: &BTreeSet<PointId>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy seeded clustering with repeated full passes over the remaining masks.
pub fn naive_cluster(supports: &[SegmentSupport], tau_j: f64) -> Vec<Group> {
    let mut pool: BTreeMap<MaskRef, BTreeSet<PointId>> =
        supports.iter().map(|s| (s.mask_ref, s.point_ids.iter().collect())).collect();
    let mut out = Vec::new();
    loop {
        // largest support first, lowest ref on ties
        let mut best: Option<(MaskRef, usize)> = None;
        for (r, pts) in &pool {
            if !pts.is_empty() && best.is_none_or(|(_, n)| pts.len() > n) {
                best = Some((*r, pts.len()));
            }
        }
        let Some((seed, _)) = best else { break };
        let mut points = pool.remove(&seed).unwrap();
        let mut members = vec![seed];
        loop {
            let mut added = false;
            let refs: Vec<MaskRef> = pool.keys().copied().collect();
            for r in refs {
                if jac(&pool[&r], &points) >= tau_j {
                    let pts = pool.remove(&r).unwrap();
                    points.extend(pts);
                    members.push(r);
                    added = true;
                }
            }
            if !added {
                break;
            }
        }
        members.sort();
        out.push((members, points));
    }
    out
}

/// Pairwise merging exactly as written: find the first qualifying pair,
/// merge, start over from the beginning.
pub fn naive_merge(groups: &[Group], tau_m: f64) -> Vec<Group> {
    let mut list: Vec<Group> = groups.to_vec();
    'restart: loop {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                if jac(&list[i].1, &list[j].1) >= tau_m {
                    let (m, p) = list.remove(j);
                    list[i].0.extend(m);
                    list[i].0.sort();
                    list[i].1.extend(p);
                    continue 'restart;
                }
            }
        }
        break;
    }
    list.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.first().cmp(&b.0.first())));
    list
}

pub fn as_groups(instances: &[BuildingInstance]) -> Vec<Group> {
    let mut v: Vec<&BuildingInstance> = instances.iter().collect();
    v.sort_by_key(|b| b.instance_id);
    v.iter().map(|b| (b.members.clone(), b.points.iter().collect())).collect()
}

/// Supports drawn from a few latent objects with overlapping point ranges,
/// some cross-object contamination and some empty masks.
pub fn random_supports(rng: &mut ChaCha8Rng) -> Vec<SegmentSupport> {
    let n_masks = rng.random_range(1..=60);
    let n_points: u64 = rng.random_range(20..=500);
    let n_objects = rng.random_range(1..=6u64);
    let objects: Vec<(u64, u64)> = (0..n_objects)
        .map(|_| {
            let len = rng.random_range(5..=n_points.max(6) / 2);
            let start = rng.random_range(0..n_points - len.min(n_points - 1));
            (start, (start + len).min(n_points))
        })
        .collect();
    let mut next_mask: BTreeMap<u32, u32> = BTreeMap::new();
    (0..n_masks)
        .map(|_| {
            let image_id = rng.random_range(1..=20);
            let mask_id = {
                let n = next_mask.entry(image_id).or_default();
                *n += 1;
                *n - 1
            };
            let mut ids: Vec<PointId> = Vec::new();
            if rng.random::<f64>() >= 0.05 {
                let (a, b) = objects[rng.random_range(0..objects.len())];
                let keep = rng.random_range(0.2..1.0);
                ids.extend((a..b).filter(|_| rng.random::<f64>() < keep));
                if rng.random::<f64>() < 0.15 {
                    let (c, d) = objects[rng.random_range(0..objects.len())];
                    ids.extend((c..d).filter(|_| rng.random::<f64>() < 0.1));
                }
            }
            let point_ids: PointSet = ids.into_iter().map(|p| p + 1).collect();
            SegmentSupport { mask_ref: MaskRef::new(image_id, mask_id), keypoint_count: point_ids.len(), point_ids }
        })
        .collect()
}

fn rect_mask(id: u32, w: u32, h: u32, r: [u32; 4]) -> InstanceMask {
    let bits: Vec<bool> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            x >= r[0] && x <= r[2] && y >= r[1] && y <= r[3]
        })
        .collect();
    InstanceMask::from_bitmap(id, "building", 0.9, w, h, &bits).unwrap()
}

fn random_rect(rng: &mut ChaCha8Rng, w: u32, h: u32) -> [u32; 4] {
    let x0 = rng.random_range(0..w);
    let y0 = rng.random_range(0..h);
    [x0, y0, rng.random_range(x0..w), rng.random_range(y0..h)]
}

pub struct EvalFixture {
    pub dets: DetectionSet,
    pub gt: Vec<GtBox>,
    pub preds: PredictionFile,
}

/// Rectangle masks, ground-truth boxes near some of them, and a random
/// partition of the masks into predicted instances.
pub fn random_eval_fixture(rng: &mut ChaCha8Rng) -> EvalFixture {
    let (w, h) = (24, 24);
    let n_frames = rng.random_range(1..=8);
    let mut dets = DetectionSet::default();
    let mut gt = Vec::new();
    let mut all_masks = Vec::new();
    for f in 0..n_frames {
        let name = format!("f{f:02}.jpg");
        let n = rng.random_range(0..=4);
        let rects: Vec<[u32; 4]> = (0..n).map(|_| random_rect(rng, w, h)).collect();
        let masks: Vec<InstanceMask> = rects.iter().enumerate().map(|(k, r)| rect_mask(k as u32, w, h, *r)).collect();
        for gt_id in 0..rng.random_range(0..=3u64) {
            if rng.random::<f64>() < 0.3 {
                continue;
            }
            let r = if !rects.is_empty() && rng.random::<f64>() < 0.7 {
                let r = rects[rng.random_range(0..rects.len())];
                let mut j = |v: u32, hi: u32| (v as i64 + rng.random_range(-2..=2)).clamp(0, hi as i64 - 1) as f64;
                let (a, b, c, d) = (j(r[0], w), j(r[1], h), j(r[2], w), j(r[3], h));
                [a.min(c), b.min(d), a.max(c), b.max(d)]
            } else {
                random_rect(rng, w, h).map(f64::from)
            };
            gt.push(GtBox { frame: name.clone(), gt_id, bbox: BBox::new(r[0], r[1], r[2], r[3]) });
        }
        all_masks.extend((0..n).map(|k| (name.clone(), k as u32)));
        dets.images.insert(name, ImageDetections { width: w, height: h, masks });
    }
    all_masks.shuffle(rng);
    let k = rng.random_range(1..=5usize);
    let mut ids: Vec<u32> = (0..20).collect();
    ids.shuffle(rng);
    let mut instances: Vec<PredictedInstance> =
        (0..k).map(|i| PredictedInstance { id: ids[i], masks: Vec::new(), num_points: 0 }).collect();
    let mut unassigned = Vec::new();
    for m in all_masks {
        if rng.random::<f64>() < 0.15 {
            unassigned.push(m);
        } else {
            instances[rng.random_range(0..k)].masks.push(m);
        }
    }
    for i in &mut instances {
        i.masks.sort();
    }
    EvalFixture { dets, gt, preds: PredictionFile { instances, point_labels: BTreeMap::new(), unassigned } }
}

/// Mask supports by full decode and per-pixel lookup.
pub fn naive_supports(recon: &masklift::colmap::Reconstruction, dets: &DetectionSet) -> Vec<SegmentSupport> {
    let mut out = Vec::new();
    for image in recon.images.values() {
        let Some(d) = dets.images.get(&image.name) else { continue };
        for m in &d.masks {
            let bits = m.decode();
            let mut ids = BTreeSet::new();
            let mut count = 0;
            for k in &image.keypoints {
                let (x, y) = (k.x.floor() as i64, k.y.floor() as i64);
                if x < 0 || y < 0 || x >= m.width as i64 || y >= m.height as i64 {
                    continue;
                }
                if bits[(y * m.width as i64 + x) as usize] {
                    count += 1;
                    ids.extend(k.point3d_id);
                }
            }
            out.push(SegmentSupport {
                mask_ref: MaskRef::new(image.image_id, m.mask_id),
                point_ids: ids.into_iter().collect(),
                keypoint_count: count,
            });
        }
    }
    out.sort_by_key(|s| s.mask_ref);
    out
}

/// Whole pipeline by the reference routines: kept groups in id order and point labels.
pub fn naive_associate(
    recon: &masklift::colmap::Reconstruction,
    dets: &DetectionSet,
    tau_j: f64,
    tau_m: f64,
    n_min: usize,
) -> (Vec<Group>, BTreeMap<PointId, u32>) {
    let supports = naive_supports(recon, dets);
    let merged = naive_merge(&naive_cluster(&supports, tau_j), tau_m);
    let kept: Vec<Group> = merged.into_iter().filter(|g| g.1.len() > n_min).collect();
    let by_ref: BTreeMap<MaskRef, &SegmentSupport> = supports.iter().map(|s| (s.mask_ref, s)).collect();
    let mut labels = BTreeMap::new();
    let all: BTreeSet<PointId> = kept.iter().flat_map(|g| g.1.iter().copied()).collect();
    for p in all {
        let mut best: Option<(u32, usize)> = None;
        for (id, g) in kept.iter().enumerate() {
            let votes = g.0.iter().filter(|r| by_ref[r].point_ids.contains(p)).count();
            if votes > 0 && best.is_none_or(|(_, v)| votes > v) {
                best = Some((id as u32, votes));
            }
        }
        labels.insert(p, best.unwrap().0);
    }
    (kept, labels)
}
