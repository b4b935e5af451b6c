//! Mask association through shared 3D points.
//!
//! Every mask is lifted to the set of 3D point ids whose tracks pass through a
//! keypoint inside the mask. Masks are then grown into building instances by
//! greedy seeded Jaccard clustering, instances with enough mutual overlap are
//! merged, small instances are dropped, and every remaining 3D point gets the
//! instance that most of its supporting masks belong to.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colmap::{ImageId, PointId, Reconstruction};
use crate::error::{Error, Result};
use crate::masks::DetectionSet;
use crate::predictions::{PredictedInstance, PredictionFile};

/// Identifies one mask: the reconstruction image it lies in and its index there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaskRef {
    pub image_id: ImageId,
    pub mask_id: u32,
}

impl MaskRef {
    pub fn new(image_id: ImageId, mask_id: u32) -> Self {
        Self { image_id, mask_id }
    }
}

/// Sorted, duplicate-free set of 3D point ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PointSet(Vec<PointId>);

impl PointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sorted_unique(ids: Vec<PointId>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        Self(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = PointId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[PointId] {
        &self.0
    }

    pub fn intersection_len(&self, other: &PointSet) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        PointSet(out)
    }
}

impl FromIterator<PointId> for PointSet {
    fn from_iter<I: IntoIterator<Item = PointId>>(iter: I) -> Self {
        let mut v: Vec<PointId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        PointSet(v)
    }
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 0.
pub fn jaccard(a: &PointSet, b: &PointSet) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// The 3D points seen through one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSupport {
    pub mask_ref: MaskRef,
    pub point_ids: PointSet,
    /// Keypoints inside the mask, with or without a 3D point.
    pub keypoint_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingInstance {
    pub instance_id: u32,
    /// Member masks, ascending.
    pub members: Vec<MaskRef>,
    pub points: PointSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Mask-to-group Jaccard threshold.
    pub tau_j: f64,
    /// Instance-to-instance merge threshold.
    pub tau_m: f64,
    /// Instances with at most this many points are dropped.
    pub n_min: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self { tau_j: 0.20, tau_m: 0.15, n_min: 10 }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_j > 0.0 && self.tau_j <= 1.0) {
            return Err(Error::Validation(format!("tau_j {} outside (0, 1]", self.tau_j)));
        }
        if !(self.tau_m > 0.0 && self.tau_m <= 1.0) {
            return Err(Error::Validation(format!("tau_m {} outside (0, 1]", self.tau_m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationResult {
    pub instances: Vec<BuildingInstance>,
    pub point_labels: std::collections::BTreeMap<PointId, u32>,
    /// Masks left out of every instance, ascending.
    pub unassigned_masks: Vec<MaskRef>,
    /// Masks on images the reconstruction does not contain, as `(image name, mask id)`.
    pub unmatched_masks: Vec<(String, u32)>,
}

impl AssociationResult {
    pub fn instance(&self, id: u32) -> Option<&BuildingInstance> {
        self.instances.iter().find(|b| b.instance_id == id)
    }

    /// Converts to the name-based prediction schema shared with the baseline tracker.
    pub fn to_predictions(&self, recon: &Reconstruction) -> PredictionFile {
        let name = |r: &MaskRef| (recon.images[&r.image_id].name.clone(), r.mask_id);
        let mut unassigned: Vec<(String, u32)> = self.unassigned_masks.iter().map(name).collect();
        unassigned.extend(self.unmatched_masks.iter().cloned());
        unassigned.sort();
        PredictionFile {
            instances: self
                .instances
                .iter()
                .map(|b| PredictedInstance {
                    id: b.instance_id,
                    masks: b.members.iter().map(name).collect(),
                    num_points: b.points.len(),
                })
                .collect(),
            point_labels: self.point_labels.clone(),
            unassigned,
        }
    }
}

/// Lifts every mask on a reconstructed image to its 3D point support.
///
/// Masks on images missing from the reconstruction produce no support. A
/// keypoint inside several overlapping masks counts for each of them.
pub fn build_supports(recon: &Reconstruction, dets: &DetectionSet) -> Vec<SegmentSupport> {
    let names = recon.name_index();
    let work: Vec<_> = dets
        .images
        .iter()
        .filter_map(|(name, d)| {
            let image_id = *names.get(name.as_str())?;
            Some((&recon.images[&image_id], d))
        })
        .flat_map(|(image, d)| d.masks.iter().map(move |m| (image, m)))
        .collect();

    let mut supports: Vec<SegmentSupport> = work
        .par_iter()
        .map(|&(image, mask)| {
            let bb = mask.bounding_box();
            let mut keypoint_count = 0;
            let mut ids = Vec::new();
            for kp in &image.keypoints {
                // cheap reject before the run lookup
                if kp.x < bb.x_min || kp.y < bb.y_min || kp.x >= bb.x_max + 1.0 || kp.y >= bb.y_max + 1.0 {
                    continue;
                }
                if mask.contains(kp.x, kp.y) {
                    keypoint_count += 1;
                    if let Some(id) = kp.point3d_id {
                        ids.push(id);
                    }
                }
            }
            SegmentSupport {
                mask_ref: MaskRef::new(image.image_id, mask.mask_id),
                point_ids: ids.into_iter().collect(),
                keypoint_count,
            }
        })
        .collect();
    supports.sort_by_key(|s| s.mask_ref);
    supports
}

/// Greedy seeded clustering of masks by Jaccard similarity to a growing group.
///
/// The unassigned mask with the most points seeds each instance. Unassigned
/// masks are then scanned in ascending [`MaskRef`] order and joined when their
/// similarity to the group's current point set reaches `tau_j`; scanning
/// repeats until a pass adds nothing. Ties between equally sized seeds go to
/// the lowest mask. Masks without points never join an instance. Instance ids
/// follow seed order.
pub fn cluster_masks(supports: &[SegmentSupport], tau_j: f64) -> Vec<BuildingInstance> {
    let mut order: Vec<usize> = (0..supports.len()).collect();
    order.sort_by_key(|&i| supports[i].mask_ref);
    let sorted: Vec<&SegmentSupport> = order.iter().map(|&i| &supports[i]).collect();

    // dense point indices, ascending with point id
    let all_points: Vec<PointId> = {
        let mut v: Vec<PointId> = sorted.iter().flat_map(|s| s.point_ids.iter()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let dense: Vec<Vec<u32>> = sorted
        .iter()
        .map(|s| s.point_ids.iter().map(|p| all_points.binary_search(&p).unwrap() as u32).collect())
        .collect();
    let mut masks_of_point: Vec<Vec<u32>> = vec![Vec::new(); all_points.len()];
    for (m, pts) in dense.iter().enumerate() {
        for &p in pts {
            masks_of_point[p as usize].push(m as u32);
        }
    }

    let mut seeds: Vec<usize> = (0..sorted.len()).filter(|&i| !dense[i].is_empty()).collect();
    seeds.sort_by_key(|&i| std::cmp::Reverse(dense[i].len()));

    let mut assigned = vec![false; sorted.len()];
    let mut in_group = vec![false; all_points.len()];
    let mut instances = Vec::new();

    for seed in seeds {
        if assigned[seed] {
            continue;
        }
        let mut group_points: Vec<u32> = Vec::new();
        let mut members = vec![seed];
        let mut candidates: BTreeSet<usize> = BTreeSet::new();
        assigned[seed] = true;

        let grow = Grow { dense: &dense, masks_of_point: &masks_of_point };
        grow.add(seed, &mut in_group, &mut group_points, &mut candidates, &assigned);

        // Masks sharing no point with the group score 0 and are skipped; a
        // pass over the candidate set is therefore a pass over all masks.
        loop {
            let mut changed = false;
            let mut cursor = 0usize;
            while let Some(&m) = candidates.range(cursor..).next() {
                cursor = m + 1;
                if assigned[m] {
                    candidates.remove(&m);
                    continue;
                }
                let pts = &dense[m];
                let inter = pts.iter().filter(|&&p| in_group[p as usize]).count();
                let union = pts.len() + group_points.len() - inter;
                let j = inter as f64 / union as f64;
                if j >= tau_j {
                    assigned[m] = true;
                    candidates.remove(&m);
                    members.push(m);
                    changed = true;
                    // growth is visible to the rest of this pass
                    grow.add(m, &mut in_group, &mut group_points, &mut candidates, &assigned);
                }
            }
            if !changed {
                break;
            }
        }

        for &p in &group_points {
            in_group[p as usize] = false;
        }
        group_points.sort_unstable();
        members.sort_unstable();
        instances.push(BuildingInstance {
            instance_id: instances.len() as u32,
            members: members.iter().map(|&m| sorted[m].mask_ref).collect(),
            points: PointSet::from_sorted_unique(group_points.iter().map(|&p| all_points[p as usize]).collect()),
        });
    }
    instances
}

struct Grow<'a> {
    dense: &'a [Vec<u32>],
    masks_of_point: &'a [Vec<u32>],
}

impl Grow<'_> {
    /// Adds mask `m`'s points to the group and queues masks touching new points.
    fn add(
        &self,
        m: usize,
        in_group: &mut [bool],
        group_points: &mut Vec<u32>,
        candidates: &mut BTreeSet<usize>,
        assigned: &[bool],
    ) {
        for &p in &self.dense[m] {
            if !in_group[p as usize] {
                in_group[p as usize] = true;
                group_points.push(p);
                for &other in &self.masks_of_point[p as usize] {
                    if !assigned[other as usize] {
                        candidates.insert(other as usize);
                    }
                }
            }
        }
    }
}

/// Repeatedly merges the first pair (in ascending id order) whose point sets
/// overlap with Jaccard at least `tau_m`, restarting the scan after every
/// merge, until a full scan finds nothing. The merged instance takes the
/// lower position. Final ids are assigned by descending point count, ties
/// going to the instance with the lowest member mask.
pub fn merge_instances(instances: &[BuildingInstance], tau_m: f64) -> Vec<BuildingInstance> {
    struct Slot {
        version: usize,
        members: Vec<MaskRef>,
        points: PointSet,
    }
    let mut sorted: Vec<&BuildingInstance> = instances.iter().collect();
    sorted.sort_by_key(|b| b.instance_id);
    let mut list: Vec<Slot> = sorted
        .iter()
        .enumerate()
        .map(|(k, b)| Slot { version: k, members: b.members.clone(), points: b.points.clone() })
        .collect();
    let mut next_version = list.len();

    // Pair outcomes depend only on the two point sets, so a pair of unchanged
    // instances never needs a second look. After a merge into position p, all
    // pairs before p in scan order that do not touch p are known negatives.
    let mut negatives: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut resume: Option<usize> = None;

    loop {
        let n = list.len();
        let mut test = |a: usize, b: usize, list: &[Slot]| -> bool {
            let key = (list[a].version, list[b].version);
            if negatives.contains(&key) {
                return false;
            }
            let hit = jaccard(&list[a].points, &list[b].points) >= tau_m;
            if !hit {
                negatives.insert(key);
            }
            hit
        };
        let mut found = None;
        let first_row = match resume {
            Some(p) => {
                found = (0..p).find(|&a| test(a, p, &list)).map(|a| (a, p));
                p
            }
            None => 0,
        };
        if found.is_none() {
            'rows: for a in first_row..n {
                for b in a + 1..n {
                    if test(a, b, &list) {
                        found = Some((a, b));
                        break 'rows;
                    }
                }
            }
        }
        let Some((u, v)) = found else { break };
        let removed = list.remove(v);
        let keep = &mut list[u];
        keep.points = keep.points.union(&removed.points);
        keep.members.extend(removed.members);
        keep.members.sort_unstable();
        keep.version = next_version;
        next_version += 1;
        resume = Some(u);
    }

    finalize_ids(
        list.into_iter().map(|s| BuildingInstance { instance_id: 0, members: s.members, points: s.points }).collect(),
    )
}

pub(crate) fn finalize_ids(mut out: Vec<BuildingInstance>) -> Vec<BuildingInstance> {
    out.sort_by(|a, b| b.points.len().cmp(&a.points.len()).then_with(|| a.members.first().cmp(&b.members.first())));
    for (k, b) in out.iter_mut().enumerate() {
        b.instance_id = k as u32;
    }
    out
}

/// Drops instances with at most `n_min` points and labels each remaining
/// point with the instance whose members see it most often (lowest id wins
/// ties). Masks outside every kept instance are reported as unassigned.
pub fn filter_and_label(
    instances: &[BuildingInstance],
    supports: &[SegmentSupport],
    n_min: usize,
) -> AssociationResult {
    let mut kept: Vec<BuildingInstance> = instances.iter().filter(|b| b.points.len() > n_min).cloned().collect();
    kept.sort_by_key(|b| b.instance_id);

    let by_ref: HashMap<MaskRef, &SegmentSupport> = supports.iter().map(|s| (s.mask_ref, s)).collect();

    let votes: Vec<HashMap<PointId, u32>> = kept
        .par_iter()
        .map(|b| {
            let mut counts: HashMap<PointId, u32> = HashMap::new();
            for m in &b.members {
                if let Some(s) = by_ref.get(m) {
                    for p in s.point_ids.iter() {
                        *counts.entry(p).or_default() += 1;
                    }
                }
            }
            counts
        })
        .collect();

    let mut best: HashMap<PointId, (u32, u32)> = HashMap::new();
    for (b, counts) in kept.iter().zip(&votes) {
        for (&p, &c) in counts {
            match best.get(&p) {
                Some(&(_, bc)) if bc >= c => {}
                _ => {
                    best.insert(p, (b.instance_id, c));
                }
            }
        }
    }
    let point_labels = best.into_iter().map(|(p, (id, _))| (p, id)).collect();

    let member_of: std::collections::HashSet<MaskRef> = kept.iter().flat_map(|b| b.members.iter().copied()).collect();
    let mut unassigned_masks: Vec<MaskRef> =
        supports.iter().map(|s| s.mask_ref).filter(|m| !member_of.contains(m)).collect();
    unassigned_masks.sort_unstable();
    unassigned_masks.dedup();

    AssociationResult { instances: kept, point_labels, unassigned_masks, unmatched_masks: Vec::new() }
}

/// Runs the full association: supports, clustering, merging, filtering and labeling.
pub fn associate(recon: &Reconstruction, dets: &DetectionSet, config: &AssociationConfig) -> Result<AssociationResult> {
    config.validate()?;
    let supports = build_supports(recon, dets);
    let clustered = cluster_masks(&supports, config.tau_j);
    let merged = merge_instances(&clustered, config.tau_m);
    let mut result = filter_and_label(&merged, &supports, config.n_min);

    let names = recon.name_index();
    result.unmatched_masks = dets
        .images
        .iter()
        .filter(|(name, _)| !names.contains_key(name.as_str()))
        .flat_map(|(name, d)| d.masks.iter().map(move |m| (name.clone(), m.mask_id)))
        .collect();
    log::info!(
        "{} supports, {} clusters, {} merged, {} kept",
        supports.len(),
        clustered.len(),
        merged.len(),
        result.instances.len()
    );
    Ok(result)
}
