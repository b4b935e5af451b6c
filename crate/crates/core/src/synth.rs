//! Synthetic street scenes with known ground truth.
//!
//! Buildings are disjoint point clouds on a facade plane running along the x
//! axis. Each sequence is a camera pass along the street at its own height and
//! heading. Every visible point becomes a keypoint (with optional pixel
//! noise), observations are chained into tracks, and every building that is
//! visible enough in a frame gets one mask covering its keypoints. The scene
//! knows which building every point and mask belongs to.
//!
//! World axes: x along the street, y down, z from the cameras towards the
//! facades. Poses follow the COLMAP convention `x_cam = R * x_world + t`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::association::AssociationResult;
use crate::colmap::{ImageId, ImageRecord, Keypoint2D, Point3D, PointId, Reconstruction, TrackEntry};
use crate::error::{Error, Result};
use crate::evaluation::GtBox;
use crate::masks::{BBox, DetectionSet, ImageDetections, InstanceMask};

pub use crate::colmap::write_model;

const BUILDING_WIDTH: f64 = 8.0;
const BUILDING_GAP: f64 = 4.0;
const FACADE_DEPTH: f64 = 25.0;
const FACADE_THICKNESS: f64 = 0.5;
const MIN_HEIGHT: f64 = 6.0;
const MAX_HEIGHT: f64 = 14.0;
const FOCAL_FRACTION: f64 = 0.6;
const REGION_RADIUS: i64 = 2;
pub const LABEL: &str = "building";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Filled rectangle around the building's keypoints.
    BboxHull,
    /// Union of small squares around each of the building's keypoints.
    PerBuildingRegion,
}

/// One building seen from two disjoint view groups. The first half of the
/// sequences sees one side of it, the second half the other side, and both
/// see the middle. `shared_fraction` is the share of each side's points that
/// lies in the middle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub building: usize,
    pub shared_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub num_buildings: usize,
    pub points_per_building: usize,
    pub num_frames: usize,
    pub num_sequences: usize,
    pub image_size: (u32, u32),
    pub keypoint_noise_sigma: f64,
    /// Probability that an observation keeps its keypoint but loses its 3D link.
    pub track_dropout: f64,
    /// Probability that an observation is linked to a random point of another building.
    pub wrong_track_rate: f64,
    pub mask_mode: MaskMode,
    pub rng_seed: u64,
    /// A building gets a mask only when at least this share of its points is in view.
    pub min_visible_fraction: f64,
    /// Probability that the detector misses a visible building.
    pub mask_miss_rate: f64,
    /// Keypoints per image without any 3D point.
    pub background_keypoints: usize,
    pub split_building: Option<SplitSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            num_buildings: 10,
            points_per_building: 300,
            num_frames: 40,
            num_sequences: 4,
            image_size: (640, 480),
            keypoint_noise_sigma: 0.0,
            track_dropout: 0.0,
            wrong_track_rate: 0.0,
            mask_mode: MaskMode::BboxHull,
            rng_seed: 0,
            min_visible_fraction: 0.5,
            mask_miss_rate: 0.0,
            background_keypoints: 20,
            split_building: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.num_buildings == 0 || self.points_per_building == 0 || self.num_frames == 0 || self.num_sequences == 0 {
            return bad("building, point, frame and sequence counts must be positive".into());
        }
        if self.num_sequences > self.num_frames {
            return bad(format!(
                "{} sequences need at least as many frames, got {}",
                self.num_sequences, self.num_frames
            ));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image size must be positive".into());
        }
        for (name, p) in [
            ("track_dropout", self.track_dropout),
            ("wrong_track_rate", self.wrong_track_rate),
            ("min_visible_fraction", self.min_visible_fraction),
            ("mask_miss_rate", self.mask_miss_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.keypoint_noise_sigma >= 0.0 && self.keypoint_noise_sigma.is_finite()) {
            return bad(format!("keypoint_noise_sigma {} must be finite and >= 0", self.keypoint_noise_sigma));
        }
        if let Some(split) = self.split_building {
            if split.building >= self.num_buildings {
                return bad(format!("split building {} does not exist", split.building));
            }
            if !(split.shared_fraction > 0.0 && split.shared_fraction < 1.0) {
                return bad(format!("shared_fraction {} outside (0, 1)", split.shared_fraction));
            }
            if self.num_sequences < 2 {
                return bad("a split building needs at least two sequences".into());
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMask {
    pub image: String,
    pub mask_id: u32,
    pub building: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    /// Building of every point observed inside at least one of its building's masks.
    pub point_building: BTreeMap<PointId, usize>,
    /// Points never observed inside a mask of their own building.
    pub unmasked_points: Vec<PointId>,
    /// Points generated, with or without observations.
    pub total_points: usize,
    pub masks: Vec<TruthMask>,
    pub gt: Vec<GtBox>,
    /// Image names per sequence, in capture order.
    pub sequences: Vec<Vec<String>>,
}

impl SceneTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serialize")
    }

    pub fn mask_building(&self) -> BTreeMap<(&str, u32), usize> {
        self.masks.iter().map(|m| ((m.image.as_str(), m.mask_id), m.building)).collect()
    }

    /// Frame order file contents: one image per line, blank line between sequences.
    pub fn frame_order(&self) -> String {
        self.sequences.iter().map(|s| s.join("\n")).collect::<Vec<_>>().join("\n\n") + "\n"
    }

    /// Building each instance stands for: the most common building among its masks.
    pub fn instance_buildings(&self, result: &AssociationResult, recon: &Reconstruction) -> BTreeMap<u32, usize> {
        let truth = self.mask_building();
        result
            .instances
            .iter()
            .map(|b| {
                let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
                for m in &b.members {
                    let name = recon.images[&m.image_id].name.as_str();
                    if let Some(&bld) = truth.get(&(name, m.mask_id)) {
                        *votes.entry(bld).or_default() += 1;
                    }
                }
                let best = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&bld, _)| bld);
                (b.instance_id, best.unwrap_or(usize::MAX))
            })
            .collect()
    }

    /// Share of all generated points labeled with an instance that stands for their own building.
    pub fn label_accuracy(&self, result: &AssociationResult, recon: &Reconstruction) -> f64 {
        if self.total_points == 0 {
            return 1.0;
        }
        let inst = self.instance_buildings(result, recon);
        let correct = self
            .point_building
            .iter()
            .filter(|(p, &bld)| result.point_labels.get(p).is_some_and(|id| inst[id] == bld))
            .count();
        correct as f64 / self.total_points as f64
    }

    /// Differences between the result and the true partition, empty when they agree exactly.
    pub fn partition_mismatches(&self, result: &AssociationResult, recon: &Reconstruction) -> Vec<String> {
        let mut out = Vec::new();
        let truth = self.mask_building();
        let mut building_instance: BTreeMap<usize, u32> = BTreeMap::new();
        let mut covered = 0;
        for b in &result.instances {
            for m in &b.members {
                let name = recon.images[&m.image_id].name.as_str();
                covered += 1;
                let Some(&bld) = truth.get(&(name, m.mask_id)) else {
                    out.push(format!("instance {} holds unknown mask ({name}, {})", b.instance_id, m.mask_id));
                    continue;
                };
                match building_instance.insert(bld, b.instance_id) {
                    Some(prev) if prev != b.instance_id => {
                        out.push(format!("building {bld} split over instances {prev} and {}", b.instance_id))
                    }
                    _ => {}
                }
            }
        }
        let mut instance_building: BTreeMap<u32, usize> = BTreeMap::new();
        for (&bld, &inst) in &building_instance {
            if let Some(prev) = instance_building.insert(inst, bld) {
                out.push(format!("instance {inst} mixes buildings {prev} and {bld}"));
            }
        }
        if covered != self.masks.len() {
            out.push(format!("{} of {} masks assigned", covered, self.masks.len()));
        }
        for (p, bld) in &self.point_building {
            match result.point_labels.get(p) {
                None => out.push(format!("point {p} unlabeled")),
                Some(id) if instance_building.get(id) != Some(bld) => {
                    out.push(format!("point {p} of building {bld} labeled {id}"))
                }
                _ => {}
            }
        }
        if result.point_labels.len() != self.point_building.len() {
            out.push(format!(
                "{} labeled points, {} true points",
                result.point_labels.len(),
                self.point_building.len()
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub recon: Reconstruction,
    pub detections: DetectionSet,
    pub gt: Vec<GtBox>,
    pub truth: SceneTruth,
    pub camera: PinholeCamera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl PinholeCamera {
    /// `cameras.txt` contents for this single camera (id 1).
    pub fn cameras_txt(&self) -> String {
        let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n# Number of cameras: 1\n");
        let _ = writeln!(
            s,
            "1 PINHOLE {} {} {} {} {} {}",
            self.width, self.height, self.focal, self.focal, self.cx, self.cy
        );
        s
    }
}

struct Pose {
    rot: [[f64; 3]; 3],
    center: [f64; 3],
}

impl Pose {
    fn looking_down_street(center: [f64; 3], yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self { rot: [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]], center }
    }

    fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let r = &self.rot;
        [
            r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
            r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
            r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
        ]
    }

    fn translation(&self) -> [f64; 3] {
        let c = self.to_camera([0.0; 3]);
        [c[0], c[1], c[2]]
    }

    fn quaternion(&self) -> [f64; 4] {
        let r = &self.rot;
        let trace = r[0][0] + r[1][1] + r[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            [0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s]
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
            [(r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s]
        } else if r[1][1] > r[2][2] {
            let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
            [(r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s]
        } else {
            let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
            [(r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s]
        };
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.map(|v| v / n)
    }
}

struct Building {
    points: Vec<[f64; 3]>,
    colors: Vec<[u8; 3]>,
    /// Per point: seen by the first view group, seen by the second.
    sides: Vec<(bool, bool)>,
}

struct Observation {
    building: usize,
    point: usize,
    u: f64,
    v: f64,
    residual: f64,
}

/// Generates a scene; identical specs give identical scenes.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    // one stream per purpose, so scenes that differ only in a rate share everything else
    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        r.set_stream(k);
        r
    };
    let (mut rng, mut noise_rng, mut link_rng, mut bg_rng, mut det_rng) =
        (stream(0), stream(1), stream(2), stream(3), stream(4));
    let (width, height) = spec.image_size;
    let camera = PinholeCamera {
        width,
        height,
        focal: FOCAL_FRACTION * width as f64,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
    };
    let noise = Normal::new(0.0, spec.keypoint_noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");

    let buildings: Vec<Building> = (0..spec.num_buildings).map(|b| make_building(b, spec, &mut rng)).collect();
    let point_id = |b: usize, k: usize| (b * spec.points_per_building + k + 1) as PointId;

    // camera passes
    let street_start = BUILDING_WIDTH / 2.0;
    let street_end = (spec.num_buildings - 1) as f64 * (BUILDING_WIDTH + BUILDING_GAP) + BUILDING_WIDTH / 2.0;
    let mut frames: Vec<(usize, String, Pose)> = Vec::with_capacity(spec.num_frames);
    let mut sequences = Vec::with_capacity(spec.num_sequences);
    for s in 0..spec.num_sequences {
        let n = spec.num_frames / spec.num_sequences + usize::from(s < spec.num_frames % spec.num_sequences);
        let yaw = (s as f64 - (spec.num_sequences - 1) as f64 / 2.0) * 6f64.to_radians();
        let cam_y = -1.5 - 0.4 * s as f64;
        let mut names = Vec::with_capacity(n);
        for k in 0..n {
            let t = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
            let t = if s % 2 == 1 { 1.0 - t } else { t };
            let x = street_start + t * (street_end - street_start);
            let name = format!("s{s:02}_f{k:03}.jpg");
            names.push(name.clone());
            frames.push((s, name, Pose::looking_down_street([x, cam_y, 0.0], yaw)));
        }
        sequences.push(names);
    }
    let first_group = spec.num_sequences.div_ceil(2);

    let mut image_ids: Vec<ImageId> = (1..=frames.len() as ImageId).collect();
    image_ids.shuffle(&mut rng);

    let mut recon = Reconstruction::default();
    let mut tracks: BTreeMap<PointId, Vec<(TrackEntry, f64)>> = BTreeMap::new();
    let mut detections = DetectionSet::default();
    let mut gt = Vec::new();
    let mut truth_masks = Vec::new();
    let mut seen = vec![false; spec.num_buildings];
    let mut covered: BTreeSet<PointId> = BTreeSet::new();

    for (f, (seq, name, pose)) in frames.iter().enumerate() {
        let image_id = image_ids[f];
        let group_a = *seq < first_group;

        // projections and detector decisions per building
        let mut observations: Vec<Observation> = Vec::new();
        let mut detected: Vec<bool> = Vec::with_capacity(buildings.len());
        for (b, bld) in buildings.iter().enumerate() {
            let mut allowed = 0usize;
            let mut visible = Vec::new();
            for (k, p) in bld.points.iter().enumerate() {
                let (a_side, b_side) = bld.sides[k];
                if !(if group_a { a_side } else { b_side }) {
                    continue;
                }
                allowed += 1;
                if let Some((u, v)) = project(&camera, pose, *p) {
                    visible.push((k, u, v));
                }
            }
            let enough = !visible.is_empty() && visible.len() as f64 >= spec.min_visible_fraction * allowed as f64;
            detected.push(enough);
            for (k, u, v) in visible {
                let (du, dv) = if spec.keypoint_noise_sigma > 0.0 {
                    (noise.sample(&mut noise_rng), noise.sample(&mut noise_rng))
                } else {
                    (0.0, 0.0)
                };
                let (nu, nv) = (u + du, v + dv);
                if nu < 0.0 || nv < 0.0 || nu >= width as f64 || nv >= height as f64 {
                    continue;
                }
                observations.push(Observation {
                    building: b,
                    point: k,
                    u: nu,
                    v: nv,
                    residual: (du * du + dv * dv).sqrt(),
                });
            }
        }

        let mut keypoints = Vec::with_capacity(observations.len() + spec.background_keypoints);
        let mut links = Vec::with_capacity(observations.len());
        for obs in &observations {
            // all four draws are always taken, so link decisions are nested across rates
            let (u_drop, u_wrong): (f64, f64) = (link_rng.random(), link_rng.random());
            let other = link_rng.random_range(0..spec.num_buildings.max(2) - 1);
            let k = link_rng.random_range(0..spec.points_per_building);
            let link = if u_drop < spec.track_dropout {
                None
            } else if spec.num_buildings > 1 && u_wrong < spec.wrong_track_rate {
                Some(point_id(if other >= obs.building { other + 1 } else { other }, k))
            } else {
                Some(point_id(obs.building, obs.point))
            };
            if let Some(pid) = link {
                let entry = TrackEntry { image_id, point2d_index: keypoints.len() as u32 };
                tracks.entry(pid).or_default().push((entry, obs.residual));
            }
            links.push(link);
            keypoints.push(Keypoint2D::new(obs.u, obs.v, link));
        }
        for _ in 0..spec.background_keypoints {
            let u = bg_rng.random_range(0.0..width as f64);
            let v = bg_rng.random_range(0.0..height as f64);
            keypoints.push(Keypoint2D::new(u, v, None));
        }

        // one mask per detected building, from its observed keypoints
        let mut masks = Vec::new();
        for b in 0..buildings.len() {
            if !detected[b] {
                continue;
            }
            let pixels: Vec<(f64, f64)> = observations.iter().filter(|o| o.building == b).map(|o| (o.u, o.v)).collect();
            if pixels.is_empty() {
                continue;
            }
            let bits = rasterize(&pixels, width, height, spec.mask_mode);
            let missed = det_rng.random::<f64>() < spec.mask_miss_rate;
            let score = det_rng.random_range(0.5..=1.0);
            let mask = InstanceMask::from_bitmap(masks.len() as u32, LABEL, score, width, height, &bits)?;
            seen[b] = true;
            gt.push(GtBox { frame: name.clone(), gt_id: b as u64, bbox: mask.bounding_box() });
            if missed {
                continue;
            }
            for (obs, link) in observations.iter().zip(&links) {
                let own = point_id(b, obs.point);
                if obs.building == b && *link == Some(own) {
                    covered.insert(own);
                }
            }
            truth_masks.push(TruthMask { image: name.clone(), mask_id: mask.mask_id, building: b });
            masks.push(mask);
        }
        detections.images.insert(name.clone(), ImageDetections { width, height, masks });

        recon.images.insert(
            image_id,
            ImageRecord {
                image_id,
                name: name.clone(),
                camera_id: 1,
                qvec: pose.quaternion(),
                tvec: pose.translation(),
                keypoints,
            },
        );
    }

    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(Error::Generation(format!("building {b} is never detected by any camera")));
    }

    let mut point_building = BTreeMap::new();
    let mut unmasked_points = Vec::new();
    for (pid, obs) in tracks {
        let b = ((pid - 1) as usize) / spec.points_per_building;
        let k = ((pid - 1) as usize) % spec.points_per_building;
        let mut track: Vec<TrackEntry> = obs.iter().map(|(e, _)| *e).collect();
        track.sort_unstable();
        let reproj_error = obs.iter().map(|(_, r)| r).sum::<f64>() / obs.len() as f64;
        recon.points3d.insert(
            pid,
            Point3D { id: pid, position: buildings[b].points[k], color: buildings[b].colors[k], reproj_error, track },
        );
        if covered.contains(&pid) {
            point_building.insert(pid, b);
        } else {
            unmasked_points.push(pid);
        }
    }

    Ok(Scene {
        recon,
        detections,
        truth: SceneTruth {
            point_building,
            unmasked_points,
            total_points: spec.num_buildings * spec.points_per_building,
            masks: truth_masks,
            gt: gt.clone(),
            sequences,
        },
        gt,
        camera,
    })
}

fn make_building(b: usize, spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Building {
    let x0 = b as f64 * (BUILDING_WIDTH + BUILDING_GAP);
    let h = rng.random_range(MIN_HEIGHT..MAX_HEIGHT);
    let base = [rng.random_range(60..200u8), rng.random_range(60..200u8), rng.random_range(60..200u8)];
    let n = spec.points_per_building;
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for _ in 0..n {
        points.push([
            x0 + rng.random_range(0.0..BUILDING_WIDTH),
            -rng.random_range(0.0..h),
            FACADE_DEPTH + rng.random_range(0.0..FACADE_THICKNESS),
        ]);
        colors.push(base.map(|c| c.saturating_add(rng.random_range(0..40)).saturating_sub(20)));
    }

    let mut sides = vec![(true, true); n];
    if let Some(split) = spec.split_building.filter(|s| s.building == b) {
        // each side holds m points, of which shared_fraction * m are common
        let m = ((n as f64 / (2.0 - split.shared_fraction)).round() as usize).min(n);
        let mut by_x: Vec<usize> = (0..n).collect();
        by_x.sort_by(|&i, &j| points[i][0].total_cmp(&points[j][0]));
        for (rank, &k) in by_x.iter().enumerate() {
            sides[k] = (rank < m, rank >= n - m);
        }
    }
    Building { points, colors, sides }
}

fn project(cam: &PinholeCamera, pose: &Pose, p: [f64; 3]) -> Option<(f64, f64)> {
    let c = pose.to_camera(p);
    if c[2] <= 0.1 {
        return None;
    }
    let u = cam.focal * c[0] / c[2] + cam.cx;
    let v = cam.focal * c[1] / c[2] + cam.cy;
    (u >= 0.0 && v >= 0.0 && u < cam.width as f64 && v < cam.height as f64).then_some((u, v))
}

fn rasterize(pixels: &[(f64, f64)], width: u32, height: u32, mode: MaskMode) -> Vec<bool> {
    let (w, h) = (width as i64, height as i64);
    let mut bits = vec![false; (w * h) as usize];
    let mut fill = |x0: i64, y0: i64, x1: i64, y1: i64| {
        for y in y0.max(0)..=y1.min(h - 1) {
            for x in x0.max(0)..=x1.min(w - 1) {
                bits[(y * w + x) as usize] = true;
            }
        }
    };
    match mode {
        MaskMode::BboxHull => {
            let x0 = pixels.iter().map(|p| p.0.floor() as i64).min().unwrap();
            let x1 = pixels.iter().map(|p| p.0.floor() as i64).max().unwrap();
            let y0 = pixels.iter().map(|p| p.1.floor() as i64).min().unwrap();
            let y1 = pixels.iter().map(|p| p.1.floor() as i64).max().unwrap();
            fill(x0, y0, x1, y1);
        }
        MaskMode::PerBuildingRegion => {
            for &(u, v) in pixels {
                let (x, y) = (u.floor() as i64, v.floor() as i64);
                fill(x - REGION_RADIUS, y - REGION_RADIUS, x + REGION_RADIUS, y + REGION_RADIUS);
            }
        }
    }
    bits
}

/// Writes the scene as files: `model/` (COLMAP text), `detections.json`,
/// `gt.csv`, `frames.txt` and `truth.json`.
pub fn write_scene(scene: &Scene, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    let model = out.join("model");
    write_model(&scene.recon, &model)?;
    let write = |name: &str, contents: String| -> Result<()> {
        let path = out.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };
    fs::write(model.join("cameras.txt"), scene.camera.cameras_txt())
        .map_err(|e| Error::io(model.join("cameras.txt"), e))?;
    write("detections.json", scene.detections.to_json())?;
    write("gt.csv", crate::evaluation::format_gt(&scene.gt))?;
    write("frames.txt", scene.truth.frame_order())?;
    write("truth.json", scene.truth.to_json())?;
    Ok(())
}

/// Bounding box of a set of pixel positions, floored to pixel indices.
pub fn pixel_bbox(pixels: &[(f64, f64)]) -> Option<BBox> {
    let first = pixels.first()?;
    let mut b = BBox::new(first.0.floor(), first.1.floor(), first.0.floor(), first.1.floor());
    for &(u, v) in pixels {
        b.x_min = b.x_min.min(u.floor());
        b.y_min = b.y_min.min(v.floor());
        b.x_max = b.x_max.max(u.floor());
        b.y_max = b.y_max.max(v.floor());
    }
    Some(b)
}
