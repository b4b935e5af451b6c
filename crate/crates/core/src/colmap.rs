//! COLMAP text-format sparse models: parsing, validation and writing.
//!
//! A model directory holds `images.txt` (two lines per image: the pose header
//! and a flat list of `X Y POINT3D_ID` keypoint triples) and `points3D.txt`
//! (one line per point followed by its `IMAGE_ID POINT2D_IDX` track). The
//! keypoint index used by tracks is the position of the triple in its image
//! line. A `POINT3D_ID` of `-1` marks a keypoint without a 3D point.
//! `cameras.txt` is not read.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type ImageId = u32;
pub type PointId = u64;

pub const IMAGES_FILE: &str = "images.txt";
pub const POINTS_FILE: &str = "points3D.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint2D {
    pub x: f64,
    pub y: f64,
    pub point3d_id: Option<PointId>,
}

impl Keypoint2D {
    pub fn new(x: f64, y: f64, point3d_id: Option<PointId>) -> Self {
        Self { x, y, point3d_id }
    }
}

/// One observation of a 3D point: an image and the index of a keypoint in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackEntry {
    pub image_id: ImageId,
    pub point2d_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub id: PointId,
    pub position: [f64; 3],
    pub color: [u8; 3],
    pub reproj_error: f64,
    pub track: Vec<TrackEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: ImageId,
    pub name: String,
    pub camera_id: u32,
    /// Rotation quaternion `(qw, qx, qy, qz)`, world to camera.
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
    pub keypoints: Vec<Keypoint2D>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    pub images: BTreeMap<ImageId, ImageRecord>,
    pub points3d: BTreeMap<PointId, Point3D>,
}

impl Reconstruction {
    pub fn image_by_name(&self, name: &str) -> Option<&ImageRecord> {
        self.images.values().find(|img| img.name == name)
    }

    /// Lookup table from image name to id.
    pub fn name_index(&self) -> HashMap<&str, ImageId> {
        self.images.values().map(|img| (img.name.as_str(), img.image_id)).collect()
    }

    pub fn num_observations(&self) -> usize {
        self.points3d.values().map(|p| p.track.len()).sum()
    }
}

/// A broken model invariant, as reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    QuaternionNotUnit { image_id: ImageId, norm: f64 },
    NonFiniteKeypoint { image_id: ImageId, point2d_index: u32 },
    KeypointToMissingPoint { image_id: ImageId, point2d_index: u32, point3d_id: PointId },
    KeypointNotInTrack { image_id: ImageId, point2d_index: u32, point3d_id: PointId },
    EmptyTrack { point3d_id: PointId },
    BadReprojError { point3d_id: PointId, value: f64 },
    NonFinitePosition { point3d_id: PointId },
    TrackToMissingImage { point3d_id: PointId, image_id: ImageId },
    TrackIndexOutOfRange { point3d_id: PointId, image_id: ImageId, point2d_index: u32, len: usize },
    TrackLinkMismatch { point3d_id: PointId, image_id: ImageId, point2d_index: u32, found: Option<PointId> },
    DuplicateObservation { image_id: ImageId, point2d_index: u32, first: PointId, second: PointId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            QuaternionNotUnit { image_id, norm } => {
                write!(f, "image {image_id}: quaternion norm {norm} is not 1")
            }
            NonFiniteKeypoint { image_id, point2d_index } => {
                write!(f, "image {image_id} keypoint {point2d_index}: non-finite coordinates")
            }
            KeypointToMissingPoint { image_id, point2d_index, point3d_id } => write!(
                f,
                "image {image_id} keypoint {point2d_index} references missing 3D point {point3d_id}"
            ),
            KeypointNotInTrack { image_id, point2d_index, point3d_id } => write!(
                f,
                "image {image_id} keypoint {point2d_index} references 3D point {point3d_id} whose track does not contain it"
            ),
            EmptyTrack { point3d_id } => write!(f, "3D point {point3d_id} has an empty track"),
            BadReprojError { point3d_id, value } => {
                write!(f, "3D point {point3d_id}: invalid reprojection error {value}")
            }
            NonFinitePosition { point3d_id } => {
                write!(f, "3D point {point3d_id}: non-finite position")
            }
            TrackToMissingImage { point3d_id, image_id } => {
                write!(f, "3D point {point3d_id} track references missing image {image_id}")
            }
            TrackIndexOutOfRange { point3d_id, image_id, point2d_index, len } => write!(
                f,
                "3D point {point3d_id} track references keypoint {point2d_index} of image {image_id}, which has {len} keypoints"
            ),
            TrackLinkMismatch { point3d_id, image_id, point2d_index, found } => match found {
                Some(other) => write!(
                    f,
                    "3D point {point3d_id} track entry (image {image_id}, keypoint {point2d_index}) links back to 3D point {other}"
                ),
                None => write!(
                    f,
                    "3D point {point3d_id} track entry (image {image_id}, keypoint {point2d_index}) has no 3D point"
                ),
            },
            DuplicateObservation { image_id, point2d_index, first, second } => write!(
                f,
                "observation (image {image_id}, keypoint {point2d_index}) appears in tracks of 3D points {first} and {second}"
            ),
        }
    }
}

impl Violation {
    fn is_dangling(&self) -> bool {
        matches!(
            self,
            Violation::KeypointToMissingPoint { .. }
                | Violation::TrackToMissingImage { .. }
                | Violation::TrackIndexOutOfRange { .. }
        )
    }
}

/// Checks every model invariant and reports each violation with the ids involved.
pub fn validate(recon: &Reconstruction) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut observed: HashMap<TrackEntry, PointId> = HashMap::with_capacity(recon.num_observations());

    for point in recon.points3d.values() {
        let id = point.id;
        if point.track.is_empty() {
            out.push(Violation::EmptyTrack { point3d_id: id });
        }
        if !point.reproj_error.is_finite() || point.reproj_error < 0.0 {
            out.push(Violation::BadReprojError { point3d_id: id, value: point.reproj_error });
        }
        if point.position.iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFinitePosition { point3d_id: id });
        }
        for entry in &point.track {
            if let Some(&first) = observed.get(entry) {
                out.push(Violation::DuplicateObservation {
                    image_id: entry.image_id,
                    point2d_index: entry.point2d_index,
                    first,
                    second: id,
                });
                continue;
            }
            observed.insert(*entry, id);
            let Some(image) = recon.images.get(&entry.image_id) else {
                out.push(Violation::TrackToMissingImage { point3d_id: id, image_id: entry.image_id });
                continue;
            };
            match image.keypoints.get(entry.point2d_index as usize) {
                None => out.push(Violation::TrackIndexOutOfRange {
                    point3d_id: id,
                    image_id: entry.image_id,
                    point2d_index: entry.point2d_index,
                    len: image.keypoints.len(),
                }),
                Some(kp) if kp.point3d_id != Some(id) => out.push(Violation::TrackLinkMismatch {
                    point3d_id: id,
                    image_id: entry.image_id,
                    point2d_index: entry.point2d_index,
                    found: kp.point3d_id,
                }),
                Some(_) => {}
            }
        }
    }

    for image in recon.images.values() {
        let norm = image.qvec.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > 1e-6 {
            out.push(Violation::QuaternionNotUnit { image_id: image.image_id, norm });
        }
        for (idx, kp) in image.keypoints.iter().enumerate() {
            let idx = idx as u32;
            if !kp.x.is_finite() || !kp.y.is_finite() {
                out.push(Violation::NonFiniteKeypoint { image_id: image.image_id, point2d_index: idx });
            }
            let Some(pid) = kp.point3d_id else { continue };
            if !recon.points3d.contains_key(&pid) {
                out.push(Violation::KeypointToMissingPoint {
                    image_id: image.image_id,
                    point2d_index: idx,
                    point3d_id: pid,
                });
                continue;
            }
            let entry = TrackEntry { image_id: image.image_id, point2d_index: idx };
            if observed.get(&entry) != Some(&pid) {
                // a mismatch on the track side has already been reported
                let reported = observed.contains_key(&entry);
                if !reported {
                    out.push(Violation::KeypointNotInTrack {
                        image_id: image.image_id,
                        point2d_index: idx,
                        point3d_id: pid,
                    });
                }
            }
        }
    }
    out
}

/// Parses a COLMAP text model directory and checks it for consistency.
pub fn parse_model(dir: impl AsRef<Path>) -> Result<Reconstruction> {
    let dir = dir.as_ref();
    let images_path = dir.join(IMAGES_FILE);
    let points_path = dir.join(POINTS_FILE);

    let (images, points) = rayon::join(
        || {
            let text = fs::read_to_string(&images_path).map_err(|e| Error::io(&images_path, e))?;
            parse_images(&text, &images_path.display().to_string())
        },
        || {
            let text = fs::read_to_string(&points_path).map_err(|e| Error::io(&points_path, e))?;
            parse_points(&text, &points_path.display().to_string())
        },
    );
    let recon = Reconstruction { images: images?, points3d: points? };

    let violations = validate(&recon);
    if let Some(dangling) = violations.iter().find(|v| v.is_dangling()) {
        return Err(Error::Consistency(dangling.to_string()));
    }
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        let more = violations.len().saturating_sub(listed.len());
        let mut msg = listed.join("; ");
        if more > 0 {
            let _ = write!(msg, "; and {more} more");
        }
        return Err(Error::Consistency(msg));
    }
    Ok(recon)
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with('#')
}

fn parse_field<T: std::str::FromStr>(token: &str, what: &str, file: &str, line: usize) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        file: file.to_owned(),
        line,
        message: format!("cannot parse {what} from {token:?}"),
    })
}

/// Parses the contents of an `images.txt` file. `file` is used in error messages.
pub fn parse_images(text: &str, file: &str) -> Result<BTreeMap<ImageId, ImageRecord>> {
    let mut images = BTreeMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    while let Some((lineno, line)) = lines.next() {
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                file: file.to_owned(),
                line: lineno,
                message: format!("expected 10 fields in image header, found {}", fields.len()),
            });
        }
        let image_id: ImageId = parse_field(fields[0], "IMAGE_ID", file, lineno)?;
        let mut qvec = [0.0; 4];
        for (k, q) in qvec.iter_mut().enumerate() {
            *q = parse_field(fields[1 + k], "quaternion component", file, lineno)?;
        }
        let mut tvec = [0.0; 3];
        for (k, t) in tvec.iter_mut().enumerate() {
            *t = parse_field(fields[5 + k], "translation component", file, lineno)?;
        }
        let camera_id = parse_field(fields[8], "CAMERA_ID", file, lineno)?;
        let name = fields[9].to_owned();

        // the keypoint line directly follows its header and may be empty
        let keypoints = match lines.next() {
            Some((kp_lineno, kp_line)) => parse_keypoints(kp_line, file, kp_lineno)?,
            None => Vec::new(),
        };

        let record = ImageRecord { image_id, name, camera_id, qvec, tvec, keypoints };
        if images.insert(image_id, record).is_some() {
            return Err(Error::DuplicateKey { kind: "image id", key: image_id.to_string() });
        }
    }
    Ok(images)
}

fn parse_keypoints(line: &str, file: &str, lineno: usize) -> Result<Vec<Keypoint2D>> {
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if !fields.len().is_multiple_of(3) {
        return Err(Error::Parse {
            file: file.to_owned(),
            line: lineno,
            message: format!("keypoint list has {} fields, not a multiple of 3", fields.len()),
        });
    }
    fields
        .chunks_exact(3)
        .map(|c| {
            let x: f64 = parse_field(c[0], "keypoint x", file, lineno)?;
            let y: f64 = parse_field(c[1], "keypoint y", file, lineno)?;
            let raw: i64 = parse_field(c[2], "POINT3D_ID", file, lineno)?;
            let point3d_id = match raw {
                -1 => None,
                id if id >= 0 => Some(id as PointId),
                id => {
                    return Err(Error::Parse {
                        file: file.to_owned(),
                        line: lineno,
                        message: format!("invalid POINT3D_ID {id}"),
                    })
                }
            };
            Ok(Keypoint2D { x, y, point3d_id })
        })
        .collect()
}

/// Parses the contents of a `points3D.txt` file. `file` is used in error messages.
pub fn parse_points(text: &str, file: &str) -> Result<BTreeMap<PointId, Point3D>> {
    let mut points = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if is_skippable(line) {
            continue;
        }
        let point = parse_point_line(line, file, lineno)?;
        let id = point.id;
        if points.insert(id, point).is_some() {
            return Err(Error::DuplicateKey { kind: "3D point id", key: id.to_string() });
        }
    }
    Ok(points)
}

fn parse_point_line(line: &str, file: &str, lineno: usize) -> Result<Point3D> {
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() < 8 || !(fields.len() - 8).is_multiple_of(2) {
        return Err(Error::Parse {
            file: file.to_owned(),
            line: lineno,
            message: format!("expected 8 fields plus IMAGE_ID POINT2D_IDX pairs, found {} fields", fields.len()),
        });
    }
    let id = parse_field(fields[0], "POINT3D_ID", file, lineno)?;
    let mut position = [0.0; 3];
    for (k, v) in position.iter_mut().enumerate() {
        *v = parse_field(fields[1 + k], "coordinate", file, lineno)?;
    }
    let mut color = [0u8; 3];
    for (k, c) in color.iter_mut().enumerate() {
        *c = parse_field(fields[4 + k], "color channel", file, lineno)?;
    }
    let reproj_error = parse_field(fields[7], "ERROR", file, lineno)?;
    let track = fields[8..]
        .chunks_exact(2)
        .map(|c| {
            Ok(TrackEntry {
                image_id: parse_field(c[0], "IMAGE_ID", file, lineno)?,
                point2d_index: parse_field(c[1], "POINT2D_IDX", file, lineno)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Point3D { id, position, color, reproj_error, track })
}

/// Renders `images.txt` in the layout COLMAP writes.
pub fn format_images(recon: &Reconstruction) -> String {
    let mut s = String::new();
    let mean_obs = if recon.images.is_empty() {
        0.0
    } else {
        let observed: usize =
            recon.images.values().map(|img| img.keypoints.iter().filter(|k| k.point3d_id.is_some()).count()).sum();
        observed as f64 / recon.images.len() as f64
    };
    s.push_str("# Image list with two lines of data per image:\n");
    s.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    s.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(s, "# Number of images: {}, mean observations per image: {}", recon.images.len(), mean_obs);
    for img in recon.images.values() {
        let [qw, qx, qy, qz] = img.qvec;
        let [tx, ty, tz] = img.tvec;
        let _ = writeln!(s, "{} {qw} {qx} {qy} {qz} {tx} {ty} {tz} {} {}", img.image_id, img.camera_id, img.name);
        let mut first = true;
        for kp in &img.keypoints {
            if !first {
                s.push(' ');
            }
            first = false;
            match kp.point3d_id {
                Some(id) => {
                    let _ = write!(s, "{} {} {}", kp.x, kp.y, id);
                }
                None => {
                    let _ = write!(s, "{} {} -1", kp.x, kp.y);
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Renders `points3D.txt` in the layout COLMAP writes.
pub fn format_points(recon: &Reconstruction) -> String {
    let mut s = String::new();
    let mean_track =
        if recon.points3d.is_empty() { 0.0 } else { recon.num_observations() as f64 / recon.points3d.len() as f64 };
    s.push_str("# 3D point list with one line of data per point:\n");
    s.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(s, "# Number of points: {}, mean track length: {}", recon.points3d.len(), mean_track);
    for p in recon.points3d.values() {
        let [x, y, z] = p.position;
        let [r, g, b] = p.color;
        let _ = write!(s, "{} {x} {y} {z} {r} {g} {b} {}", p.id, p.reproj_error);
        for e in &p.track {
            let _ = write!(s, " {} {}", e.image_id, e.point2d_index);
        }
        s.push('\n');
    }
    s
}

/// Writes `images.txt` and `points3D.txt` into `dir`, creating it if needed.
pub fn write_model(recon: &Reconstruction, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let images_path = dir.join(IMAGES_FILE);
    fs::write(&images_path, format_images(recon)).map_err(|e| Error::io(&images_path, e))?;
    let points_path = dir.join(POINTS_FILE);
    fs::write(&points_path, format_points(recon)).map_err(|e| Error::io(&points_path, e))?;
    Ok(())
}
