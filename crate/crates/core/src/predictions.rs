//! The instance file shared by the association pipeline and the baseline tracker.
//!
//! ```json
//! {"instances": [{"id": 0, "masks": [["img.jpg", 2], ...], "num_points": 311}],
//!  "point_labels": {"17": 0, ...},
//!  "unassigned": [["img.jpg", 5], ...]}
//! ```
//!
//! Masks are `(image name, mask id)` pairs, where the mask id is the index of
//! the mask in its image after score filtering at load time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colmap::PointId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedInstance {
    pub id: u32,
    pub masks: Vec<(String, u32)>,
    #[serde(default)]
    pub num_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub instances: Vec<PredictedInstance>,
    #[serde(default)]
    pub point_labels: BTreeMap<PointId, u32>,
    #[serde(default)]
    pub unassigned: Vec<(String, u32)>,
}

impl PredictionFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("predictions serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
