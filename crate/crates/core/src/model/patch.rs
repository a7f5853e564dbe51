/*
Copyright 2026 The softhand Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Contact patches: labeled point sets on a hand link or on the grasped object.

use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ModelError;

const NORMAL_TOLERANCE: f64 = 1e-6;

/// Which frame a patch's points are expressed in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchOwner {
    Link(String),
    Object,
}

impl PatchOwner {
    pub fn parse(s: &str) -> Self {
        if s == "object" {
            PatchOwner::Object
        } else {
            PatchOwner::Link(s.to_string())
        }
    }

    pub fn link(&self) -> Option<&str> {
        match self {
            PatchOwner::Link(name) => Some(name),
            PatchOwner::Object => None,
        }
    }
}

impl fmt::Display for PatchOwner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchOwner::Link(name) => f.write_str(name),
            PatchOwner::Object => f.write_str("object"),
        }
    }
}

impl Serialize for PatchOwner {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PatchOwner {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(PatchOwner::parse(&s))
    }
}

/// A labeled set of surface points in the owner's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPatch")]
pub struct ContactPatch {
    pub id: String,
    pub owner: PatchOwner,
    pub points: Vec<Vector3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<Vector3<f64>>>,
    #[serde(default)]
    pub label: String,
}

#[derive(Deserialize)]
struct RawPatch {
    id: String,
    owner: PatchOwner,
    points: Vec<Vector3<f64>>,
    #[serde(default)]
    normals: Option<Vec<Vector3<f64>>>,
    #[serde(default)]
    label: String,
}

impl TryFrom<RawPatch> for ContactPatch {
    type Error = ModelError;

    fn try_from(raw: RawPatch) -> Result<Self, ModelError> {
        ContactPatch::new(raw.id, raw.owner, raw.points, raw.normals, raw.label)
    }
}

impl ContactPatch {
    pub fn new(
        id: impl Into<String>,
        owner: PatchOwner,
        points: Vec<Vector3<f64>>,
        normals: Option<Vec<Vector3<f64>>>,
        label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let patch = Self { id: id.into(), owner, points, normals, label: label.into() };
        patch.validate()?;
        Ok(patch)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidPatch { id: self.id.clone(), reason };
        if self.points.is_empty() {
            return Err(invalid("patch has no points".into()));
        }
        if self.points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(invalid("non-finite point coordinate".into()));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(invalid(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > NORMAL_TOLERANCE) {
                return Err(invalid(format!("normal {i} is not unit length")));
            }
        }
        Ok(())
    }

    pub fn is_object_patch(&self) -> bool {
        self.owner == PatchOwner::Object
    }
}

/// Sidecar file layout: `{"patches": [ContactPatch, ...]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PatchSidecar {
    pub patches: Vec<ContactPatch>,
}

impl PatchSidecar {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ModelError::InvalidPatch {
            id: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}
