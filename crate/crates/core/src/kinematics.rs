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
//! Forward kinematics over the quasi-rigid chain and analytic point Jacobians.

use std::collections::BTreeMap;

use nalgebra::{Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ContactPatch, HandModel, PatchOwner};
use crate::transform::RigidTransform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("no angle given for revolute joint {0}")]
    MissingAngle(String),
    #[error("angle for joint {0} is not finite")]
    NonFiniteAngle(String),
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("unknown patch owner {0}")]
    UnknownOwner(String),
}

/// Joint angles in radians keyed by joint name.
///
/// `clamped` records whether the values have been clipped to the joint
/// limits; it is not serialized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAngles {
    values: BTreeMap<String, f64>,
    #[serde(skip)]
    clamped: bool,
}

impl JointAngles {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every revolute joint of `model` at zero.
    pub fn zeros(model: &HandModel) -> Self {
        model.revolute_joints().map(|j| (j.name.clone(), 0.0)).collect()
    }

    pub fn get(&self, joint: &str) -> Option<f64> {
        self.values.get(joint).copied()
    }

    pub fn set(&mut self, joint: impl Into<String>, angle: f64) {
        self.values.insert(joint.into(), angle);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_clamped(&self) -> bool {
        self.clamped
    }

    /// Copy with every value clipped to its joint's limits.
    pub fn clamped_to(&self, model: &HandModel) -> JointAngles {
        let mut out = self.clone();
        for (name, value) in out.values.iter_mut() {
            if let Some(j) = model.joint(name) {
                *value = value.clamp(j.limits[0], j.limits[1]);
            }
        }
        out.clamped = true;
        out
    }

    /// Per-revolute-joint angle vector indexed like `model.joints()`; fixed
    /// joints get 0.
    pub fn to_joint_vector(&self, model: &HandModel) -> Result<Vec<f64>, KinematicsError> {
        model
            .joints()
            .iter()
            .map(|j| {
                if !j.is_revolute() {
                    return Ok(0.0);
                }
                let v = self
                    .get(&j.name)
                    .ok_or_else(|| KinematicsError::MissingAngle(j.name.clone()))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(KinematicsError::NonFiniteAngle(j.name.clone()))
                }
            })
            .collect()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for JointAngles {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Self { values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(), clamped: false }
    }
}

/// World poses of every link, plus the object pose when one is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseMap {
    poses: BTreeMap<String, RigidTransform>,
    object: Option<RigidTransform>,
}

impl PoseMap {
    pub fn get(&self, link: &str) -> Option<&RigidTransform> {
        self.poses.get(link)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RigidTransform)> {
        self.poses.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn with_object_pose(mut self, pose: RigidTransform) -> Self {
        self.object = Some(pose);
        self
    }

    pub fn object_pose(&self) -> Option<&RigidTransform> {
        self.object.as_ref()
    }
}

/// Link world poses indexed like `model.links()`. `angles` is indexed like
/// `model.joints()`; entries of fixed joints are ignored.
pub fn link_poses(model: &HandModel, angles: &[f64], base: &RigidTransform) -> Vec<RigidTransform> {
    let mut poses = vec![RigidTransform::identity(); model.links().len()];
    poses[model.root_index()] = *base;
    let joints = model.joints();
    for &j in model.topological_joints() {
        let joint = &joints[j];
        let parent = model.link_index(&joint.parent).expect("validated");
        let child = model.link_index(&joint.child).expect("validated");
        let mut pose = poses[parent].compose(&joint.origin);
        if joint.is_revolute() {
            pose = pose.compose(&RigidTransform::from_axis_angle(&joint.axis, angles[j]));
        }
        poses[child] = pose;
    }
    poses
}

/// Child pose = parent pose ∘ origin ∘ Rot(axis, angle); fixed joints add the
/// origin only.
pub fn forward_kinematics(
    model: &HandModel,
    angles: &JointAngles,
    base: &RigidTransform,
) -> Result<PoseMap, KinematicsError> {
    let vector = angles.to_joint_vector(model)?;
    let poses = link_poses(model, &vector, base);
    Ok(PoseMap {
        poses: model.links().iter().map(|l| l.name.clone()).zip(poses).collect(),
        object: None,
    })
}

/// Patch points in the world frame, in patch order. Object patches use the
/// object pose attached to `poses`.
pub fn patch_world_points(
    poses: &PoseMap,
    patch: &ContactPatch,
) -> Result<Vec<Vector3<f64>>, KinematicsError> {
    let pose = match &patch.owner {
        PatchOwner::Link(link) => poses.get(link),
        PatchOwner::Object => poses.object_pose(),
    }
    .ok_or_else(|| KinematicsError::UnknownOwner(patch.owner.to_string()))?;
    Ok(patch.points.iter().map(|p| pose.transform_point(p)).collect())
}

/// Jacobian of a link-fixed point with respect to the revolute joints on
/// the root-to-link path. Joints off the path have zero columns and are
/// omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJacobian {
    /// Revolute joint names, root side first, one per column.
    pub joints: Vec<String>,
    pub matrix: Matrix3xX<f64>,
}

impl PointJacobian {
    pub fn column(&self, joint: &str) -> Option<Vector3<f64>> {
        self.joints.iter().position(|j| j == joint).map(|i| self.matrix.column(i).into_owned())
    }
}

/// World origin and unit axis of revolute joint `j` given link poses.
pub fn joint_axis_world(
    model: &HandModel,
    poses: &[RigidTransform],
    j: usize,
) -> (Vector3<f64>, Vector3<f64>) {
    let joint = &model.joints()[j];
    let child = &poses[model.link_index(&joint.child).expect("validated")];
    // rotating about the axis leaves both the joint origin and the axis fixed
    (*child.translation(), child.transform_vector(&joint.axis))
}

/// Column for joint j is `axis_j × (p − origin_j)` in the world frame.
pub fn point_jacobian(
    model: &HandModel,
    angles: &JointAngles,
    base: &RigidTransform,
    link: &str,
    local_point: &Vector3<f64>,
) -> Result<PointJacobian, KinematicsError> {
    let link_idx =
        model.link_index(link).ok_or_else(|| KinematicsError::UnknownLink(link.to_string()))?;
    let vector = angles.to_joint_vector(model)?;
    let poses = link_poses(model, &vector, base);
    let p = poses[link_idx].transform_point(local_point);
    let path: Vec<usize> = model
        .joint_path(link_idx)
        .into_iter()
        .filter(|&j| model.joints()[j].is_revolute())
        .collect();
    let mut matrix = Matrix3xX::zeros(path.len());
    for (col, &j) in path.iter().enumerate() {
        let (origin, axis) = joint_axis_world(model, &poses, j);
        matrix.set_column(col, &axis.cross(&(p - origin)));
    }
    Ok(PointJacobian {
        joints: path.iter().map(|&j| model.joints()[j].name.clone()).collect(),
        matrix,
    })
}
