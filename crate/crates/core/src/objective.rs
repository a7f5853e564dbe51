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
//! Contact-alignment energy for grasp synthesis.
//!
//! Every hand patch is paired with one object patch. Each hand point is matched
//! to its nearest object point; the matching is frozen while the solver runs a
//! stage. The energy of a pair is the mean squared distance over its hand
//! points, and the total is the sum over pairs:
//!
//! ```text
//! E = Σ_pairs (1/|P|) Σ_{p∈P} ‖x(p) − y(c(p))‖²
//! ```
//!
//! The hand is placed by a wrist pose `T_ref ∘ (t, exp(r))`: a translation and
//! rotation-vector increment expressed in the reference frame.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{CouplingError, CouplingModel};
use crate::kinematics::link_poses;
use crate::mesh::TriMesh;
use crate::model::{ContactPatch, HandModel, PatchOwner};
use crate::transform::{exp_so3, left_jacobian_so3, skew, RigidTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown patch {0}")]
    UnknownPatch(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

impl ObjectiveError {
    pub fn kind(&self) -> &'static str {
        match self {
            ObjectiveError::DimensionMismatch(_) => "DimensionMismatch",
            ObjectiveError::UnknownPatch(_) => "UnknownPatch",
            ObjectiveError::InvalidTask(_) => "InvalidTask",
            ObjectiveError::Coupling(e) => e.kind(),
        }
    }
}

/// An object to grasp and the patch pairing that defines the grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTask {
    pub name: String,
    /// Object surface in meters, object frame.
    pub object_mesh: TriMesh,
    pub object_pose: RigidTransform,
    /// Object patches, plus hand patches that override or extend the model's.
    #[serde(default)]
    pub patches: Vec<ContactPatch>,
    /// `(hand_patch_id, object_patch_id)`.
    pub pairs: Vec<(String, String)>,
    /// Weight of the optional normal-alignment term; zero disables it.
    #[serde(default)]
    pub normal_weight: f64,
}

impl GraspTask {
    fn find_patch<'a>(&'a self, model: &'a HandModel, id: &str) -> Option<&'a ContactPatch> {
        self.patches.iter().find(|p| p.id == id).or_else(|| model.patch(id))
    }

    /// Checks the pairing against `model`.
    pub fn validate(&self, model: &HandModel) -> Result<(), ObjectiveError> {
        resolve_pairs(model, self).map(|_| ())
    }
}

/// Wrist increment and independent joint angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspVariables {
    /// Translation (m) then rotation vector (rad), in the reference frame.
    pub wrist: [f64; 6],
    /// Ordered like the coupling's independent joints.
    pub theta_i: Vec<f64>,
    /// Pose the wrist increment is applied to.
    #[serde(default = "RigidTransform::identity")]
    pub reference: RigidTransform,
}

impl GraspVariables {
    pub fn new(reference: RigidTransform, theta_i: Vec<f64>) -> Self {
        GraspVariables { wrist: [0.0; 6], theta_i, reference }
    }

    pub fn wrist_pose(&self) -> RigidTransform {
        wrist_pose(&self.reference, &self.wrist)
    }

    /// Folds the increment into the reference so the increment is zero.
    pub fn recentered(&self) -> Self {
        GraspVariables { wrist: [0.0; 6], theta_i: self.theta_i.clone(), reference: self.wrist_pose() }
    }
}

pub fn wrist_pose(reference: &RigidTransform, wrist: &[f64; 6]) -> RigidTransform {
    let t = Vector3::new(wrist[0], wrist[1], wrist[2]);
    let r = Vector3::new(wrist[3], wrist[4], wrist[5]);
    reference.compose(&RigidTransform::new(t, exp_so3(&r)))
}

/// For every pair, the matched object point index of each hand point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondences {
    pub version: u64,
    pub per_pair: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEnergy {
    pub hand_patch: String,
    pub object_patch: String,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub per_pair: Vec<PairEnergy>,
    pub correspondence_version: u64,
}

#[derive(Debug, Clone)]
struct ResolvedPair {
    hand: ContactPatch,
    hand_link: usize,
    object: ContactPatch,
    /// Revolute joints between the root and the hand link.
    chain: Vec<usize>,
}

fn resolve_pairs(model: &HandModel, task: &GraspTask) -> Result<Vec<ResolvedPair>, ObjectiveError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(task.pairs.len());
    for (hand_id, object_id) in &task.pairs {
        if !seen.insert(hand_id.as_str()) {
            return Err(ObjectiveError::InvalidTask(format!(
                "hand patch {hand_id} is paired more than once"
            )));
        }
        let hand = task
            .find_patch(model, hand_id)
            .ok_or_else(|| ObjectiveError::UnknownPatch(hand_id.clone()))?;
        let object = task
            .find_patch(model, object_id)
            .ok_or_else(|| ObjectiveError::UnknownPatch(object_id.clone()))?;
        let PatchOwner::Link(link) = &hand.owner else {
            return Err(ObjectiveError::InvalidTask(format!("{hand_id} is not a hand patch")));
        };
        if !object.is_object_patch() {
            return Err(ObjectiveError::InvalidTask(format!("{object_id} is not an object patch")));
        }
        let hand_link = model
            .link_index(link)
            .ok_or_else(|| ObjectiveError::InvalidTask(format!("{hand_id} is owned by unknown link {link}")))?;
        let chain = model
            .joint_path(hand_link)
            .into_iter()
            .filter(|&j| model.joints()[j].is_revolute())
            .collect();
        out.push(ResolvedPair { hand: hand.clone(), hand_link, object: object.clone(), chain });
    }
    Ok(out)
}

/// The energy of one task on one hand, prepared for repeated evaluation.
///
/// Configurations are given as a wrist increment plus a vector of joint
/// angles indexed like `model.joints()` (fixed joints ignored).
#[derive(Debug, Clone)]
pub struct AlignmentObjective<'a> {
    model: &'a HandModel,
    pairs: Vec<ResolvedPair>,
    /// Object patch points in world coordinates, per pair.
    object_points: Vec<Vec<Vector3<f64>>>,
    object_normals: Vec<Option<Vec<Vector3<f64>>>>,
    normal_weight: f64,
}

/// Energy plus gradient with respect to the wrist increment and every joint.
#[derive(Debug, Clone)]
pub struct EnergyGradient {
    pub energy: f64,
    pub wrist: [f64; 6],
    pub joints: DVector<f64>,
}

impl<'a> AlignmentObjective<'a> {
    pub fn new(model: &'a HandModel, task: &GraspTask) -> Result<Self, ObjectiveError> {
        if !(task.normal_weight >= 0.0 && task.normal_weight.is_finite()) {
            return Err(ObjectiveError::InvalidTask("normal_weight must be nonnegative".into()));
        }
        let pairs = resolve_pairs(model, task)?;
        let pose = task.object_pose;
        let object_points = pairs
            .iter()
            .map(|p| p.object.points.iter().map(|q| pose.transform_point(q)).collect())
            .collect();
        let object_normals = pairs
            .iter()
            .map(|p| p.object.normals.as_ref().map(|ns| ns.iter().map(|n| pose.transform_vector(n)).collect()))
            .collect();
        Ok(AlignmentObjective { model, pairs, object_points, object_normals, normal_weight: task.normal_weight })
    }

    pub fn model(&self) -> &HandModel {
        self.model
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// World coordinates of every hand patch point, per pair.
    pub fn hand_points(&self, wrist: &RigidTransform, joints: &[f64]) -> Vec<Vec<Vector3<f64>>> {
        let poses = link_poses(self.model, joints, wrist);
        self.pairs
            .iter()
            .map(|p| p.hand.points.iter().map(|q| poses[p.hand_link].transform_point(q)).collect())
            .collect()
    }

    pub fn object_points(&self) -> &[Vec<Vector3<f64>>] {
        &self.object_points
    }

    /// Nearest object point for every hand point; ties go to the lowest index.
    pub fn correspondences(&self, wrist: &RigidTransform, joints: &[f64], version: u64) -> Correspondences {
        let hand = self.hand_points(wrist, joints);
        let per_pair = hand
            .iter()
            .zip(&self.object_points)
            .map(|(hs, os)| hs.iter().map(|h| nearest(h, os)).collect())
            .collect();
        Correspondences { version, per_pair }
    }

    fn check(&self, corr: &Correspondences, joints: &[f64]) -> Result<(), ObjectiveError> {
        if joints.len() != self.model.joints().len() {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "{} joint values for {} joints",
                joints.len(),
                self.model.joints().len()
            )));
        }
        if corr.per_pair.len() != self.pairs.len() {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "correspondences cover {} pairs, task has {}",
                corr.per_pair.len(),
                self.pairs.len()
            )));
        }
        for (k, (c, pair)) in corr.per_pair.iter().zip(&self.pairs).enumerate() {
            if c.len() != pair.hand.points.len() || c.iter().any(|&i| i >= pair.object.points.len()) {
                return Err(ObjectiveError::DimensionMismatch(format!(
                    "correspondences for pair {k} do not fit patches {} / {}",
                    pair.hand.id, pair.object.id
                )));
            }
        }
        Ok(())
    }

    /// Per-pair energies at a configuration.
    pub fn energy(
        &self,
        wrist: &RigidTransform,
        joints: &[f64],
        corr: &Correspondences,
    ) -> Result<EnergyBreakdown, ObjectiveError> {
        self.check(corr, joints)?;
        let poses = link_poses(self.model, joints, wrist);
        let mut per_pair = Vec::with_capacity(self.pairs.len());
        for (k, pair) in self.pairs.iter().enumerate() {
            let pose = &poses[pair.hand_link];
            let inv = 1.0 / pair.hand.points.len() as f64;
            let mut e = 0.0;
            for (i, q) in pair.hand.points.iter().enumerate() {
                let c = corr.per_pair[k][i];
                e += (pose.transform_point(q) - self.object_points[k][c]).norm_squared();
                if let Some((nh, no)) = self.normal_pair(k, i, c) {
                    e += self.normal_weight * (1.0 + pose.transform_vector(&nh).dot(&no));
                }
            }
            per_pair.push(PairEnergy {
                hand_patch: pair.hand.id.clone(),
                object_patch: pair.object.id.clone(),
                energy: e * inv,
            });
        }
        let total = per_pair.iter().map(|p| p.energy).sum();
        Ok(EnergyBreakdown { total, per_pair, correspondence_version: corr.version })
    }

    fn normal_pair(&self, k: usize, i: usize, c: usize) -> Option<(Vector3<f64>, Vector3<f64>)> {
        if self.normal_weight == 0.0 {
            return None;
        }
        let nh = self.pairs[k].hand.normals.as_ref()?[i];
        let no = self.object_normals[k].as_ref()?[c];
        Some((nh, no))
    }

    /// Total energy and its gradient with respect to the wrist increment
    /// `wrist` (applied to `reference`) and every joint value.
    pub fn energy_gradient(
        &self,
        reference: &RigidTransform,
        wrist: &[f64; 6],
        joints: &[f64],
        corr: &Correspondences,
    ) -> Result<EnergyGradient, ObjectiveError> {
        self.check(corr, joints)?;
        let base = wrist_pose(reference, wrist);
        let poses = link_poses(self.model, joints, &base);
        let r_ref = reference.rotation_matrix();
        let p_ref = reference.translation();
        let t = Vector3::new(wrist[0], wrist[1], wrist[2]);
        let rv = Vector3::new(wrist[3], wrist[4], wrist[5]);
        // ∂(exp(r) v)/∂r = −[exp(r) v]× J_l(r)
        let jl = left_jacobian_so3(&rv);
        let r_ref_t = r_ref.transpose();

        let mut energy = 0.0;
        let mut g_t = Vector3::zeros();
        let mut g_r = Vector3::zeros();
        let mut g_j = DVector::zeros(joints.len());
        let axes: Vec<(Vector3<f64>, Vector3<f64>)> = (0..joints.len())
            .map(|j| crate::kinematics::joint_axis_world(self.model, &poses, j))
            .collect();

        for (k, pair) in self.pairs.iter().enumerate() {
            let pose = &poses[pair.hand_link];
            let w = 1.0 / pair.hand.points.len() as f64;
            for (i, q) in pair.hand.points.iter().enumerate() {
                let c = corr.per_pair[k][i];
                let x = pose.transform_point(q);
                let e = x - self.object_points[k][c];
                energy += w * e.norm_squared();
                let de = 2.0 * w * e;
                // x = p_ref + R_ref t + R_ref exp(r) q_base
                g_t += r_ref_t * de;
                let v = r_ref_t * (x - p_ref) - t;
                g_r += (-(skew(&v) * jl)).transpose() * (r_ref_t * de);
                for &j in &pair.chain {
                    let (o, a) = axes[j];
                    g_j[j] += de.dot(&a.cross(&(x - o)));
                }
                if let Some((nh, no)) = self.normal_pair(k, i, c) {
                    let n = pose.transform_vector(&nh);
                    energy += w * self.normal_weight * (1.0 + n.dot(&no));
                    let dn = w * self.normal_weight * no;
                    let nb = r_ref_t * n;
                    g_r += (-(skew(&nb) * jl)).transpose() * (r_ref_t * dn);
                    for &j in &pair.chain {
                        g_j[j] += dn.dot(&axes[j].1.cross(&n));
                    }
                }
            }
        }
        Ok(EnergyGradient {
            energy,
            wrist: [g_t.x, g_t.y, g_t.z, g_r.x, g_r.y, g_r.z],
            joints: g_j,
        })
    }
}

impl AlignmentObjective<'_> {
    /// Gauss–Newton approximation `Σ 2w JᵀJ` of the position-term Hessian,
    /// over the wrist increment followed by every joint.
    pub fn gauss_newton(
        &self,
        reference: &RigidTransform,
        wrist: &[f64; 6],
        joints: &[f64],
    ) -> DMatrix<f64> {
        let n = 6 + joints.len();
        let base = wrist_pose(reference, wrist);
        let poses = link_poses(self.model, joints, &base);
        let r_ref = reference.rotation_matrix();
        let t = Vector3::new(wrist[0], wrist[1], wrist[2]);
        let jl = left_jacobian_so3(&Vector3::new(wrist[3], wrist[4], wrist[5]));
        let axes: Vec<(Vector3<f64>, Vector3<f64>)> = (0..joints.len())
            .map(|j| crate::kinematics::joint_axis_world(self.model, &poses, j))
            .collect();
        let mut h = DMatrix::zeros(n, n);
        let mut jac = DMatrix::zeros(3, n);
        for pair in &self.pairs {
            let pose = &poses[pair.hand_link];
            let w = 2.0 / pair.hand.points.len() as f64;
            for q in &pair.hand.points {
                let x = pose.transform_point(q);
                jac.fill(0.0);
                jac.view_mut((0, 0), (3, 3)).copy_from(&r_ref);
                let v = r_ref.transpose() * (x - reference.translation()) - t;
                jac.view_mut((0, 3), (3, 3)).copy_from(&(r_ref * -(skew(&v) * jl)));
                for &j in &pair.chain {
                    let (o, a) = axes[j];
                    jac.view_mut((0, 6 + j), (3, 1)).copy_from(&a.cross(&(x - o)));
                }
                h += w * jac.transpose() * &jac;
            }
        }
        h
    }
}

fn nearest(h: &Vector3<f64>, candidates: &[Vector3<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, o) in candidates.iter().enumerate() {
        let d = (h - o).norm_squared();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Joint vector (indexed like `model.joints()`) for `theta_i` expanded
/// through the coupling.
pub fn joint_vector(
    model: &HandModel,
    coupling: &CouplingModel,
    theta_i: &[f64],
) -> Result<Vec<f64>, ObjectiveError> {
    let angles = coupling.expand_angles(theta_i)?;
    let mut v = vec![0.0; model.joints().len()];
    for (j, joint) in model.joints().iter().enumerate() {
        if joint.is_revolute() {
            v[j] = angles.get(&joint.name).ok_or_else(|| {
                ObjectiveError::DimensionMismatch(format!("coupling does not cover joint {}", joint.name))
            })?;
        }
    }
    Ok(v)
}

/// Nearest-point correspondences at `vars`, version 0.
pub fn update_correspondences(
    model: &HandModel,
    coupling: &CouplingModel,
    task: &GraspTask,
    vars: &GraspVariables,
) -> Result<Correspondences, ObjectiveError> {
    let objective = AlignmentObjective::new(model, task)?;
    let joints = joint_vector(model, coupling, &vars.theta_i)?;
    Ok(objective.correspondences(&vars.wrist_pose(), &joints, 0))
}

pub fn alignment_energy(
    model: &HandModel,
    coupling: &CouplingModel,
    task: &GraspTask,
    vars: &GraspVariables,
    corr: &Correspondences,
) -> Result<EnergyBreakdown, ObjectiveError> {
    let objective = AlignmentObjective::new(model, task)?;
    let joints = joint_vector(model, coupling, &vars.theta_i)?;
    objective.energy(&vars.wrist_pose(), &joints, corr)
}

/// Gradient with respect to `(wrist, θ_I)`, length `6 + |θ_I|`; dependent
/// joints contribute through `Mᵀ`.
pub fn energy_gradient(
    model: &HandModel,
    coupling: &CouplingModel,
    task: &GraspTask,
    vars: &GraspVariables,
    corr: &Correspondences,
) -> Result<DVector<f64>, ObjectiveError> {
    let objective = AlignmentObjective::new(model, task)?;
    let joints = joint_vector(model, coupling, &vars.theta_i)?;
    let full = objective.energy_gradient(&vars.reference, &vars.wrist, &joints, corr)?;
    let index = |name: &str| {
        model
            .joint_index(name)
            .ok_or_else(|| ObjectiveError::DimensionMismatch(format!("coupling joint {name} is not in the model")))
    };
    let mut g = DVector::zeros(6 + coupling.cols());
    for i in 0..6 {
        g[i] = full.wrist[i];
    }
    for (c, name) in coupling.independent().iter().enumerate() {
        g[6 + c] = full.joints[index(name)?];
    }
    for &(r, c, m) in coupling.triplets() {
        g[6 + c] += m * full.joints[index(&coupling.dependent()[r])?];
    }
    Ok(g)
}
