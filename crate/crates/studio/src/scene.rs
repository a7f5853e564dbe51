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

//! Self-contained scene documents for visualizing a solved grasp.
//!
//! Every mesh is inlined so a viewer needs nothing but the document. The
//! JSON schema ships as [`SCENE_SCHEMA`].

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use softhand::grasp::GraspSolution;
use softhand::kinematics::forward_kinematics;
use softhand::model::{ContactPatch, Geometry, HandModel};
use softhand::objective::{GraspTask, PairEnergy};
use softhand::solver::SolveStatus;
use softhand::RigidTransform;

use crate::StudioError;

/// JSON schema (draft 2020-12) of [`SceneDocument`].
pub const SCENE_SCHEMA: &str = include_str!("../schemas/scene.schema.json");

pub const SCENE_FORMAT: &str = "softhand-scene/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SceneGeometry {
    Mesh { vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]> },
    /// A mesh file that was not loaded (e.g. a URDF uploaded without its
    /// meshes).
    MeshRef { filename: String },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLink {
    pub name: String,
    /// World pose of the link frame.
    pub transform: RigidTransform,
    /// Pose of the geometry in the link frame.
    pub geometry_origin: RigidTransform,
    pub geometry: Option<SceneGeometry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub transform: RigidTransform,
    pub geometry: SceneGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePatch {
    pub id: String,
    pub owner: String,
    pub label: String,
    /// World frame, meters.
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSolution {
    pub variant: String,
    pub task: String,
    pub status: SolveStatus,
    pub energy: f64,
    pub constraint_violation: f64,
    pub seed: u64,
    pub restart: usize,
    pub wrist_pose: RigidTransform,
    pub joint_angles: BTreeMap<String, f64>,
    pub per_pair: Vec<PairEnergy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub format: String,
    pub model: String,
    pub links: Vec<SceneLink>,
    pub object: SceneObject,
    pub patches: Vec<ScenePatch>,
    pub solution: SceneSolution,
}

fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn geometry(g: &Geometry) -> SceneGeometry {
    match g {
        Geometry::Mesh { mesh: Some(m), .. } => {
            SceneGeometry::Mesh { vertices: m.vertices.clone(), triangles: m.triangles.clone() }
        }
        Geometry::Mesh { filename, mesh: None } => SceneGeometry::MeshRef { filename: filename.clone() },
        Geometry::Box { size } => SceneGeometry::Box { size: *size },
        Geometry::Cylinder { radius, length } => SceneGeometry::Cylinder { radius: *radius, length: *length },
        Geometry::Sphere { radius } => SceneGeometry::Sphere { radius: *radius },
    }
}

/// Scene of `solution` for `task` on `model`. Link transforms are the
/// forward kinematics of the solved joint angles at the solved wrist pose.
pub fn build_scene(
    model: &HandModel,
    task: &GraspTask,
    solution: &GraspSolution,
    variant: &str,
) -> Result<SceneDocument, StudioError> {
    let wrist = solution.vars.wrist_pose();
    let poses = forward_kinematics(model, &solution.full_angles, &wrist)
        .map_err(|e| StudioError::Invalid(e.to_string()))?
        .with_object_pose(task.object_pose);

    let links = model
        .links()
        .iter()
        .map(|l| SceneLink {
            name: l.name.clone(),
            transform: *poses.get(&l.name).expect("every link has a pose"),
            geometry_origin: l.visual.as_ref().map(|v| v.origin).unwrap_or_default(),
            geometry: l.visual.as_ref().map(|v| geometry(&v.geometry)),
        })
        .collect();

    let mut patches: BTreeMap<&str, &ContactPatch> = model.patches().map(|p| (p.id.as_str(), p)).collect();
    for p in &task.patches {
        patches.insert(p.id.as_str(), p);
    }
    let patches = patches
        .into_values()
        .map(|p| {
            let pose = match p.owner.link() {
                Some(link) => poses.get(link),
                None => poses.object_pose(),
            }
            .ok_or_else(|| StudioError::Invalid(format!("patch {} has unknown owner {}", p.id, p.owner)))?;
            Ok(ScenePatch {
                id: p.id.clone(),
                owner: p.owner.to_string(),
                label: p.label.clone(),
                points: p.points.iter().map(|q| arr(pose.transform_point(q))).collect(),
                normals: p.normals.as_ref().map(|ns| ns.iter().map(|n| arr(pose.transform_vector(n))).collect()),
            })
        })
        .collect::<Result<Vec<_>, StudioError>>()?;

    Ok(SceneDocument {
        format: SCENE_FORMAT.into(),
        model: model.name().into(),
        links,
        object: SceneObject {
            name: task.name.clone(),
            transform: task.object_pose,
            geometry: SceneGeometry::Mesh {
                vertices: task.object_mesh.vertices.clone(),
                triangles: task.object_mesh.triangles.clone(),
            },
        },
        patches,
        solution: SceneSolution {
            variant: variant.into(),
            task: task.name.clone(),
            status: solution.status,
            energy: solution.energy,
            constraint_violation: solution.constraint_violation,
            seed: solution.seed,
            restart: solution.restart,
            wrist_pose: wrist,
            joint_angles: solution.full_angles.iter().map(|(k, v)| (k.to_string(), v)).collect(),
            per_pair: solution.per_pair.clone(),
        },
    })
}

impl SceneDocument {
    /// Checks that every triangle index addresses an existing vertex.
    pub fn check_indices(&self) -> Result<(), String> {
        let check = |what: &str, g: &SceneGeometry| match g {
            SceneGeometry::Mesh { vertices, triangles } => {
                match triangles.iter().flatten().find(|&&i| i as usize >= vertices.len()) {
                    Some(i) => Err(format!("{what}: index {i} out of range")),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        };
        for l in &self.links {
            if let Some(g) = &l.geometry {
                check(&l.name, g)?;
            }
        }
        check("object", &self.object.geometry)
    }
}
