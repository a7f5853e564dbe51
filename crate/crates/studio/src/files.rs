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

//! On-disk formats: task files, study configurations and loaders for the
//! core file types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softhand::coupling::{CouplingModel, JointTrajectoryDataset};
use softhand::mesh::{load_mesh, MeshError, TriMesh};
use softhand::model::{load_urdf, parse_urdf, ContactPatch, HandModel};
use softhand::objective::{GraspTask, GraspVariables};
use softhand::solver::{CascadeSchedule, SolveOptions};
use softhand::RigidTransform;

use crate::{JointEdit, StudioError};

/// Object geometry in a task file: a path relative to the task file, or an
/// inline triangle mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    Path(String),
    Inline(TriMesh),
}

/// Optional starting point of a solve.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialGuess {
    /// Independent joint angles by name; missing joints start at zero
    /// clamped into their limits.
    #[serde(default)]
    pub theta_i: BTreeMap<String, f64>,
    #[serde(default)]
    pub wrist_reference: RigidTransform,
}

/// Grasp task as stored in a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub name: String,
    pub object_mesh: MeshSource,
    #[serde(default)]
    pub object_pose: RigidTransform,
    #[serde(default)]
    pub patches: Vec<ContactPatch>,
    pub pairs: Vec<(String, String)>,
    #[serde(default)]
    pub normal_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialGuess>,
    #[serde(default)]
    pub freeze_wrist: bool,
}

/// A task with its geometry loaded and its solve settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: GraspTask,
    #[serde(default)]
    pub initial: Option<InitialGuess>,
    #[serde(default)]
    pub freeze_wrist: bool,
}

impl TaskFile {
    /// Loads the object mesh. Relative mesh paths resolve against
    /// `base_dir`; without one only inline meshes are accepted.
    pub fn resolve(self, base_dir: Option<&Path>) -> Result<TaskSpec, StudioError> {
        let object_mesh = match self.object_mesh {
            MeshSource::Inline(mesh) => {
                mesh.validate().map_err(|e| StudioError::Invalid(format!("object mesh: {e}")))?;
                mesh
            }
            MeshSource::Path(p) => {
                let Some(dir) = base_dir else {
                    return Err(StudioError::Invalid(format!(
                        "object mesh {p} must be inlined as {{vertices, triangles}}"
                    )));
                };
                let path = dir.join(&p);
                match load_mesh(&path) {
                    Ok(m) => m,
                    Err(MeshError::Io { .. }) => return Err(StudioError::UnresolvedMesh(vec![path])),
                    Err(e) => return Err(StudioError::parse(path.display().to_string(), e)),
                }
            }
        };
        Ok(TaskSpec {
            task: GraspTask {
                name: self.name,
                object_mesh,
                object_pose: self.object_pose,
                patches: self.patches,
                pairs: self.pairs,
                normal_weight: self.normal_weight,
            },
            initial: self.initial,
            freeze_wrist: self.freeze_wrist,
        })
    }
}

impl TaskSpec {
    /// Task file with the mesh inlined.
    pub fn to_file(&self) -> TaskFile {
        TaskFile {
            name: self.task.name.clone(),
            object_mesh: MeshSource::Inline(self.task.object_mesh.clone()),
            object_pose: self.task.object_pose,
            patches: self.task.patches.clone(),
            pairs: self.task.pairs.clone(),
            normal_weight: self.task.normal_weight,
            initial: self.initial.clone(),
            freeze_wrist: self.freeze_wrist,
        }
    }

    /// Starting variables for `coupling` on `model`.
    pub fn initial_variables(
        &self,
        model: &HandModel,
        coupling: &CouplingModel,
    ) -> Result<GraspVariables, StudioError> {
        let guess = self.initial.clone().unwrap_or_default();
        for name in guess.theta_i.keys() {
            if !coupling.independent().contains(name) {
                return Err(StudioError::Invalid(format!(
                    "initial angle for {name}, which is not an independent joint"
                )));
            }
        }
        let theta = coupling
            .independent()
            .iter()
            .map(|name| {
                let limits = model.joint(name).map(|j| j.limits).unwrap_or([f64::MIN, f64::MAX]);
                guess.theta_i.get(name).copied().unwrap_or(0.0).clamp(limits[0], limits[1])
            })
            .collect();
        Ok(GraspVariables::new(guess.wrist_reference, theta))
    }
}

/// Variant of a base hand: a name and an ordered list of joint edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    #[serde(default)]
    pub edits: Vec<JointEdit>,
}

/// Design-study configuration (YAML or JSON). Paths are relative to the
/// configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub base_urdf: PathBuf,
    /// Coupling JSON; without one every revolute joint is independent.
    #[serde(default)]
    pub coupling: Option<PathBuf>,
    pub variants: Vec<VariantSpec>,
    pub tasks: Vec<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub options: Option<SolveOptions>,
    /// Cascade schedule JSON; the default schedule otherwise.
    #[serde(default)]
    pub schedule: Option<PathBuf>,
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, StudioError> {
        let text = read_text(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut config: StudyConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| StudioError::parse(path.display().to_string(), e))?
        } else {
            serde_yaml::from_str(&text).map_err(|e| StudioError::parse(path.display().to_string(), e))?
        };
        let dir = path.parent().unwrap_or(Path::new("."));
        config.base_urdf = dir.join(&config.base_urdf);
        config.coupling = config.coupling.map(|p| dir.join(p));
        config.schedule = config.schedule.map(|p| dir.join(p));
        config.tasks = config.tasks.iter().map(|p| dir.join(p)).collect();
        Ok(config)
    }
}

pub fn read_text(path: &Path) -> Result<String, StudioError> {
    std::fs::read_to_string(path).map_err(|e| StudioError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StudioError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| StudioError::parse(path.display().to_string(), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StudioError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| StudioError::io(path, e))
}

/// Reads a URDF, reporting every unresolved mesh file at once before
/// loading meshes and the patch sidecar.
pub fn load_model(path: &Path) -> Result<HandModel, StudioError> {
    let text = read_text(path)?;
    let parsed = parse_urdf(&text)?;
    let unresolved = parsed.unresolved_meshes(path.parent().unwrap_or(Path::new(".")));
    if !unresolved.is_empty() {
        return Err(StudioError::UnresolvedMesh(unresolved));
    }
    Ok(load_urdf(path)?)
}

pub fn load_coupling(path: &Path) -> Result<CouplingModel, StudioError> {
    read_json(path)
}

pub fn load_schedule(path: &Path) -> Result<CascadeSchedule, StudioError> {
    read_json(path)
}

pub fn load_task(path: &Path) -> Result<TaskSpec, StudioError> {
    let file: TaskFile = read_json(path)?;
    file.resolve(Some(path.parent().unwrap_or(Path::new("."))))
}

pub fn load_trajectories(path: &Path) -> Result<JointTrajectoryDataset, StudioError> {
    let file = std::fs::File::open(path).map_err(|e| StudioError::io(path, e))?;
    Ok(JointTrajectoryDataset::from_csv(file, path.display().to_string())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedural::{cuboid, procedural_coupling, procedural_hand};

    fn task_file(mesh: MeshSource) -> TaskFile {
        TaskFile {
            name: "t".into(),
            object_mesh: mesh,
            object_pose: RigidTransform::identity(),
            patches: Vec::new(),
            pairs: Vec::new(),
            normal_weight: 0.0,
            initial: None,
            freeze_wrist: false,
        }
    }

    #[test]
    fn mesh_source_accepts_path_or_inline() {
        let inline = task_file(MeshSource::Inline(cuboid([0.01; 3], 1)));
        let text = serde_json::to_string(&inline).unwrap();
        assert_eq!(serde_json::from_str::<TaskFile>(&text).unwrap(), inline);
        let by_path: TaskFile =
            serde_json::from_str(r#"{"name":"t","object_mesh":"cup.stl","pairs":[]}"#).unwrap();
        assert_eq!(by_path.object_mesh, MeshSource::Path("cup.stl".into()));
    }

    #[test]
    fn path_meshes_need_a_directory() {
        let file = task_file(MeshSource::Path("cup.stl".into()));
        assert_eq!(file.clone().resolve(None).unwrap_err().kind(), "Invalid");
        let dir = tempfile::tempdir().unwrap();
        let err = file.resolve(Some(dir.path())).unwrap_err();
        assert_eq!(err.kind(), "UnresolvedMesh");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn initial_guess_defaults_and_clamps() {
        let hand = procedural_hand();
        let c = procedural_coupling();
        let mut spec = task_file(MeshSource::Inline(cuboid([0.01; 3], 1))).resolve(None).unwrap();
        spec.initial = Some(InitialGuess {
            theta_i: [("index_j1".to_string(), 9.0), ("thumb_abd".to_string(), -0.2)].into(),
            wrist_reference: RigidTransform::identity(),
        });
        let vars = spec.initial_variables(&hand, &c).unwrap();
        let at = |n: &str| vars.theta_i[c.independent().iter().position(|x| x == n).unwrap()];
        assert_eq!(at("index_j1"), 1.6);
        assert_eq!(at("thumb_abd"), -0.2);
        assert_eq!(at("middle_j1"), 0.0);
        spec.initial.as_mut().unwrap().theta_i.insert("index_j2".into(), 0.1);
        assert_eq!(spec.initial_variables(&hand, &c).unwrap_err().kind(), "Invalid");
    }

    #[test]
    fn study_paths_are_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.yaml");
        std::fs::write(
            &path,
            "base_urdf: hand.urdf\ncoupling: c.json\nvariants:\n  - name: a\ntasks: [tasks/bowl.json]\nseed: 4\n",
        )
        .unwrap();
        let cfg = StudyConfig::load(&path).unwrap();
        assert_eq!(cfg.base_urdf, dir.path().join("hand.urdf"));
        assert_eq!(cfg.tasks, vec![dir.path().join("tasks/bowl.json")]);
        assert_eq!(cfg.variants[0].edits, Vec::new());
        assert_eq!(cfg.seed, Some(4));
        assert!(cfg.schedule.is_none());
    }
}
