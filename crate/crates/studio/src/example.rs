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

//! Writes a complete example workspace: hand, coupling, trajectories, tasks
//! and a design-study configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use softhand::coupling::CouplingModel;
use softhand::model::{serialize_urdf, HandModel};
use softhand::solver::default_schedule;
use softhand::RigidTransform;

use crate::files::{write_json, InitialGuess, StudyConfig, TaskSpec, VariantSpec};
use crate::procedural::{
    constructed_task, nominal_theta, object_task, open_hand, procedural_coupling, procedural_hand,
    thumb_variants, StudyObject, SLOPES,
};
use crate::StudioError;

/// Independent angles by name.
pub fn named_angles(coupling: &CouplingModel, theta: &[f64]) -> BTreeMap<String, f64> {
    coupling.independent().iter().cloned().zip(theta.iter().copied()).collect()
}

/// Object task for the study, starting from a nearly open hand.
pub fn object_task_spec(model: &HandModel, coupling: &CouplingModel, object: StudyObject) -> TaskSpec {
    TaskSpec {
        task: object_task(model, coupling, object),
        initial: Some(InitialGuess {
            theta_i: named_angles(coupling, &open_hand(coupling).theta_i),
            wrist_reference: RigidTransform::identity(),
        }),
        freeze_wrist: false,
    }
}

/// Flexion recordings `motion_id,finger,theta1_rad,theta2_rad,theta3_rad`:
/// five motions per finger with the procedural coupling slopes plus
/// Gaussian noise of standard deviation `noise` (rad).
pub fn trajectory_csv(noise: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("finite noise");
    let mut out = String::from("motion_id,finger,theta1_rad,theta2_rad,theta3_rad\n");
    for motion in 0..5 {
        let peak = 0.9 + 0.15 * motion as f64;
        for finger in ["index", "middle", "ring", "little", "thumb"] {
            for k in 0..=20 {
                let t1 = peak * k as f64 / 20.0;
                let t2 = SLOPES[0] * t1 + normal.sample(&mut rng);
                let t3 = SLOPES[1] * t1 + normal.sample(&mut rng);
                let _ = writeln!(out, "m{motion},{finger},{t1},{t2},{t3}");
            }
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), StudioError> {
    std::fs::write(path, text).map_err(|e| StudioError::io(path, e))
}

/// Populates `dir` with the example files:
///
/// * `hand.urdf`: the procedural seven-tendon hand, pads inline,
/// * `coupling.json`, `trajectories.csv`,
/// * `tasks/<object>.json` for the four study objects and `tasks/reach.json`,
///   a task built from a known pose (zero energy is attainable),
/// * `cold_start.json`: a one-stage schedule with every constraint active,
/// * `study.yaml`: four thumb variants on the four objects.
pub fn write_example(dir: &Path) -> Result<(), StudioError> {
    let tasks_dir = dir.join("tasks");
    std::fs::create_dir_all(&tasks_dir).map_err(|e| StudioError::io(&tasks_dir, e))?;
    let hand = procedural_hand();
    let coupling = procedural_coupling();
    write_text(&dir.join("hand.urdf"), &serialize_urdf(&hand))?;
    write_json(&dir.join("coupling.json"), &coupling)?;
    write_text(&dir.join("trajectories.csv"), &trajectory_csv(0.01, 0))?;

    let mut task_paths = Vec::new();
    for object in StudyObject::ALL {
        let rel = format!("tasks/{}.json", object.name());
        write_json(&dir.join(&rel), &object_task_spec(&hand, &coupling, object).to_file())?;
        task_paths.push(rel.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let reach = TaskSpec {
        task: constructed_task(&hand, &coupling, &nominal_theta(&coupling), &RigidTransform::identity(), 0.0, &mut rng, "reach"),
        initial: Some(InitialGuess {
            // Nearest-point matching is local; start close to the target pose.
            theta_i: named_angles(&coupling, &nominal_theta(&coupling).iter().map(|t| t - 0.02).collect::<Vec<_>>()),
            wrist_reference: RigidTransform::from_xyz_rpy([0.002, -0.001, 0.001], [0.01, 0.0, -0.01]),
        }),
        freeze_wrist: false,
    };
    write_json(&tasks_dir.join("reach.json"), &reach.to_file())?;

    let all_rows = default_schedule(&coupling).stages().last().cloned().unwrap_or_default();
    write_json(&dir.join("cold_start.json"), &serde_json::json!({ "stages": [all_rows] }))?;

    let study = StudyConfig {
        base_urdf: "hand.urdf".into(),
        coupling: Some("coupling.json".into()),
        variants: thumb_variants().into_iter().map(|(name, edits)| VariantSpec { name, edits }).collect(),
        tasks: task_paths,
        seed: Some(0),
        options: None,
        schedule: None,
    };
    let yaml = serde_yaml::to_string(&study).map_err(|e| StudioError::Invalid(e.to_string()))?;
    write_text(&dir.join("study.yaml"), &yaml)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::files::{load_coupling, load_model, load_schedule, load_task, load_trajectories};
    use softhand::coupling::{fit_coupling, IndependentChoice};

    #[test]
    fn example_files_load() {
        let dir = tempfile::tempdir().unwrap();
        write_example(dir.path()).unwrap();
        let hand = load_model(&dir.path().join("hand.urdf")).unwrap();
        assert!(hand.semantically_eq(&procedural_hand(), 1e-12));
        assert_eq!(load_coupling(&dir.path().join("coupling.json")).unwrap(), procedural_coupling());
        assert_eq!(load_schedule(&dir.path().join("cold_start.json")).unwrap().len(), 1);
        let bowl = load_task(&dir.path().join("tasks/bowl.json")).unwrap();
        assert_eq!(bowl, object_task_spec(&hand, &procedural_coupling(), StudyObject::Bowl));
        let cfg = StudyConfig::load(&dir.path().join("study.yaml")).unwrap();
        assert_eq!(cfg.variants.len(), 4);
        assert_eq!(cfg.tasks.len(), 4);
        let data = load_trajectories(&dir.path().join("trajectories.csv")).unwrap();
        let fit = fit_coupling(&data, &IndependentChoice::default()).unwrap();
        for f in &fit.fingers {
            assert!((f.m2 - 0.8).abs() < 0.02 && (f.m3 - 0.6).abs() < 0.02, "{f:?}");
        }
    }
}
