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

//! The solve pipeline shared by the CLI, the study runner and the service.

use softhand::coupling::CouplingModel;
use softhand::grasp::{solve_grasp, GraspSolution};
use softhand::model::HandModel;
use softhand::solver::{default_schedule, CascadeSchedule, SolveOptions};

use crate::files::TaskSpec;
use crate::{JointEdit, StudioError};

/// Applies `edits` to `base` in order.
pub fn variant_model(base: &HandModel, edits: &[JointEdit]) -> Result<HandModel, StudioError> {
    let mut model = base.clone();
    for edit in edits {
        model = model.apply_joint_edit(&edit.joint, &edit.delta)?;
    }
    Ok(model)
}

/// Coupling covering every revolute joint of `model`. Joints the given
/// coupling leaves out become independent; they are returned so callers
/// can warn about them. Without a coupling every joint is independent.
pub fn effective_coupling(
    model: &HandModel,
    coupling: Option<&CouplingModel>,
) -> Result<(CouplingModel, Vec<String>), StudioError> {
    let base = match coupling {
        Some(c) => c.clone(),
        None => CouplingModel::all_independent(Vec::new())?,
    };
    Ok(base.completed_for(model)?)
}

/// Runs the cascade for one task. `schedule` defaults to the coupling's
/// default schedule.
pub fn solve_spec(
    model: &HandModel,
    coupling: &CouplingModel,
    spec: &TaskSpec,
    schedule: Option<&CascadeSchedule>,
    options: &SolveOptions,
) -> Result<GraspSolution, StudioError> {
    spec.task.validate(model)?;
    let initial = spec.initial_variables(model, coupling)?;
    let default;
    let schedule = match schedule {
        Some(s) => s,
        None => {
            default = default_schedule(coupling);
            &default
        }
    };
    Ok(solve_grasp(model, coupling, &spec.task, &initial, schedule, spec.freeze_wrist, options)?)
}
