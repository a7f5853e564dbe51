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
//! Grasp synthesis: the alignment energy minimized under the tendon coupling
//! with the constraint cascade.
//!
//! The decision vector is `(wrist, θ_I, θ_D)`. The coupling is kept as
//! explicit equality rows `[0 | M | −I] x = 0` so that a cascade stage can
//! enforce any subset of them.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{CouplingError, CouplingModel};
use crate::kinematics::JointAngles;
use crate::model::HandModel;
use crate::objective::{
    wrist_pose, AlignmentObjective, Correspondences, GraspTask, GraspVariables, ObjectiveError, PairEnergy,
};
use crate::solver::{
    cascade_solve, CascadeProblem, CascadeSchedule, SolveOptions, SolveStatus, SolverError, StageRecord,
};
use crate::transform::RigidTransform;

/// Wrist translation bound per axis, meters from the reference.
pub const WRIST_TRANSLATION_BOUND: f64 = 0.5;
/// Wrist rotation-vector bound per component; keeps `‖r‖ < π`.
pub const WRIST_ROTATION_BOUND: f64 = 1.8;
/// Restart perturbation of the independent joints, radians.
pub const RESTART_ANGLE_JITTER: f64 = 0.1;
/// Restart perturbation of the wrist translation, meters.
pub const RESTART_TRANSLATION_JITTER: f64 = 0.005;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot read or write {path}: {message}")]
    Io { path: String, message: String },
}

impl GraspError {
    pub fn kind(&self) -> &'static str {
        match self {
            GraspError::Objective(e) => e.kind(),
            GraspError::Coupling(e) => e.kind(),
            GraspError::Solver(e) => e.kind(),
            GraspError::Io { .. } => "Io",
        }
    }
}

/// Frozen per-stage data: the wrist reference and the correspondences.
#[derive(Debug, Clone)]
pub struct GraspState {
    pub reference: RigidTransform,
    pub correspondences: Correspondences,
}

/// A grasp task on a hand, as a problem the cascade can drive.
pub struct GraspProblem<'a> {
    objective: AlignmentObjective<'a>,
    coupling: &'a CouplingModel,
    reference: RigidTransform,
    independent: Vec<usize>,
    dependent: Vec<usize>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    a: DMatrix<f64>,
}

impl<'a> GraspProblem<'a> {
    /// `reference` is the wrist pose the increment starts from. With
    /// `freeze_wrist` the increment is pinned at zero.
    pub fn new(
        model: &'a HandModel,
        coupling: &'a CouplingModel,
        task: &GraspTask,
        reference: RigidTransform,
        freeze_wrist: bool,
    ) -> Result<Self, GraspError> {
        coupling.validate_against(model)?;
        let objective = AlignmentObjective::new(model, task)?;
        let index = |name: &String| model.joint_index(name).expect("validated against model");
        let independent: Vec<usize> = coupling.independent().iter().map(index).collect();
        let dependent: Vec<usize> = coupling.dependent().iter().map(index).collect();
        let (ni, nd) = (independent.len(), dependent.len());
        let n = 6 + ni + nd;
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        if !freeze_wrist {
            for i in 0..3 {
                lower[i] = -WRIST_TRANSLATION_BOUND;
                upper[i] = WRIST_TRANSLATION_BOUND;
                lower[3 + i] = -WRIST_ROTATION_BOUND;
                upper[3 + i] = WRIST_ROTATION_BOUND;
            }
        }
        for (k, &j) in independent.iter().chain(&dependent).enumerate() {
            let limits = model.joints()[j].limits;
            lower[6 + k] = limits[0];
            upper[6 + k] = limits[1];
        }
        let mut a = DMatrix::zeros(nd, n);
        for &(r, c, m) in coupling.triplets() {
            a[(r, 6 + c)] = m;
        }
        for r in 0..nd {
            a[(r, 6 + ni + r)] = -1.0;
        }
        Ok(GraspProblem { objective, coupling, reference, independent, dependent, lower, upper, a })
    }

    pub fn alignment(&self) -> &AlignmentObjective<'a> {
        &self.objective
    }

    fn joints(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut v = vec![0.0; self.objective.model().joints().len()];
        let ni = self.independent.len();
        for (k, &j) in self.independent.iter().enumerate() {
            v[j] = x[6 + k];
        }
        for (k, &j) in self.dependent.iter().enumerate() {
            v[j] = x[6 + ni + k];
        }
        v
    }

    fn wrist(x: &DVector<f64>) -> [f64; 6] {
        [x[0], x[1], x[2], x[3], x[4], x[5]]
    }

    /// Decision vector for `vars` with `θ_D = M θ_I`, clamped to the bounds.
    pub fn initial_point(&self, vars: &GraspVariables) -> Result<DVector<f64>, GraspError> {
        let ni = self.independent.len();
        if vars.theta_i.len() != ni {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "{} independent angles for {ni} independent joints",
                vars.theta_i.len()
            ))
            .into());
        }
        let mut x = DVector::zeros(self.lower.len());
        // express the requested wrist pose relative to this problem's reference
        let delta = self.reference.inverse().compose(&vars.wrist_pose());
        let t = delta.translation();
        let r = delta.rotation().scaled_axis();
        for i in 0..3 {
            x[i] = t[i];
            x[3 + i] = r[i];
        }
        for (k, v) in vars.theta_i.iter().enumerate() {
            x[6 + k] = *v;
        }
        self.fill_dependent(&mut x);
        self.clamp(&mut x);
        Ok(x)
    }

    fn fill_dependent(&self, x: &mut DVector<f64>) {
        let ni = self.independent.len();
        let theta_i: Vec<f64> = (0..ni).map(|k| x[6 + k]).collect();
        let theta_d = self.coupling.dependent_values(&theta_i).expect("sized by coupling");
        for (k, v) in theta_d.iter().enumerate() {
            x[6 + ni + k] = *v;
        }
    }

    fn clamp(&self, x: &mut DVector<f64>) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Solution record for a decision vector.
    fn solution(
        &self,
        x: &DVector<f64>,
        state: &GraspState,
        status: SolveStatus,
        stage_trace: Vec<StageRecord>,
        options: &SolveOptions,
        restart: usize,
    ) -> Result<GraspSolution, GraspError> {
        let ni = self.independent.len();
        let model = self.objective.model();
        let joints = self.joints(x);
        let mut full_angles = JointAngles::new();
        for &j in self.independent.iter().chain(&self.dependent) {
            full_angles.set(model.joints()[j].name.clone(), joints[j]);
        }
        let vars = GraspVariables {
            wrist: Self::wrist(x),
            theta_i: (0..ni).map(|k| x[6 + k]).collect(),
            reference: state.reference,
        };
        let breakdown = self.objective.energy(&vars.wrist_pose(), &joints, &state.correspondences)?;
        let violation = if self.a.nrows() == 0 { 0.0 } else { (&self.a * x).amax() };
        Ok(GraspSolution {
            vars,
            full_angles,
            energy: breakdown.total,
            constraint_violation: violation,
            status,
            stage_trace,
            per_pair: breakdown.per_pair,
            correspondence_version: state.correspondences.version,
            seed: options.seed,
            restart,
        })
    }
}

impl CascadeProblem for GraspProblem<'_> {
    type State = GraspState;

    fn dimension(&self) -> usize {
        self.lower.len()
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn constraints(&self) -> (DMatrix<f64>, DVector<f64>) {
        (self.a.clone(), DVector::zeros(self.a.nrows()))
    }

    fn begin_stage(&self, previous: Option<&GraspState>, mut x: DVector<f64>) -> (GraspState, DVector<f64>) {
        let mut reference = previous.map_or(self.reference, |s| s.reference);
        let r = Vector3::new(x[3], x[4], x[5]);
        if r.norm() > FRAC_PI_2 {
            reference = wrist_pose(&reference, &Self::wrist(&x));
            for i in 0..6 {
                x[i] = 0.0;
            }
        }
        let version = previous.map_or(0, |s| s.correspondences.version + 1);
        let correspondences =
            self.objective.correspondences(&wrist_pose(&reference, &Self::wrist(&x)), &self.joints(&x), version);
        (GraspState { reference, correspondences }, x)
    }

    fn objective(&self, state: &GraspState, x: &DVector<f64>) -> f64 {
        let pose = wrist_pose(&state.reference, &Self::wrist(x));
        match self.objective.energy(&pose, &self.joints(x), &state.correspondences) {
            Ok(e) => e.total,
            Err(_) => f64::NAN,
        }
    }

    fn gradient(&self, state: &GraspState, x: &DVector<f64>) -> DVector<f64> {
        let Ok(g) =
            self.objective.energy_gradient(&state.reference, &Self::wrist(x), &self.joints(x), &state.correspondences)
        else {
            return DVector::from_element(x.len(), f64::NAN);
        };
        let ni = self.independent.len();
        let mut out = DVector::zeros(x.len());
        for i in 0..6 {
            out[i] = g.wrist[i];
        }
        for (k, &j) in self.independent.iter().enumerate() {
            out[6 + k] = g.joints[j];
        }
        for (k, &j) in self.dependent.iter().enumerate() {
            out[6 + ni + k] = g.joints[j];
        }
        out
    }

    fn initial_hessian(&self, state: &GraspState, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let h = self.objective.gauss_newton(&state.reference, &Self::wrist(x), &self.joints(x));
        let order: Vec<usize> =
            (0..6).chain(self.independent.iter().chain(&self.dependent).map(|&j| 6 + j)).collect();
        Some(DMatrix::from_fn(order.len(), order.len(), |r, c| h[(order[r], order[c])]))
    }

    fn perturb(&self, x0: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let mut x = x0.clone();
        for i in 0..3 {
            if self.upper[i] > self.lower[i] {
                x[i] += rng.random_range(-RESTART_TRANSLATION_JITTER..=RESTART_TRANSLATION_JITTER);
            }
        }
        for k in 0..self.independent.len() {
            x[6 + k] += rng.random_range(-RESTART_ANGLE_JITTER..=RESTART_ANGLE_JITTER);
        }
        self.fill_dependent(&mut x);
        self.clamp(&mut x);
        x
    }
}

/// Outcome of a grasp synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSolution {
    pub vars: GraspVariables,
    /// Every revolute joint, as solved.
    pub full_angles: JointAngles,
    /// Alignment energy in m².
    pub energy: f64,
    /// `‖M θ_I − θ_D‖∞`.
    pub constraint_violation: f64,
    pub status: SolveStatus,
    pub stage_trace: Vec<StageRecord>,
    #[serde(default)]
    pub per_pair: Vec<PairEnergy>,
    #[serde(default)]
    pub correspondence_version: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub restart: usize,
}

impl GraspSolution {
    pub fn save(&self, path: &Path) -> Result<(), GraspError> {
        let text = serde_json::to_string_pretty(self).expect("solution serializes");
        std::fs::write(path, text)
            .map_err(|e| GraspError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, GraspError> {
        let io = |message: String| GraspError::Io { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}

/// Synthesizes a grasp from `initial` with the given cascade schedule.
///
/// The wrist reference is `initial`'s reference; pass `freeze_wrist` to keep
/// the wrist at `initial.wrist_pose()`.
pub fn solve_grasp(
    model: &HandModel,
    coupling: &CouplingModel,
    task: &GraspTask,
    initial: &GraspVariables,
    schedule: &CascadeSchedule,
    freeze_wrist: bool,
    options: &SolveOptions,
) -> Result<GraspSolution, GraspError> {
    let reference = if freeze_wrist { initial.wrist_pose() } else { initial.reference };
    let problem = GraspProblem::new(model, coupling, task, reference, freeze_wrist)?;
    let x0 = problem.initial_point(initial)?;
    let out = cascade_solve(&problem, schedule, &x0, options)?;
    problem.solution(&out.x, &out.state, out.status, out.stage_trace, options, out.restart)
}
