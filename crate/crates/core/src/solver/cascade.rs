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
//! Staged constraint activation with warm starts and multi-start restarts.

use super::sqp::{sqp_solve, NlpProblem};
use super::{SolveOptions, SolveStatus, SolverError};
use crate::coupling::CouplingModel;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Ordered constraint-row subsets, each containing the previous one; the last
/// holds every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct CascadeSchedule {
    stages: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawSchedule {
    stages: Vec<Vec<usize>>,
}

impl TryFrom<RawSchedule> for CascadeSchedule {
    type Error = SolverError;

    fn try_from(raw: RawSchedule) -> Result<Self, SolverError> {
        CascadeSchedule::from_stages(raw.stages)
    }
}

impl CascadeSchedule {
    /// Checks nesting only; completeness is checked against a row count with
    /// [`CascadeSchedule::validate_rows`].
    pub fn from_stages(stages: Vec<Vec<usize>>) -> Result<Self, SolverError> {
        if stages.is_empty() {
            return Err(SolverError::InvalidSchedule("no stages".into()));
        }
        let mut normalized = Vec::with_capacity(stages.len());
        let mut previous = BTreeSet::new();
        for (s, rows) in stages.into_iter().enumerate() {
            let set: BTreeSet<usize> = rows.iter().copied().collect();
            if set.len() != rows.len() {
                return Err(SolverError::InvalidSchedule(format!("stage {s} repeats a row")));
            }
            if !previous.is_subset(&set) {
                return Err(SolverError::InvalidSchedule(format!(
                    "stage {s} drops rows active in stage {}",
                    s - 1
                )));
            }
            normalized.push(set.iter().copied().collect());
            previous = set;
        }
        Ok(CascadeSchedule { stages: normalized })
    }

    /// Checks every stage against `rows` constraint rows and that the final
    /// stage activates all of them.
    pub fn validate_rows(&self, rows: usize) -> Result<(), SolverError> {
        for (s, stage) in self.stages.iter().enumerate() {
            if let Some(&r) = stage.iter().find(|&&r| r >= rows) {
                return Err(SolverError::InvalidSchedule(format!(
                    "stage {s} names row {r} but only {rows} rows exist"
                )));
            }
        }
        let last = self.stages.last().expect("non-empty").len();
        if last != rows {
            return Err(SolverError::InvalidSchedule(format!(
                "final stage activates {last} of {rows} rows"
            )));
        }
        Ok(())
    }

    /// One stage with every row: a direct constrained solve.
    pub fn single_stage(rows: usize) -> Self {
        CascadeSchedule { stages: vec![(0..rows).collect()] }
    }

    pub fn stages(&self) -> &[Vec<usize>] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// `[∅, finger 1, fingers 1–2, …, all rows]` with the thumb last.
pub fn default_schedule(coupling: &CouplingModel) -> CascadeSchedule {
    let mut stages = vec![Vec::new()];
    let mut acc: Vec<usize> = Vec::new();
    for group in coupling.finger_row_groups() {
        acc.extend(group);
        let mut stage = acc.clone();
        stage.sort_unstable();
        stages.push(stage);
    }
    CascadeSchedule { stages }
}

/// A problem the cascade can drive stage by stage.
///
/// The state carries whatever the objective freezes within a stage, such as
/// nearest-point correspondences.
pub trait CascadeProblem: Sync {
    type State: Clone + Send;

    fn dimension(&self) -> usize;

    fn bounds(&self) -> (DVector<f64>, DVector<f64>);

    /// All equality rows `A x = b`; stages select subsets of them.
    fn constraints(&self) -> (DMatrix<f64>, DVector<f64>);

    /// Prepares a stage starting from `x`. The returned vector is the start
    /// expressed in the new state's parameterization.
    fn begin_stage(&self, previous: Option<&Self::State>, x: DVector<f64>) -> (Self::State, DVector<f64>);

    fn objective(&self, state: &Self::State, x: &DVector<f64>) -> f64;

    fn gradient(&self, state: &Self::State, x: &DVector<f64>) -> DVector<f64>;

    /// Optional starting Hessian approximation for a stage's SQP run.
    fn initial_hessian(&self, _state: &Self::State, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Start point for a restart other than the first.
    fn perturb(&self, x0: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub active_rows: usize,
    pub energy: f64,
    /// Violation of all equality rows, not just the active ones.
    pub violation: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome<S> {
    pub x: DVector<f64>,
    pub state: S,
    pub status: SolveStatus,
    pub energy: f64,
    pub constraint_violation: f64,
    pub stage_trace: Vec<StageRecord>,
    /// Index of the restart that was kept; 0 is the unperturbed start.
    pub restart: usize,
    /// Final energy and status of every restart, by index.
    pub restart_summary: Vec<(f64, SolveStatus)>,
}

/// Runs the cascade from `x0` and from `options.restarts − 1` perturbed
/// starts, keeping the best feasible result.
///
/// Restarts run in parallel. The reduction prefers converged, then feasible,
/// then lowest energy, then the lowest restart index.
pub fn cascade_solve<P: CascadeProblem>(
    problem: &P,
    schedule: &CascadeSchedule,
    x0: &DVector<f64>,
    options: &SolveOptions,
) -> Result<CascadeOutcome<P::State>, SolverError> {
    options.validate()?;
    let (a, b) = problem.constraints();
    schedule.validate_rows(a.nrows())?;
    if x0.len() != problem.dimension() {
        return Err(SolverError::DimensionMismatch(format!(
            "x0 has length {} for dimension {}",
            x0.len(),
            problem.dimension()
        )));
    }
    let runs: Vec<CascadeOutcome<P::State>> = (0..options.restarts)
        .into_par_iter()
        .map(|k| {
            let start = if k == 0 {
                x0.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(k as u64);
                problem.perturb(x0, &mut rng)
            };
            run_cascade(problem, schedule, &a, &b, start, options).map(|mut o| {
                o.restart = k;
                o
            })
        })
        .collect::<Result<_, _>>()?;

    let summary: Vec<(f64, SolveStatus)> = runs.iter().map(|r| (r.energy, r.status)).collect();
    let key = |r: &CascadeOutcome<P::State>| {
        let energy = if r.energy.is_finite() { r.energy } else { f64::INFINITY };
        (!r.status.is_converged(), r.constraint_violation > options.tol_constraint, energy)
    };
    let mut best: Option<CascadeOutcome<P::State>> = None;
    for run in runs {
        let better = match &best {
            None => true,
            Some(b) => {
                let (kr, kb) = (key(&run), key(b));
                (kr.0, kr.1) < (kb.0, kb.1) || ((kr.0, kr.1) == (kb.0, kb.1) && kr.2 < kb.2)
            }
        };
        if better {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_summary = summary;
    Ok(best)
}

fn run_cascade<P: CascadeProblem>(
    problem: &P,
    schedule: &CascadeSchedule,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    start: DVector<f64>,
    options: &SolveOptions,
) -> Result<CascadeOutcome<P::State>, SolverError> {
    let (lower, upper) = problem.bounds();
    let mut x = start;
    let mut state: Option<P::State> = None;
    let mut trace = Vec::with_capacity(schedule.len());
    let mut status = SolveStatus::Converged;
    let mut energy = f64::NAN;
    for (s, rows) in schedule.stages().iter().enumerate() {
        let (st, x_stage) = problem.begin_stage(state.as_ref(), x);
        let a_s = DMatrix::from_fn(rows.len(), a.ncols(), |r, c| a[(rows[r], c)]);
        let b_s = DVector::from_fn(rows.len(), |r, _| b[rows[r]]);
        let st_ref = &st;
        let hessian = problem.initial_hessian(&st, &x_stage);
        let mut nlp = NlpProblem::new(
            problem.dimension(),
            move |x| problem.objective(st_ref, x),
            move |x| problem.gradient(st_ref, x),
        )
        .with_bounds(lower.clone(), upper.clone())
        .with_equalities(a_s, b_s);
        if let Some(h) = hessian {
            nlp = nlp.with_initial_hessian(h);
        }
        let out = sqp_solve(&nlp, &x_stage, options)?;
        drop(nlp);
        let violation = if a.nrows() == 0 { 0.0 } else { (a * &out.x - b).amax() };
        trace.push(StageRecord {
            stage: s,
            active_rows: rows.len(),
            energy: out.objective,
            violation,
            iterations: out.iterations,
            status: out.status,
        });
        log::debug!(
            "stage {s}: {} rows, energy {:.3e}, violation {:.1e}, {} iterations, {}",
            rows.len(),
            out.objective,
            violation,
            out.iterations,
            out.status
        );
        status = out.status;
        energy = out.objective;
        x = out.x;
        state = Some(st);
    }
    let constraint_violation = if a.nrows() == 0 { 0.0 } else { (a * &x - b).amax() };
    Ok(CascadeOutcome {
        x,
        state: state.expect("at least one stage"),
        status,
        energy,
        constraint_violation,
        stage_trace: trace,
        restart: 0,
        restart_summary: Vec::new(),
    })
}
