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
//! Constrained optimization: an SQP solver for smooth objectives with linear
//! equalities and box bounds, and the staged constraint cascade built on it.

mod cascade;
mod numdiff;
mod qp;
mod sqp;

pub use cascade::{
    cascade_solve, default_schedule, CascadeOutcome, CascadeProblem, CascadeSchedule, StageRecord,
};
pub use numdiff::central_gradient;
pub use sqp::{kkt_residual, sqp_solve, unconstrained_stage_solve, NlpProblem, SqpOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("equality rows are linearly dependent: rank {rank} of {rows}")]
    RankDeficientConstraints { rows: usize, rank: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds at coordinate {index}: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("invalid solve options: {0}")]
    InvalidOptions(String),
    #[error("invalid cascade schedule: {0}")]
    InvalidSchedule(String),
}

impl SolverError {
    pub fn kind(&self) -> &'static str {
        match self {
            SolverError::RankDeficientConstraints { .. } => "RankDeficientConstraints",
            SolverError::DimensionMismatch(_) => "DimensionMismatch",
            SolverError::InvalidBounds { .. } => "InvalidBounds",
            SolverError::InvalidOptions(_) => "InvalidOptions",
            SolverError::InvalidSchedule(_) => "InvalidSchedule",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

/// Tolerances and limits for one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Iteration cap per SQP run (per cascade stage).
    pub max_iterations: usize,
    /// Relative objective change accepted as stalled progress.
    pub tol_objective: f64,
    /// Equality violation, ∞-norm.
    pub tol_constraint: f64,
    /// Step length, relative to `1 + ‖x‖∞`.
    pub tol_step: f64,
    /// Projected gradient, relative to `1 + |f|`.
    pub kkt_tolerance: f64,
    /// Restart count for the cascade; 1 means the given start only.
    pub restarts: usize,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 200,
            tol_objective: 1e-8,
            tol_constraint: 1e-6,
            tol_step: 1e-9,
            kkt_tolerance: 1e-5,
            restarts: 5,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("tol_objective", self.tol_objective),
            ("tol_constraint", self.tol_constraint),
            ("tol_step", self.tol_step),
            ("kkt_tolerance", self.kkt_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidOptions("max_iterations must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(SolverError::InvalidOptions("restarts must be positive".into()));
        }
        Ok(())
    }
}
