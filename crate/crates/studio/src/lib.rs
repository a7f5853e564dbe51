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

//! Design-studio tooling on top of `softhand`: file formats, procedural
//! example content, scene export, design studies, session storage and the
//! HTTP service.

pub mod example;
pub mod files;
pub mod pipeline;
pub mod procedural;
pub mod scene;
pub mod server;
pub mod session;
pub mod study;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use softhand::coupling::CouplingError;
use softhand::grasp::GraspError;
use softhand::model::ModelError;
use softhand::objective::ObjectiveError;
use softhand::solver::SolverError;
use softhand::RigidTransform;
use thiserror::Error;

/// A rigid edit of one joint origin, applied on the parent side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEdit {
    pub joint: String,
    pub delta: RigidTransform,
}

#[derive(Debug, Error)]
pub enum StudioError {
    #[error("cannot access {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },
    #[error("unresolved mesh files: {}", display_paths(.0))]
    UnresolvedMesh(Vec<PathBuf>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("unknown {what} {name}")]
    Unknown { what: &'static str, name: String },
    #[error("{what} {name} already exists")]
    Duplicate { what: &'static str, name: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

impl StudioError {
    pub fn io(path: impl Into<PathBuf>, err: impl ToString) -> Self {
        StudioError::Io { path: path.into(), message: err.to_string() }
    }

    pub fn parse(what: impl Into<String>, err: impl ToString) -> Self {
        StudioError::Parse { what: what.into(), message: err.to_string() }
    }

    /// Stable machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            StudioError::Io { .. } => "Io",
            StudioError::Parse { .. } => "Parse",
            StudioError::UnresolvedMesh(_) => "UnresolvedMesh",
            StudioError::Model(e) => e.kind(),
            StudioError::Coupling(e) => e.kind(),
            StudioError::Objective(e) => e.kind(),
            StudioError::Grasp(e) => e.kind(),
            StudioError::Solver(e) => e.kind(),
            StudioError::Unknown { .. } => "NotFound",
            StudioError::Duplicate { .. } => "Duplicate",
            StudioError::Invalid(_) => "Invalid",
        }
    }

    /// Files the error is about, if any.
    pub fn paths(&self) -> Vec<String> {
        match self {
            StudioError::Io { path, .. } => vec![path.display().to_string()],
            StudioError::UnresolvedMesh(paths) => paths.iter().map(|p| p.display().to_string()).collect(),
            StudioError::Model(ModelError::MissingMesh { path, .. })
            | StudioError::Model(ModelError::Io { path, .. }) => vec![path.display().to_string()],
            _ => Vec::new(),
        }
    }

    /// Process exit code used by the command-line tool: 1 for I/O, 3 for
    /// mesh files that do not resolve, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudioError::Io { .. } | StudioError::Model(ModelError::Io { .. }) => 1,
            StudioError::Grasp(GraspError::Io { .. }) => 1,
            StudioError::UnresolvedMesh(_) | StudioError::Model(ModelError::MissingMesh { .. }) => 3,
            _ => 2,
        }
    }

    pub fn diagnostic(&self) -> Diagnostic {
        Diagnostic { kind: self.kind().to_string(), message: self.to_string(), paths: self.paths() }
    }
}

/// Machine-readable error report, printed as JSON on stderr by the CLI and
/// returned as the body of HTTP error responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<String>,
}
