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

//! Design sessions: a base hand, its variants, tasks and solve history,
//! persisted as one JSON file per session.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use softhand::coupling::CouplingModel;
use softhand::grasp::GraspSolution;
use softhand::model::{parse_urdf, HandModel};
use softhand::solver::SolveOptions;

use crate::files::{write_json, TaskSpec, VariantSpec};
use crate::pipeline::{effective_coupling, variant_model};
use crate::scene::{build_scene, SceneDocument};
use crate::study::{CellOutcome, DesignReport, ReportRow, BASE_VARIANT};
use crate::StudioError;

/// One finished solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub solve_id: String,
    pub variant: String,
    pub task: String,
    pub seed: u64,
    pub created: DateTime<Utc>,
    pub solution: GraspSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSession {
    pub id: String,
    pub name: String,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
    /// URDF text of the base hand; variants are rebuilt from it.
    pub base_urdf: String,
    #[serde(default)]
    pub coupling: Option<CouplingModel>,
    #[serde(default)]
    pub options: SolveOptions,
    /// Edited variants; the base hand is the implicit variant `base`.
    #[serde(default)]
    pub variants: Vec<VariantSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    /// Every solve, oldest first.
    #[serde(default)]
    pub results: Vec<SolveRecord>,
}

/// Listing entry for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub name: String,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
    pub variants: usize,
    pub tasks: usize,
    pub results: usize,
}

impl DesignSession {
    /// Validates the URDF and coupling and starts an empty session.
    pub fn new(
        id: String,
        name: String,
        base_urdf: String,
        coupling: Option<CouplingModel>,
        options: SolveOptions,
        now: DateTime<Utc>,
    ) -> Result<Self, StudioError> {
        let model = parse_urdf(&base_urdf)?;
        effective_coupling(&model, coupling.as_ref())?;
        options.validate()?;
        Ok(DesignSession {
            id,
            name,
            created: now,
            modified: now,
            base_urdf,
            coupling,
            options,
            variants: Vec::new(),
            tasks: Vec::new(),
            results: Vec::new(),
        })
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            created: self.created,
            modified: self.modified,
            variants: self.variants.len(),
            tasks: self.tasks.len(),
            results: self.results.len(),
        }
    }

    pub fn base_model(&self) -> Result<HandModel, StudioError> {
        Ok(parse_urdf(&self.base_urdf)?)
    }

    /// Variant names, `base` first.
    pub fn variant_names(&self) -> Vec<String> {
        std::iter::once(BASE_VARIANT.to_string()).chain(self.variants.iter().map(|v| v.name.clone())).collect()
    }

    pub fn variant_model(&self, variant: &str) -> Result<HandModel, StudioError> {
        let base = self.base_model()?;
        if variant == BASE_VARIANT {
            return Ok(base);
        }
        let spec = self
            .variants
            .iter()
            .find(|v| v.name == variant)
            .ok_or_else(|| StudioError::Unknown { what: "variant", name: variant.into() })?;
        variant_model(&base, &spec.edits)
    }

    pub fn coupling_for(&self, model: &HandModel) -> Result<CouplingModel, StudioError> {
        Ok(effective_coupling(model, self.coupling.as_ref())?.0)
    }

    pub fn task(&self, name: &str) -> Result<&TaskSpec, StudioError> {
        self.tasks
            .iter()
            .find(|t| t.task.name == name)
            .ok_or_else(|| StudioError::Unknown { what: "task", name: name.into() })
    }

    pub fn add_variant(&mut self, spec: VariantSpec, now: DateTime<Utc>) -> Result<(), StudioError> {
        if spec.name.is_empty() {
            return Err(StudioError::Invalid("variant name is empty".into()));
        }
        if self.variant_names().contains(&spec.name) {
            return Err(StudioError::Duplicate { what: "variant", name: spec.name });
        }
        variant_model(&self.base_model()?, &spec.edits)?;
        self.variants.push(spec);
        self.modified = now;
        Ok(())
    }

    pub fn add_task(&mut self, spec: TaskSpec, now: DateTime<Utc>) -> Result<(), StudioError> {
        if spec.task.name.is_empty() {
            return Err(StudioError::Invalid("task name is empty".into()));
        }
        if self.tasks.iter().any(|t| t.task.name == spec.task.name) {
            return Err(StudioError::Duplicate { what: "task", name: spec.task.name });
        }
        let model = self.base_model()?;
        spec.task.validate(&model)?;
        spec.initial_variables(&model, &self.coupling_for(&model)?)?;
        self.tasks.push(spec);
        self.modified = now;
        Ok(())
    }

    /// Appends a solve and returns its id.
    pub fn record(
        &mut self,
        variant: String,
        task: String,
        solution: GraspSolution,
        now: DateTime<Utc>,
    ) -> String {
        let solve_id = format!("s{:04}", self.results.len() + 1);
        self.results.push(SolveRecord {
            solve_id: solve_id.clone(),
            variant,
            task,
            seed: solution.seed,
            created: now,
            solution,
        });
        self.modified = now;
        solve_id
    }

    pub fn result(&self, solve_id: &str) -> Result<&SolveRecord, StudioError> {
        self.results
            .iter()
            .find(|r| r.solve_id == solve_id)
            .ok_or_else(|| StudioError::Unknown { what: "solve", name: solve_id.into() })
    }

    /// Scene of a stored solve, rebuilt from the session's inputs.
    pub fn scene(&self, solve_id: &str) -> Result<SceneDocument, StudioError> {
        let record = self.result(solve_id)?;
        let model = self.variant_model(&record.variant)?;
        build_scene(&model, &self.task(&record.task)?.task, &record.solution, &record.variant)
    }

    /// Latest solve of every (variant, task) cell; cells never solved are
    /// marked Failed with kind `NotSolved`. Base cells go to the baseline.
    pub fn report(&self) -> DesignReport {
        let tasks: Vec<String> = self.tasks.iter().map(|t| t.task.name.clone()).collect();
        let cells = |v: &str| -> Vec<ReportRow> {
            tasks
                .iter()
                .map(|t| {
                    let latest = self.results.iter().rev().find(|r| r.variant == v && &r.task == t);
                    let outcome = match latest {
                        Some(r) => CellOutcome::from_solution(&r.solution),
                        None => CellOutcome::Failed { kind: "NotSolved".into(), message: "no solve yet".into() },
                    };
                    ReportRow { variant: v.to_string(), task: t.clone(), outcome }
                })
                .collect()
        };
        let variants: Vec<String> = self.variants.iter().map(|v| v.name.clone()).collect();
        let rows = variants.iter().flat_map(|v| cells(v)).collect();
        let baseline = cells(BASE_VARIANT);
        DesignReport::from_rows(self.options.seed, variants, tasks.clone(), rows, baseline)
    }
}

/// Session files under `<data>/sessions/<id>.json`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, StudioError> {
        let dir = data_dir.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|e| StudioError::io(&dir, e))?;
        Ok(SessionStore { dir })
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes through a temporary file so a crash never leaves a torn file.
    pub fn save(&self, session: &DesignSession) -> Result<(), StudioError> {
        let path = self.path(&session.id);
        let tmp = self.dir.join(format!(".{}.json.tmp", session.id));
        write_json(&tmp, session)?;
        std::fs::rename(&tmp, &path).map_err(|e| StudioError::io(&path, e))
    }

    /// Every stored session, in file-name order.
    pub fn load_all(&self) -> Result<Vec<DesignSession>, StudioError> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&self.dir)
            .map_err(|e| StudioError::io(&self.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).map_err(|e| StudioError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| StudioError::parse(p.display().to_string(), e))
            })
            .collect()
    }
}
