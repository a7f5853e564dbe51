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

//! Design studies: every variant of a base hand solved on every task.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use softhand::coupling::CouplingModel;
use softhand::grasp::GraspSolution;
use softhand::model::HandModel;
use softhand::objective::PairEnergy;
use softhand::solver::{CascadeSchedule, SolveOptions, SolveStatus};

use crate::files::{load_coupling, load_model, load_schedule, load_task, StudyConfig, TaskSpec, VariantSpec};
use crate::pipeline::{effective_coupling, solve_spec, variant_model};
use crate::{Diagnostic, StudioError};

/// Name of the unedited base hand in reports and sessions.
pub const BASE_VARIANT: &str = "base";

/// Result of one (variant, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome")]
pub enum CellOutcome {
    Solved {
        status: SolveStatus,
        /// m²
        energy: f64,
        constraint_violation: f64,
        per_pair: Vec<PairEnergy>,
    },
    Failed {
        kind: String,
        message: String,
    },
}

impl CellOutcome {
    pub fn from_solution(s: &GraspSolution) -> Self {
        CellOutcome::Solved {
            status: s.status,
            energy: s.energy,
            constraint_violation: s.constraint_violation,
            per_pair: s.per_pair.clone(),
        }
    }

    pub fn failed(d: Diagnostic) -> Self {
        CellOutcome::Failed { kind: d.kind, message: d.message }
    }

    pub fn energy(&self) -> Option<f64> {
        match self {
            CellOutcome::Solved { energy, .. } => Some(*energy),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: String,
    pub task: String,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub variant: String,
    /// Mean energy over the solved cells; absent when none solved.
    pub mean_energy: Option<f64>,
    pub solved: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub seed: u64,
    pub variants: Vec<String>,
    pub tasks: Vec<String>,
    /// Variant-major, one row per (variant, task).
    pub rows: Vec<ReportRow>,
    /// Best variant first: fewest failures, then lowest mean energy.
    pub ranking: Vec<RankEntry>,
    /// The unedited base hand on every task, for reference.
    #[serde(default)]
    pub baseline: Vec<ReportRow>,
}

impl DesignReport {
    /// Assembles a report from finished rows and computes the ranking.
    pub fn from_rows(
        seed: u64,
        variants: Vec<String>,
        tasks: Vec<String>,
        rows: Vec<ReportRow>,
        baseline: Vec<ReportRow>,
    ) -> Self {
        let mut ranking: Vec<RankEntry> = variants
            .iter()
            .map(|v| {
                let energies: Vec<f64> =
                    rows.iter().filter(|r| &r.variant == v).filter_map(|r| r.outcome.energy()).collect();
                let total = rows.iter().filter(|r| &r.variant == v).count();
                RankEntry {
                    variant: v.clone(),
                    mean_energy: (!energies.is_empty())
                        .then(|| energies.iter().sum::<f64>() / energies.len() as f64),
                    solved: energies.len(),
                    failed: total - energies.len(),
                }
            })
            .collect();
        ranking.sort_by(|a, b| {
            a.failed
                .cmp(&b.failed)
                .then(a.mean_energy.unwrap_or(f64::INFINITY).total_cmp(&b.mean_energy.unwrap_or(f64::INFINITY)))
                .then(a.variant.cmp(&b.variant))
        });
        DesignReport { seed, variants, tasks, rows, ranking, baseline }
    }

    pub fn row(&self, variant: &str, task: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.variant == variant && r.task == task)
    }

    /// Plain-text table of every cell followed by the ranking.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "{:<16} {:<16} {:<17} {:>12} {:>12}", "variant", "task", "status", "energy_m2", "violation");
        let cells = self.rows.iter().chain(&self.baseline);
        for r in cells {
            let (status, energy, viol) = match &r.outcome {
                CellOutcome::Solved { status, energy, constraint_violation, .. } => {
                    (status.to_string(), format!("{energy:.4e}"), format!("{constraint_violation:.2e}"))
                }
                CellOutcome::Failed { kind, .. } => (format!("Failed({kind})"), "-".into(), "-".into()),
            };
            let _ = writeln!(out, "{:<16} {:<16} {:<17} {:>12} {:>12}", r.variant, r.task, status, energy, viol);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<6} {:<16} {:>14} {:>7} {:>7}", "rank", "variant", "mean_energy", "solved", "failed");
        for (i, e) in self.ranking.iter().enumerate() {
            let mean = e.mean_energy.map(|m| format!("{m:.4e}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:<6} {:<16} {:>14} {:>7} {:>7}", i + 1, e.variant, mean, e.solved, e.failed);
        }
        out
    }
}

/// A task that may have failed to load; failures become Failed cells.
pub type StudyTask = (String, Result<TaskSpec, Diagnostic>);

fn solve_cell(
    model: &Result<HandModel, Diagnostic>,
    coupling: Option<&CouplingModel>,
    task: &Result<TaskSpec, Diagnostic>,
    schedule: Option<&CascadeSchedule>,
    options: &SolveOptions,
) -> CellOutcome {
    let run = || -> Result<GraspSolution, Diagnostic> {
        let model = model.as_ref().map_err(Clone::clone)?;
        let task = task.as_ref().map_err(Clone::clone)?;
        let (coupling, _) = effective_coupling(model, coupling).map_err(|e| e.diagnostic())?;
        solve_spec(model, &coupling, task, schedule, options).map_err(|e| e.diagnostic())
    };
    match run() {
        Ok(s) => CellOutcome::from_solution(&s),
        Err(d) => CellOutcome::failed(d),
    }
}

/// Solves every variant on every task. Per-cell problems (a bad edit, a
/// task that does not fit the hand, a solver error) are recorded as Failed
/// cells and the run continues.
pub fn run_study(
    base: &HandModel,
    coupling: Option<&CouplingModel>,
    variants: &[VariantSpec],
    tasks: &[StudyTask],
    schedule: Option<&CascadeSchedule>,
    options: &SolveOptions,
) -> DesignReport {
    let solve_all = |name: &str, model: Result<HandModel, Diagnostic>| -> Vec<ReportRow> {
        tasks
            .iter()
            .map(|(task_name, task)| {
                log::info!("solving {name} / {task_name}");
                ReportRow {
                    variant: name.to_string(),
                    task: task_name.clone(),
                    outcome: solve_cell(&model, coupling, task, schedule, options),
                }
            })
            .collect()
    };
    let mut rows = Vec::new();
    for v in variants {
        rows.extend(solve_all(&v.name, variant_model(base, &v.edits).map_err(|e| e.diagnostic())));
    }
    let baseline = solve_all(BASE_VARIANT, Ok(base.clone()));
    DesignReport::from_rows(
        options.seed,
        variants.iter().map(|v| v.name.clone()).collect(),
        tasks.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        baseline,
    )
}

/// Loads a study configuration's inputs and runs it. `seed` overrides the
/// configured seed. Problems with the base hand, coupling or schedule abort
/// the run; problems with individual tasks do not.
pub fn run_study_config(config: &StudyConfig, seed: Option<u64>) -> Result<DesignReport, StudioError> {
    let mut names = std::collections::BTreeSet::new();
    for v in &config.variants {
        if !names.insert(v.name.as_str()) || v.name == BASE_VARIANT {
            return Err(StudioError::Duplicate { what: "variant", name: v.name.clone() });
        }
    }
    let base = load_model(&config.base_urdf)?;
    let coupling = config.coupling.as_deref().map(load_coupling).transpose()?;
    let schedule = config.schedule.as_deref().map(load_schedule).transpose()?;
    let mut options = config.options.clone().unwrap_or_default();
    options.seed = seed.or(config.seed).unwrap_or(0);
    options.validate()?;
    let tasks: Vec<StudyTask> = config
        .tasks
        .iter()
        .map(|path| match load_task(path) {
            Ok(spec) => (spec.task.name.clone(), Ok(spec)),
            Err(e) => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (stem, Err(e.diagnostic()))
            }
        })
        .collect();
    Ok(run_study(&base, coupling.as_ref(), &config.variants, &tasks, schedule.as_ref(), &options))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solved(energy: f64) -> CellOutcome {
        CellOutcome::Solved { status: SolveStatus::Converged, energy, constraint_violation: 0.0, per_pair: Vec::new() }
    }

    fn row(v: &str, t: &str, outcome: CellOutcome) -> ReportRow {
        ReportRow { variant: v.into(), task: t.into(), outcome }
    }

    #[test]
    fn ranking_prefers_complete_then_low_energy() {
        let failed = CellOutcome::Failed { kind: "X".into(), message: "m".into() };
        let rows = vec![
            row("a", "t1", solved(3.0)),
            row("a", "t2", solved(1.0)),
            row("b", "t1", solved(0.1)),
            row("b", "t2", failed),
            row("c", "t1", solved(1.0)),
            row("c", "t2", solved(1.0)),
        ];
        let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let r = DesignReport::from_rows(7, names(&["a", "b", "c"]), names(&["t1", "t2"]), rows, Vec::new());
        let order: Vec<&str> = r.ranking.iter().map(|e| e.variant.as_str()).collect();
        assert_eq!(order, ["c", "a", "b"]);
        assert_eq!(r.ranking[1].mean_energy, Some(2.0));
        assert_eq!(r.ranking[2].failed, 1);
        let table = r.to_table();
        assert!(table.contains("Failed(X)"));
        assert!(table.starts_with("seed 7"));
    }

    #[test]
    fn rows_flatten_their_outcome() {
        let r = row("a", "t", solved(0.5));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["outcome"], "Solved");
        assert_eq!(v["energy"], 0.5);
        assert_eq!(serde_json::from_value::<ReportRow>(v).unwrap(), r);
    }
}
