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

//! `softhand-studio`: validate hands, fit couplings, solve grasps, run
//! design studies and serve design sessions over HTTP.
//!
//! Exit codes: 0 success, 1 I/O error, 2 parse or model error, 3 unresolved
//! mesh file, 4 solve finished without converging. Errors are printed to
//! stderr as one JSON object.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;
use softhand::coupling::{fit_coupling, IndependentChoice};
use softhand::solver::{SolveOptions, SolveStatus};
use softhand_studio::example::write_example;
use softhand_studio::files::{load_coupling, load_model, load_schedule, load_task, load_trajectories, write_json, StudyConfig};
use softhand_studio::pipeline::{effective_coupling, solve_spec};
use softhand_studio::scene::build_scene;
use softhand_studio::server::{app, ServiceConfig};
use softhand_studio::study::run_study_config;
use softhand_studio::{Diagnostic, StudioError};

const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Parser)]
#[command(name = "softhand-studio", version, about = "Soft hand design and grasp synthesis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a URDF file, its meshes and patch sidecar.
    Validate { urdf: PathBuf },
    /// Fit coupling weights to recorded flexion trajectories.
    FitCoupling {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Joint name pattern; `{finger}` and `{k}` (1..3) are substituted.
        #[arg(long, default_value = "{finger}_j{k}")]
        joint_template: String,
        /// Further independent joints without weights (e.g. thumb abduction).
        #[arg(long = "extra-independent", value_delimiter = ',')]
        extra_independent: Vec<String>,
    },
    /// Synthesize one grasp; writes solution.json and scene.json.
    Solve {
        #[arg(long)]
        urdf: PathBuf,
        #[arg(long)]
        coupling: PathBuf,
        #[arg(long)]
        task: PathBuf,
        /// Cascade schedule JSON (default: one stage per finger group).
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, env = "STUDIO_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Exit 0 even when the solve did not converge.
        #[arg(long)]
        allow_partial: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a design study; writes report.json and report.txt.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long, env = "STUDIO_SEED")]
        seed: Option<u64>,
    },
    /// Serve design sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "STUDIO_DATA", default_value = "studio-data")]
        data: PathBuf,
        /// Concurrent solves (default: number of processors).
        #[arg(long)]
        workers: Option<usize>,
        /// Seed for solve requests that do not give one.
        #[arg(long, env = "STUDIO_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Write the procedural example hand, tasks and study configuration.
    GenerateExample {
        #[arg(long)]
        out: PathBuf,
    },
}

fn create_dir(dir: &Path) -> Result<(), StudioError> {
    std::fs::create_dir_all(dir).map_err(|e| StudioError::io(dir, e))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value"));
}

fn validate(urdf: &Path) -> Result<i32, StudioError> {
    let model = load_model(urdf)?;
    for w in model.warnings() {
        log::warn!("{w}");
    }
    print_json(&json!({
        "name": model.name(),
        "root": model.root(),
        "links": model.links().len(),
        "joints": model.joints().len(),
        "revolute_joints": model.revolute_joints().count(),
        "patches": model.patches().count(),
        "warnings": model.warnings(),
    }));
    Ok(0)
}

fn fit(input: &Path, output: &Path, template: String, extra: Vec<String>) -> Result<i32, StudioError> {
    let data = load_trajectories(input)?;
    let choice = IndependentChoice { joint_template: template, extra_independent: extra };
    let fit = fit_coupling(&data, &choice)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(output, &fit.model)?;
    println!("{:<10} {:>8} {:>14} {:>14} {:>12} {:>12}", "finger", "samples", "m2", "m3", "rms2_rad", "rms3_rad");
    for f in &fit.fingers {
        println!(
            "{:<10} {:>8} {:>14.10} {:>14.10} {:>12.3e} {:>12.3e}",
            f.finger, f.samples, f.m2, f.m3, f.rms2, f.rms3
        );
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn solve(
    urdf: &Path,
    coupling: &Path,
    task: &Path,
    schedule: Option<&Path>,
    options: SolveOptions,
    allow_partial: bool,
    out: &Path,
) -> Result<i32, StudioError> {
    let model = load_model(urdf)?;
    let coupling = load_coupling(coupling)?;
    let (coupling, added) = effective_coupling(&model, Some(&coupling))?;
    if !added.is_empty() {
        log::warn!("joints missing from the coupling are treated as independent: {}", added.join(", "));
    }
    let spec = load_task(task)?;
    let schedule = schedule.map(load_schedule).transpose()?;
    options.validate()?;
    let solution = solve_spec(&model, &coupling, &spec, schedule.as_ref(), &options)?;
    let scene = build_scene(&model, &spec.task, &solution, "base")?;
    create_dir(out)?;
    write_json(&out.join("solution.json"), &solution)?;
    write_json(&out.join("scene.json"), &scene)?;
    print_json(&json!({
        "status": solution.status,
        "energy": solution.energy,
        "constraint_violation": solution.constraint_violation,
        "seed": solution.seed,
    }));
    if solution.status != SolveStatus::Converged && !allow_partial {
        let d = Diagnostic {
            kind: solution.status.to_string(),
            message: format!("solve ended with status {} (energy {:.3e} m²)", solution.status, solution.energy),
            paths: Vec::new(),
        };
        eprintln!("{}", serde_json::to_string(&d).expect("diagnostic"));
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn study(config: &Path, out: &Path, seed: Option<u64>) -> Result<i32, StudioError> {
    let cfg = StudyConfig::load(config)?;
    let report = run_study_config(&cfg, seed)?;
    create_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    let table = report.to_table();
    std::fs::write(out.join("report.txt"), &table).map_err(|e| StudioError::io(out.join("report.txt"), e))?;
    print!("{table}");
    Ok(0)
}

fn serve(host: &str, port: u16, data: PathBuf, workers: Option<usize>, seed: u64) -> anyhow::Result<()> {
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let router = app(&ServiceConfig { data_dir: data.clone(), workers, default_seed: seed })?;
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        log::info!("serving {} on http://{}", data.display(), listener.local_addr()?);
        axum::serve(listener, router).await.context("serving")
    })
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let code = match cli.command {
        Command::Validate { urdf } => validate(&urdf),
        Command::FitCoupling { input, output, joint_template, extra_independent } => {
            fit(&input, &output, joint_template, extra_independent)
        }
        Command::Solve { urdf, coupling, task, schedule, seed, restarts, max_iterations, allow_partial, out } => {
            let mut options = SolveOptions { seed, ..SolveOptions::default() };
            if let Some(r) = restarts {
                options.restarts = r;
            }
            if let Some(m) = max_iterations {
                options.max_iterations = m;
            }
            solve(&urdf, &coupling, &task, schedule.as_deref(), options, allow_partial, &out)
        }
        Command::Study { config, out, seed } => study(&config, &out, seed),
        Command::GenerateExample { out } => write_example(&out).map(|_| 0),
        Command::Serve { port, host, data, workers, seed } => {
            serve(&host, port, data, workers, seed)?;
            return Ok(0);
        }
    };
    Ok(code?)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => match err.downcast_ref::<StudioError>() {
            Some(e) => {
                eprintln!("{}", serde_json::to_string(&e.diagnostic()).expect("diagnostic"));
                e.exit_code()
            }
            None => {
                let d = Diagnostic { kind: "Io".into(), message: format!("{err:#}"), paths: Vec::new() };
                eprintln!("{}", serde_json::to_string(&d).expect("diagnostic"));
                1
            }
        },
    };
    std::process::exit(code);
}
