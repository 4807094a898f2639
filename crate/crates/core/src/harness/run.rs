//! Data-center experiment runner: solver runs over seeds, per-run CSV
//! trajectories, a JSON summary and a combined comparison CSV.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::solvers::{run, Trajectory, Variant};
use crate::wdc::{
    build_problem, equiprobable_policy, evaluate, DecisionReport, DecisionVector, Scenario,
};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "COPT_WDC_THREADS";

/// Runs `f` inside a pool sized by `COPT_WDC_THREADS` (all cores when unset).
pub fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var(THREADS_ENV) {
        let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{text}'"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub seed: u64,
    pub completed_iterations: usize,
    /// Solver failure, if the run diverged.
    pub error: Option<String>,
    /// Evaluation of the averaged iterate; absent when the run failed or
    /// a queue is unstable at it.
    pub report: Option<DecisionReport>,
    pub evaluation_error: Option<String>,
    pub x_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub preset: String,
    pub scale: f64,
    pub iterations: usize,
    pub equiprobable: DecisionReport,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn run(&self, solver: Variant, seed: u64) -> Option<&RunSummary> {
        self.runs
            .iter()
            .find(|r| r.solver == solver.name() && r.seed == seed)
    }
}

/// One finished (or failed) run kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub variant: Variant,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub error: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    pub runs: Vec<RunOutput>,
}

pub fn run_file_name(variant: Variant, seed: u64) -> String {
    format!("{}-seed{}.csv", variant.name(), seed)
}

pub const COMPARISON_HEADER: &str =
    "solver,seed,t,objective,max_violation,step_norm,alpha,beta,delta";

/// Combined CSV keyed by `(solver, seed, t)`.
pub fn write_comparison<W: std::io::Write>(runs: &[RunOutput], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(COMPARISON_HEADER.split(','))?;
    let mut sorted: Vec<&RunOutput> = runs.iter().collect();
    sorted.sort_by_key(|r| (r.variant.name(), r.seed));
    for r in sorted {
        for rec in &r.trajectory.records {
            w.write_record(&[
                r.variant.name().to_string(),
                r.seed.to_string(),
                rec.t.to_string(),
                rec.objective.to_string(),
                rec.max_violation.to_string(),
                rec.step_norm.to_string(),
                rec.alpha.to_string(),
                rec.beta.to_string(),
                rec.delta.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn summarize(scenario: &Scenario, cfg: &ExperimentConfig, out: &RunOutput) -> RunSummary {
    let x_hat = out.trajectory.x_hat.clone();
    let (report, evaluation_error) = if out.error.is_some() {
        (None, None)
    } else {
        match DecisionVector::from_flat(&x_hat, scenario.servers)
            .and_then(|x| evaluate(&x, scenario, cfg.n_samples, cfg.eval_seed))
        {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    RunSummary {
        solver: out.variant.name().to_string(),
        seed: out.seed,
        completed_iterations: out.trajectory.records.len(),
        error: out.error.as_ref().map(|e| e.to_string()),
        report,
        evaluation_error,
        x_hat,
    }
}

/// Runs every (solver, seed) pair without touching the disk.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let scenario = cfg.scenario.load()?;
    let preset = cfg.schedule()?;
    let problem = build_problem(&scenario)?.with_start(cfg.start);
    let jobs: Vec<(Variant, u64)> = cfg
        .solver
        .variants()
        .into_iter()
        .flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let (runs, equiprobable) = with_worker_pool(|| {
        let runs: Vec<RunOutput> = jobs
            .par_iter()
            .map(|&(variant, seed)| {
                match run(
                    &problem,
                    problem.penalty(),
                    &preset,
                    cfg.iterations,
                    seed,
                    variant,
                ) {
                    Ok(trajectory) => RunOutput {
                        variant,
                        seed,
                        trajectory,
                        error: None,
                    },
                    Err(fail) => RunOutput {
                        variant,
                        seed,
                        trajectory: fail.partial,
                        error: Some(fail.error),
                    },
                }
            })
            .collect();
        let eq = evaluate(
            &equiprobable_policy(&scenario),
            &scenario,
            cfg.n_samples,
            cfg.eval_seed,
        );
        let summaries: Vec<RunSummary> = runs
            .par_iter()
            .map(|r| summarize(&scenario, cfg, r))
            .collect();
        (runs, eq.map(|e| (e, summaries)))
    })?;
    let (equiprobable, summaries) = equiprobable?;
    Ok(ExperimentResult {
        summary: ExperimentSummary {
            scenario: scenario.name.clone(),
            preset: preset.name.clone(),
            scale: preset.scale,
            iterations: cfg.iterations,
            equiprobable,
            runs: summaries,
        },
        runs,
    })
}

/// Runs the experiment and writes `runs/<solver>-seed<k>.csv`,
/// `comparison.csv`, `summary.json`, `scenario.json` and `config.json`
/// under `cfg.out`. Fails only if every run failed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = run_in_memory(cfg)?;
    write_outputs(cfg, &result)?;
    if result.runs.iter().all(|r| r.error.is_some()) {
        return Err(result.runs[0]
            .error
            .clone()
            .unwrap_or(Error::Config("no runs".into())));
    }
    Ok(result)
}

fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir.join("runs"))?;
    for r in &result.runs {
        r.trajectory
            .save_csv(&dir.join("runs").join(run_file_name(r.variant, r.seed)))?;
    }
    let file = std::fs::File::create(dir.join("comparison.csv"))?;
    write_comparison(&result.runs, std::io::BufWriter::new(file))?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)?,
    )?;
    std::fs::write(dir.join("scenario.json"), cfg.scenario.load()?.to_json()?)?;
    std::fs::write(dir.join("config.json"), cfg.to_json()?)?;
    Ok(())
}

/// Equiprobable policy evaluated on the configured scenario, written to
/// `baseline.json`.
pub fn baseline(cfg: &ExperimentConfig) -> Result<DecisionReport> {
    let scenario = cfg.scenario.load()?;
    let report = with_worker_pool(|| {
        evaluate(
            &equiprobable_policy(&scenario),
            &scenario,
            cfg.n_samples,
            cfg.eval_seed,
        )
    })??;
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(
        cfg.out.join("baseline.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// Medians of `windows` consecutive equal slices of `values`.
pub fn window_medians(values: &[f64], windows: usize) -> Vec<f64> {
    let size = values.len() / windows.max(1);
    if size == 0 {
        return Vec::new();
    }
    (0..windows)
        .map(|k| {
            let mut w: Vec<f64> = values[k * size..(k + 1) * size].to_vec();
            w.sort_by(|a, b| a.total_cmp(b));
            if size % 2 == 1 {
                w[size / 2]
            } else {
                0.5 * (w[size / 2 - 1] + w[size / 2])
            }
        })
        .collect()
}

pub fn load_summary(dir: &Path) -> Result<ExperimentSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(
        dir.join("summary.json"),
    )?)?)
}
