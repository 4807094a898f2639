use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use copt_wdc::error::Result;
use copt_wdc::harness::{
    baseline, gen_scenario, parse_seeds, run_experiment, run_synthetic_study, validate,
    write_synthetic_study, ExperimentConfig, ScenarioKind, SolverChoice, SyntheticStudyConfig,
    ValidateOptions,
};

#[derive(Parser)]
#[command(
    name = "copt-wdc",
    version,
    about = "Constrained compositional SGD for wireless data-center scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Step-size preset (t1-row1, t1-row2, t1-row3)
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated seeds, e.g. 0,1,2
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// acscpg, cscgd or both
    #[arg(long)]
    solver: Option<String>,
}

impl Common {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.preset = p.clone();
        }
        if let Some(t) = self.iters {
            cfg.iterations = t;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = &self.solver {
            cfg.solver = s.parse::<SolverChoice>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated scenario as JSON
    GenScenario {
        /// ring10 or desk
        #[arg(long, default_value = "desk")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the solvers on the data-center problem
    Run(Common),
    /// Evaluate the equiprobable policy
    Baseline(Common),
    /// Convergence-rate study on the synthetic problem
    Synthetic {
        /// Study configuration (JSON)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to one preset
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated horizons
        #[arg(long)]
        iters: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Queueing, projection and gradient validation suites
    Validate(Common),
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::GenScenario { kind, seed, out } => {
            let s = gen_scenario(
                kind.parse::<ScenarioKind>()?,
                seed,
                &serde_json::Value::Null,
            )?;
            let json = s.to_json()?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            Ok(true)
        }
        Command::Run(c) => {
            let cfg = c.experiment()?;
            let res = run_experiment(&cfg)?;
            let eq = &res.summary.equiprobable;
            println!(
                "equiprobable utility={:.6} throughput={:.6}",
                eq.utility, eq.throughput
            );
            for r in &res.summary.runs {
                match (&r.report, &r.error, &r.evaluation_error) {
                    (Some(rep), _, _) => println!(
                        "{} seed={} utility={:.6} throughput={:.6} max_violation={:.3e}",
                        r.solver, r.seed, rep.utility, rep.throughput, rep.max_violation
                    ),
                    (None, Some(e), _) | (None, None, Some(e)) => {
                        println!("{} seed={} failed: {e}", r.solver, r.seed)
                    }
                    (None, None, None) => {}
                }
            }
            println!("wrote {}", cfg.out.display());
            Ok(true)
        }
        Command::Baseline(c) => {
            let cfg = c.experiment()?;
            let r = baseline(&cfg)?;
            println!(
                "utility={:.6} throughput={:.6} max_violation={:.3e}",
                r.utility, r.throughput, r.max_violation
            );
            Ok(true)
        }
        Command::Synthetic {
            config,
            preset,
            iters,
            seeds,
            out,
        } => {
            let mut cfg: SyntheticStudyConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SyntheticStudyConfig::default(),
            };
            if let Some(p) = preset {
                cfg.presets = vec![p];
            }
            if let Some(t) = iters {
                cfg.horizons = parse_seeds(&t)?.into_iter().map(|v| v as usize).collect();
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let study = run_synthetic_study(&cfg)?;
            write_synthetic_study(&study, &cfg.out)?;
            for c in &study.cells {
                println!(
                    "{} {} T={} median_gap={:.3e} median_violation={:.3e}",
                    c.preset, c.solver, c.iterations, c.median_gap, c.median_violation
                );
            }
            for s in &study.slopes {
                println!("{} {} slope={:.3}", s.preset, s.solver, s.slope);
            }
            Ok(true)
        }
        Command::Validate(c) => {
            let cfg = c.experiment()?;
            let scenario = cfg.scenario.load()?;
            let opts = ValidateOptions {
                seed: cfg.seeds[0],
                des_horizon: cfg.des_horizon,
                ..ValidateOptions::default()
            };
            let report = validate(&scenario, &opts)?;
            for s in &report.suites {
                println!(
                    "{} {} cases={} failures={} worst={:.3e} tol={:.1e}",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.cases,
                    s.failures,
                    s.worst,
                    s.tolerance
                );
                for n in &s.notes {
                    println!("  {n}");
                }
            }
            std::fs::create_dir_all(&cfg.out)?;
            std::fs::write(
                cfg.out.join("validation.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            Ok(report.passed)
        }
    }
}
