//! Joint power and scheduling optimization on the desk scenario, compared
//! with the equiprobable policy at uniform power.
//!
//! cargo run --release --example data_center

use copt_wdc::harness::{run_in_memory, ExperimentConfig, SolverChoice};
use copt_wdc::solvers::Variant;
use copt_wdc::wdc::DecisionVector;

fn main() -> copt_wdc::Result<()> {
    let cfg = ExperimentConfig {
        iterations: 20_000,
        seeds: vec![0, 1, 2],
        solver: SolverChoice::Acscpg,
        ..ExperimentConfig::default()
    };
    let scenario = cfg.scenario.load()?;
    let res = run_in_memory(&cfg)?;
    let eq = &res.summary.equiprobable;
    println!(
        "equiprobable  utility {:.4}  throughput {:.1}  max W-D {:+.2e} s",
        eq.utility, eq.throughput, eq.max_violation
    );
    for seed in &cfg.seeds {
        let run = res.summary.run(Variant::Acscpg, *seed).expect("run");
        match &run.report {
            Some(r) => println!(
                "seed {seed}        utility {:.4}  throughput {:.1}  max W-D {:+.2e} s",
                r.utility, r.throughput, r.max_violation
            ),
            None => println!(
                "seed {seed} failed: {:?} {:?}",
                run.error, run.evaluation_error
            ),
        }
    }
    let x = DecisionVector::from_flat(&res.summary.runs[0].x_hat, scenario.servers)?;
    println!("power (seed 0): {:.3?}", x.power);
    Ok(())
}
