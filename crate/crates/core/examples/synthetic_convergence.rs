//! Gap and violation of ACSCPG and CSCGD on the synthetic problem as the
//! horizon grows.
//!
//! cargo run --release --example synthetic_convergence

use copt_wdc::harness::{run_synthetic_study, SyntheticStudyConfig};

fn main() -> copt_wdc::Result<()> {
    let cfg = SyntheticStudyConfig {
        presets: vec!["t1-row3".into()],
        horizons: vec![1_000, 10_000, 100_000],
        seeds: (0..5).collect(),
        ..SyntheticStudyConfig::default()
    };
    let study = run_synthetic_study(&cfg)?;
    println!("F* = {:.6}", study.optimal_value);
    println!(
        "{:<8} {:>8} {:>12} {:>12}",
        "solver", "T", "gap", "violation"
    );
    for c in &study.cells {
        println!(
            "{:<8} {:>8} {:>12.3e} {:>12.3e}",
            c.solver, c.iterations, c.median_gap, c.median_violation
        );
    }
    for s in &study.slopes {
        println!("{} log-log gap slope {:.3}", s.solver, s.slope);
    }
    Ok(())
}
