//! The three step-size presets, their values at a few iterations, and the
//! tracking weights `zeta` implied by `beta`.
//!
//! cargo run --example schedules

use copt_wdc::schedules::{step_sizes, table1_presets, zeta_weights};

fn main() -> copt_wdc::Result<()> {
    for p in table1_presets() {
        println!(
            "{}: a={} b={} c={}  gap {}  violation {}",
            p.name, p.a, p.b, p.c, p.nominal_gap_rate, p.nominal_violation_rate
        );
        for t in [1, 10, 100, 1024, 100_000] {
            let s = step_sizes(t, &p)?;
            println!(
                "  t={t:<7} alpha={:.4e} beta={:.4e} delta={:.4e}",
                s.alpha, s.beta, s.delta
            );
        }
    }

    let p = &table1_presets()[2];
    let betas: Vec<f64> = (1..=20)
        .map(|t| step_sizes(t, p).map(|s| s.beta))
        .collect::<Result<_, _>>()?;
    let z = zeta_weights(19, &betas)?;
    println!("zeta at t=20 (last 5): {:?}", &z[15..]);
    println!("sum = {:.15}", z.iter().sum::<f64>());
    Ok(())
}
