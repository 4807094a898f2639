//! The sample-average reference solver against the closed-form optimum of
//! the synthetic problem.
//!
//! cargo run --release --example saa_oracle

use copt_wdc::sco::PenaltySpec;
use copt_wdc::solvers::{saa_reference, SaaOptions};
use copt_wdc::synthetic::SyntheticProblem;

fn main() -> copt_wdc::Result<()> {
    let p = SyntheticProblem::default().with_excess(0.005);
    let exact = p.optimum();
    for n in [1_000, 10_000, 100_000] {
        let sol = saa_reference(
            &p,
            PenaltySpec::new(1.0)?,
            SaaOptions {
                sample_count: n,
                ..SaaOptions::default()
            },
        )?;
        let err = sol
            .x_star
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!(
            "n={n:<7} f*={:.6} (exact {:.6})  |x - x*| = {err:.2e}  rho = {:e}",
            sol.f_star,
            p.optimal_value(),
            sol.rho
        );
    }
    Ok(())
}
