//! Euclidean projections onto the capped simplex and the power box,
//! checked against the exhaustive active-set QP.
//!
//! cargo run --example projections

use copt_wdc::oracles::{qp_capped_simplex, qp_power};
use copt_wdc::projections::{project_capped_simplex, project_power, PowerBox};

fn main() -> copt_wdc::Result<()> {
    // a (4, 2) file on servers 0, 1, 3 and 5 of six
    let support = [true, true, false, true, false, true];
    let v = [0.9, 0.8, 0.3, -0.2, 0.5, 0.7];
    let pi = project_capped_simplex(&v, 2.0, &support)?;
    let oracle = qp_capped_simplex(&v, 2.0, &support);
    println!("policy    {pi:.6?}");
    println!("QP oracle {oracle:.6?}");
    println!("sum = {}", pi.iter().sum::<f64>());

    let bounds = PowerBox {
        budget: 6.0,
        p_min: 0.1,
        p_max: 2.0,
    };
    let p = project_power(&[3.0, 2.5, 0.0, 1.0, -1.0, 0.4], bounds)?;
    println!("power     {p:.6?}");
    println!(
        "QP oracle {:.6?}",
        qp_power(&[3.0, 2.5, 0.0, 1.0, -1.0, 0.4], bounds)
    );
    println!("sum = {}", p.iter().sum::<f64>());
    Ok(())
}
