//! Discrete-event M/G/1 waits against the Pollaczek-Khinchine formula, for
//! M/D/1 and for the data-center service mixture at three loads.
//!
//! cargo run --release --example pk_validation

use copt_wdc::harness::scenarios::desk_scenario;
use copt_wdc::harness::validate::{pk_md1, pk_mixture};

fn main() -> copt_wdc::Result<()> {
    let c = pk_md1(100_000, 1)?;
    println!(
        "{:<28} load {:.2}  P-K {:.4}  DES {:.4} +/- {:.4}",
        c.label, c.load, c.predicted, c.simulated, c.ci95
    );
    let s = desk_scenario(0)?;
    for load in [0.3, 0.6, 0.8] {
        let c = pk_mixture(&s, s.servers - 1, load, 100_000, 1_000_000, 7)?;
        println!(
            "{:<28} load {:.2}  P-K {:.4e}  DES {:.4e} +/- {:.1e}  rel {:.3}",
            c.label, c.load, c.predicted, c.simulated, c.ci95, c.relative_error
        );
    }
    Ok(())
}
