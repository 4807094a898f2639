//! Solvers over any [`CompositionalProblem`](crate::sco::CompositionalProblem).

mod acscpg;
mod saa;
mod trajectory;

pub use acscpg::{
    acscpg_step, run, run_acscpg, run_cscgd, step_with_sizes, RunFailure, SolverState, StepInfo,
    Variant,
};
pub use saa::{saa_reference, solve_surrogate, SaaOptions, SaaSolution, SampleAverage};
pub use trajectory::{RunMetadata, StepRecord, Trajectory, CSV_HEADER};
