//! Experiment plumbing: scenario generation, solver runs with CSV/JSON
//! output, the synthetic rate study and the validation suites.

pub mod config;
pub mod run;
pub mod scenarios;
pub mod synthetic_study;
pub mod validate;

pub use config::{parse_seeds, ExperimentConfig, ScenarioSource, SolverChoice};
pub use run::{
    baseline, run_experiment, run_in_memory, window_medians, ExperimentResult, ExperimentSummary,
    RunSummary,
};
pub use scenarios::{gen_scenario, ScenarioKind};
pub use synthetic_study::{
    run_synthetic_study, write_synthetic_study, SyntheticStudy, SyntheticStudyConfig,
};
pub use validate::{validate, ValidateOptions, ValidationReport};
