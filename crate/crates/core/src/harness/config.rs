//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::scenarios::{gen_scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::schedules::SchedulePreset;
use crate::solvers::Variant;
use crate::wdc::{Scenario, StartPoint};

/// Where the scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Generate {
        kind: String,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        overrides: Value,
    },
    /// Path to a scenario JSON file, relative to the working directory.
    Path(PathBuf),
    Inline(Box<Scenario>),
}

impl ScenarioSource {
    pub fn desk() -> Self {
        ScenarioSource::Generate {
            kind: "desk".into(),
            seed: 0,
            overrides: Value::Null,
        }
    }

    pub fn load(&self) -> Result<Scenario> {
        match self {
            ScenarioSource::Generate {
                kind,
                seed,
                overrides,
            } => gen_scenario(kind.parse::<ScenarioKind>()?, *seed, overrides),
            ScenarioSource::Path(path) => {
                let s = Scenario::from_json(&std::fs::read_to_string(path)?)?;
                s.validate()?;
                Ok(s)
            }
            ScenarioSource::Inline(s) => {
                s.validate()?;
                Ok((**s).clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Acscpg,
    Cscgd,
    Both,
}

impl SolverChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            SolverChoice::Acscpg => vec![Variant::Acscpg],
            SolverChoice::Cscgd => vec![Variant::Cscgd],
            SolverChoice::Both => vec![Variant::Acscpg, Variant::Cscgd],
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acscpg" => Ok(SolverChoice::Acscpg),
            "cscgd" => Ok(SolverChoice::Cscgd),
            "both" => Ok(SolverChoice::Both),
            other => Err(Error::Config(format!("unknown solver choice '{other}'"))),
        }
    }
}

/// Step-size scale used for the data-center runs unless overridden.
pub const DEFAULT_DC_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    pub preset: String,
    /// `C` of the step sizes.
    pub scale: f64,
    /// `C_b` of the tracking weight; the preset's value when absent.
    pub tracking_scale: Option<f64>,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub solver: SolverChoice,
    pub start: StartPoint,
    /// Channel draws for the final Monte-Carlo evaluation.
    pub n_samples: usize,
    /// Seed of the evaluation draws, shared by all runs.
    pub eval_seed: u64,
    /// Arrivals per discrete-event run (validate).
    pub des_horizon: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSource::desk(),
            preset: "t1-row3".into(),
            scale: DEFAULT_DC_SCALE,
            tracking_scale: None,
            iterations: 20_000,
            seeds: (0..10).collect(),
            out: PathBuf::from("out"),
            solver: SolverChoice::Both,
            start: StartPoint::Uniform,
            n_samples: 20_000,
            eval_seed: 99,
            des_horizon: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 4 || !self.iterations.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "iterations must be even and at least 4, got {}",
                self.iterations
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        self.schedule()?;
        Ok(())
    }

    /// The named preset with this config's scales applied.
    pub fn schedule(&self) -> Result<SchedulePreset> {
        let mut p = SchedulePreset::by_name(&self.preset)?.with_scale(self.scale);
        if let Some(cb) = self.tracking_scale {
            p = p.with_tracking_scale(cb);
        }
        p.validate()?;
        Ok(p)
    }
}

/// Parses `"a,b,c"` into seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("invalid seed '{s}'")))
        })
        .collect()
}
