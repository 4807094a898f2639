//! Scenario generation: the ten-server layout with 100 Zipf-popular files and
//! (8,4) codes, and a six-server desk-scale variant for quick runs.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::projections::{FileSupport, PowerBox};
use crate::wdc::metrics::calibrate_rates;
use crate::wdc::scenario::{zipf_rates, Geometry, PathLoss, Scenario, Utility};

/// Default maximum server load of the equiprobable policy at uniform power.
pub const DEFAULT_TARGET_LOAD: f64 = 0.7;
/// Channel draws used when calibrating arrival rates.
const CALIBRATION_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Ring10,
    Desk,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring10" => Ok(ScenarioKind::Ring10),
            "desk" => Ok(ScenarioKind::Desk),
            other => Err(Error::Config(format!("unknown scenario kind '{other}'"))),
        }
    }
}

fn ring(count: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / count as f64;
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect()
}

fn random_placement(
    files: usize,
    servers: usize,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<FileSupport> {
    (0..files)
        .map(|_| {
            let mut chosen = sample(rng, servers, n).into_vec();
            chosen.sort_unstable();
            FileSupport {
                servers: chosen,
                quota: k,
            }
        })
        .collect()
}

struct Layout {
    name: &'static str,
    ring_servers: usize,
    files: usize,
    code: (usize, usize),
    budget: f64,
}

fn base(layout: &Layout, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut servers = ring(layout.ring_servers, 0.5);
    servers.push([-2.0, 0.0]);
    servers.push([2.0, 0.0]);
    let m = servers.len();
    let (n, k) = layout.code;
    Scenario {
        name: layout.name.to_string(),
        servers: m,
        files: random_placement(layout.files, m, n, k, &mut rng),
        arrival_rates: zipf_rates(layout.files, 2.0, 1.0).expect("valid zipf parameters"),
        chunk_bits: 1e4,
        bandwidth: vec![1e6; m],
        delay_cap: vec![5e-3; m],
        power: PowerBox {
            budget: layout.budget,
            p_min: 0.1 * layout.budget / m as f64,
            p_max: layout.budget,
        },
        utility: Utility::Linear,
        zipf_skew: 2.0,
        geometry: Geometry {
            servers,
            user_radius: 1.0,
        },
        path_loss: PathLoss::default(),
        fading_floor: 0.1,
        noise_power: 1.0,
        // aggregate rate per unit of total file bandwidth
        rate_unit: layout.files as f64 * 1e6,
        delay_unit: 1e-3,
        stability_floor: 0.1,
        penalty_cap: 10.0,
    }
}

/// Layout of the ten-server simulation: eight servers on a radius-0.5 ring
/// at 45 degree spacing plus two at `(-2, 0)` and `(2, 0)`.
pub fn ring10_scenario(seed: u64) -> Result<Scenario> {
    let mut s = base(
        &Layout {
            name: "ring10",
            ring_servers: 8,
            files: 100,
            code: (8, 4),
            budget: 10.0,
        },
        seed,
    );
    calibrate_rates(&mut s, DEFAULT_TARGET_LOAD, CALIBRATION_SAMPLES, seed)?;
    s.validate()?;
    Ok(s)
}

/// Six servers (four on the ring, two far away), 20 files, (4,2) codes.
pub fn desk_scenario(seed: u64) -> Result<Scenario> {
    let mut s = base(
        &Layout {
            name: "desk",
            ring_servers: 4,
            files: 20,
            code: (4, 2),
            budget: 6.0,
        },
        seed,
    );
    calibrate_rates(&mut s, DEFAULT_TARGET_LOAD, CALIBRATION_SAMPLES, seed)?;
    s.validate()?;
    Ok(s)
}

fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, p) => *t = p.clone(),
    }
}

/// Generates a scenario and applies JSON overrides on top of it.
///
/// `overrides` may set any scenario field, plus `target_load` to recalibrate
/// arrival rates (ignored when `arrival_rates` is overridden explicitly).
pub fn gen_scenario(kind: ScenarioKind, seed: u64, overrides: &Value) -> Result<Scenario> {
    let mut scenario = match kind {
        ScenarioKind::Ring10 => ring10_scenario(seed)?,
        ScenarioKind::Desk => desk_scenario(seed)?,
    };
    let Some(map) = overrides.as_object() else {
        if overrides.is_null() {
            return Ok(scenario);
        }
        return Err(Error::Config(
            "scenario overrides must be a JSON object".into(),
        ));
    };
    let mut patch = overrides.clone();
    let target = patch
        .as_object_mut()
        .and_then(|m| m.remove("target_load"))
        .map(|v| {
            v.as_f64()
                .filter(|t| *t > 0.0 && *t < 1.0)
                .ok_or_else(|| Error::Config("target_load must be in (0, 1)".into()))
        })
        .transpose()?;
    let mut value = serde_json::to_value(&scenario)?;
    merge(&mut value, &patch);
    scenario = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid scenario override: {e}")))?;
    if !map.contains_key("arrival_rates") {
        let rates = zipf_rates(scenario.files.len(), scenario.zipf_skew, 1.0)?;
        scenario.arrival_rates = rates;
        calibrate_rates(
            &mut scenario,
            target.unwrap_or(DEFAULT_TARGET_LOAD),
            CALIBRATION_SAMPLES,
            seed,
        )?;
    }
    scenario.validate()?;
    Ok(scenario)
}
