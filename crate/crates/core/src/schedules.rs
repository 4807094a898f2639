//! Power-law step sizes `alpha_t = C t^-a`, `beta_t = min(1, C_b t^-b)`,
//! `delta_t = C t^-c` and the three published exponent presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePreset {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Analysis-only exponent; never used by the iteration.
    pub d: f64,
    /// Analysis-only exponent; never used by the iteration.
    pub e: f64,
    #[serde(rename = "C")]
    pub scale: f64,
    #[serde(rename = "C_b")]
    pub tracking_scale: f64,
    pub nominal_gap_rate: String,
    pub nominal_violation_rate: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl SchedulePreset {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.a) && unit(self.b) && unit(self.c)) {
            return Err(Error::Config(format!(
                "preset {}: exponents a, b, c must lie in [0, 1]",
                self.name
            )));
        }
        if self.a < self.c {
            return Err(Error::Config(format!(
                "preset {}: requires a >= c (a = {}, c = {})",
                self.name, self.a, self.c
            )));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "preset {}: C must be nonnegative",
                self.name
            )));
        }
        if !(self.tracking_scale > 2.0 && self.tracking_scale.is_finite()) {
            return Err(Error::Config(format!(
                "preset {}: C_b must exceed 2",
                self.name
            )));
        }
        Ok(())
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_tracking_scale(mut self, tracking_scale: f64) -> Self {
        self.tracking_scale = tracking_scale;
        self
    }

    /// Looks up `t1-row1`, `t1-row2` or `t1-row3`.
    pub fn by_name(name: &str) -> Result<Self> {
        table1_presets()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("unknown schedule preset '{name}'")))
    }
}

/// Step sizes at the 1-indexed iteration `t`.
pub fn step_sizes(t: usize, preset: &SchedulePreset) -> Result<StepSizes> {
    if t == 0 {
        return Err(Error::ZeroIteration);
    }
    let t = t as f64;
    Ok(StepSizes {
        alpha: preset.scale * t.powf(-preset.a),
        beta: (preset.tracking_scale * t.powf(-preset.b)).min(1.0),
        delta: preset.scale * t.powf(-preset.c),
    })
}

fn row(name: &str, a: f64, d: f64, e: f64, gap: &str, viol: &str) -> SchedulePreset {
    SchedulePreset {
        name: name.to_string(),
        a,
        b: 0.5714,
        c: 0.7143,
        d,
        e,
        scale: 1.0,
        tracking_scale: 3.0,
        nominal_gap_rate: gap.to_string(),
        nominal_violation_rate: viol.to_string(),
    }
}

/// The three exponent rows with their nominal gap / violation rates.
/// `C = 1` and `C_b = 3` unless overridden.
pub fn table1_presets() -> Vec<SchedulePreset> {
    vec![
        row("t1-row1", 0.9048, -0.0952, 1.2607, "T^-2/21", "T^-2/21"),
        row("t1-row2", 0.8751, -0.1429, 1.1652, "T^-1/7", "T^-1/14"),
        row("t1-row3", 0.7143, -0.2857, 0.8518, "T^-2/7", "1"),
    ]
}

/// `zeta_k^(t) = beta_k prod_{i=k+1}^t (1 - beta_i)` for `k = 0..=t`.
pub fn zeta_weights(t: usize, betas: &[f64]) -> Result<Vec<f64>> {
    if betas.is_empty() {
        return Err(Error::Config("zeta weights need at least one beta".into()));
    }
    if betas.len() <= t {
        return Err(Error::Dimension {
            context: "zeta weights",
            expected: t + 1,
            got: betas.len(),
        });
    }
    if let Some(bad) = betas[..=t].iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
        return Err(Error::Config(format!("beta {bad} outside (0, 1]")));
    }
    let mut weights = vec![0.0; t + 1];
    let mut tail = 1.0;
    for k in (0..=t).rev() {
        weights[k] = betas[k] * tail;
        tail *= 1.0 - betas[k];
    }
    Ok(weights)
}
