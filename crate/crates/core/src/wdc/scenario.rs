use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::{FileSupport, PolicySupport, PowerBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Utility {
    Linear,
    Log1p,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Server coordinates.
    pub servers: Vec<[f64; 2]>,
    /// Users are uniform in the disk of this radius centred at the origin.
    pub user_radius: f64,
}

/// Attenuation `k0 (d / d0)^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub k0: f64,
    pub d0: f64,
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            k0: 1.0,
            d0: 1.0,
            exponent: 3.0,
        }
    }
}

/// A wireless erasure-coded data center.
///
/// Units: rates in bits/s, chunk length in bits, bandwidth in Hz, delays in
/// seconds, power in W. `rate_unit` and `delay_unit` only rescale the
/// optimization surrogate (utility in `rate_unit` bits/s, delay constraints
/// in `delay_unit` seconds); reported metrics stay in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub servers: usize,
    /// Placement and quota `(S_i, k_i)` of every file; `n_i = |S_i|`.
    pub files: Vec<FileSupport>,
    /// Request rate of each file (requests/s).
    pub arrival_rates: Vec<f64>,
    pub chunk_bits: f64,
    pub bandwidth: Vec<f64>,
    pub delay_cap: Vec<f64>,
    pub power: PowerBox,
    pub utility: Utility,
    pub zipf_skew: f64,
    pub geometry: Geometry,
    pub path_loss: PathLoss,
    /// Lower truncation of the effective channel gain.
    pub fading_floor: f64,
    /// Noise power the gains are normalized by.
    pub noise_power: f64,
    pub rate_unit: f64,
    pub delay_unit: f64,
    /// Floor on `1 - L u` inside the delay surrogate.
    pub stability_floor: f64,
    /// Penalty cap in constraint units.
    pub penalty_cap: f64,
}

impl Scenario {
    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    pub fn support(&self) -> PolicySupport {
        PolicySupport {
            servers: self.servers,
            files: self.files.clone(),
        }
    }

    /// Length of the flattened decision vector `[power | policy]`.
    pub fn decision_len(&self) -> usize {
        self.servers * (1 + self.files.len())
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.servers;
        let n = self.files.len();
        let bad = |msg: String| Err(Error::Config(format!("scenario '{}': {msg}", self.name)));
        if m == 0 || n == 0 {
            return bad("needs at least one server and one file".into());
        }
        self.support().validate()?;
        if self.arrival_rates.len() != n || self.arrival_rates.iter().any(|&l| !(l > 0.0)) {
            return bad("arrival rates must be positive, one per file".into());
        }
        if self.bandwidth.len() != m || self.bandwidth.iter().any(|&b| !(b > 0.0)) {
            return bad("bandwidths must be positive, one per server".into());
        }
        if self.delay_cap.len() != m || self.delay_cap.iter().any(|&d| !(d >= 0.0)) {
            return bad("delay caps must be nonnegative, one per server".into());
        }
        if self.geometry.servers.len() != m {
            return bad("geometry must place every server".into());
        }
        if !(self.chunk_bits > 0.0) {
            return bad("chunk length must be positive".into());
        }
        let positive = [
            self.geometry.user_radius,
            self.path_loss.k0,
            self.path_loss.d0,
            self.fading_floor,
            self.noise_power,
            self.rate_unit,
            self.delay_unit,
            self.stability_floor,
            self.penalty_cap,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("geometry, path-loss, floors and units must be positive".into());
        }
        self.power.validate(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

/// The optimization variable `(p, Pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    /// Transmit power per server (W).
    pub power: Vec<f64>,
    /// `policy[i][j]`: probability that a request for file `i` uses server `j`.
    pub policy: Vec<Vec<f64>>,
}

impl DecisionVector {
    /// Layout `[power (M) | policy row-major (N x M)]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.power.clone();
        for row in &self.policy {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn from_flat(flat: &[f64], servers: usize) -> Result<Self> {
        if servers == 0 || !flat.len().is_multiple_of(servers) || flat.len() < servers {
            return Err(Error::Dimension {
                context: "decision vector",
                expected: servers,
                got: flat.len(),
            });
        }
        Ok(Self {
            power: flat[..servers].to_vec(),
            policy: flat[servers..]
                .chunks(servers)
                .map(<[f64]>::to_vec)
                .collect(),
        })
    }

    /// Chunk request rate `Lambda_j = sum_i lambda_i pi_ij` at each server.
    pub fn server_rates(&self, arrival_rates: &[f64]) -> Vec<f64> {
        let m = self.power.len();
        let mut out = vec![0.0; m];
        for (row, &lambda) in self.policy.iter().zip(arrival_rates) {
            for (o, &pi) in out.iter_mut().zip(row) {
                *o += lambda * pi;
            }
        }
        out
    }

    /// Checks the scheduling and power constraints to `tol`.
    pub fn is_feasible(&self, scenario: &Scenario, tol: f64) -> bool {
        let pb = scenario.power;
        let power_ok = self.power.iter().sum::<f64>() <= pb.budget + tol
            && self
                .power
                .iter()
                .all(|&p| p >= pb.p_min - tol && p <= pb.p_max + tol);
        power_ok
            && self.policy.len() == scenario.files.len()
            && self.policy.iter().zip(&scenario.files).all(|(row, f)| {
                let total: f64 = row.iter().sum();
                (total - f.quota as f64).abs() <= tol
                    && row.iter().enumerate().all(|(j, &pi)| {
                        if f.servers.contains(&j) {
                            (-tol..=1.0 + tol).contains(&pi)
                        } else {
                            pi.abs() <= tol
                        }
                    })
            })
    }
}

/// `lambda_k = total k^-s / sum_m m^-s`.
pub fn zipf_rates(files: usize, skew: f64, total_rate: f64) -> Result<Vec<f64>> {
    if files == 0 || !(skew >= 0.0) || !(total_rate > 0.0) {
        return Err(Error::Config(format!(
            "zipf rates need N >= 1, s >= 0, total > 0 (got {files}, {skew}, {total_rate})"
        )));
    }
    let weights: Vec<f64> = (1..=files).map(|k| (k as f64).powf(-skew)).collect();
    let norm: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| total_rate * w / norm).collect())
}

/// Every supported server gets `k_i / n_i`; power is `P / M` clamped to the box.
pub fn equiprobable_policy(scenario: &Scenario) -> DecisionVector {
    let m = scenario.servers;
    let pb = scenario.power;
    let p = (pb.budget / m as f64).clamp(pb.p_min, pb.p_max);
    let policy = scenario
        .files
        .iter()
        .map(|f| {
            let share = f.quota as f64 / f.servers.len() as f64;
            let mut row = vec![0.0; m];
            for &j in &f.servers {
                row[j] = share;
            }
            row
        })
        .collect();
    DecisionVector {
        power: vec![p; m],
        policy,
    }
}
