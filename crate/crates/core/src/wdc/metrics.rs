//! Monte-Carlo performance metrics of a decision: expected server rates,
//! P-K delays, utility and average throughput.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapter::build_problem;
use super::channel::sample_channel;
use super::queue::pk_delay;
use super::scenario::{DecisionVector, Scenario, Utility};
use crate::error::{Error, Result};
use crate::sco::CompositionalProblem;

/// Fixed so that results do not depend on the thread count.
const SHARDS: usize = 8;

/// Per-server expectations estimated from channel draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMoments {
    /// `E[sum_i pi_ij lambda_i / b_ij]`
    pub u: Vec<f64>,
    /// `E[sum_i pi_ij lambda_i / b_ij^2]`
    pub v: Vec<f64>,
    /// `E[sum_i b_ij]` in bits/s.
    pub rate_sum: Vec<f64>,
}

pub fn estimate_moments(
    scenario: &Scenario,
    x: &DecisionVector,
    samples: usize,
    seed: u64,
) -> Result<ServerMoments> {
    if samples == 0 {
        return Err(Error::Config("need at least one channel sample".into()));
    }
    let problem = build_problem(scenario)?;
    let flat = x.to_flat();
    let m = scenario.servers;
    let partials: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / SHARDS + usize::from(shard < samples % SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let mut h_acc = vec![0.0; 2 * m];
            let mut g_acc = vec![0.0; m];
            for _ in 0..count {
                let xi = sample_channel(scenario, &mut rng);
                for (a, v) in h_acc.iter_mut().zip(problem.inner_h(&flat, &xi)?) {
                    *a += v;
                }
                for (a, v) in g_acc.iter_mut().zip(problem.inner_g(&flat, &xi)?) {
                    *a += v;
                }
            }
            Ok((h_acc, g_acc))
        })
        .collect();
    let mut h = vec![0.0; 2 * m];
    let mut g = vec![0.0; m];
    for part in partials {
        let (hp, gp) = part?;
        h.iter_mut().zip(hp).for_each(|(a, b)| *a += b);
        g.iter_mut().zip(gp).for_each(|(a, b)| *a += b);
    }
    let n = samples as f64;
    Ok(ServerMoments {
        u: h[..m].iter().map(|a| a / n).collect(),
        v: h[m..].iter().map(|a| a / n).collect(),
        rate_sum: g.iter().map(|a| a / n * scenario.rate_unit).collect(),
    })
}

impl ServerMoments {
    /// P-K waiting time of every server; fails on the first unstable queue.
    pub fn delays(&self, chunk_bits: f64) -> Result<Vec<f64>> {
        self.u
            .iter()
            .zip(&self.v)
            .enumerate()
            .map(|(j, (&u, &v))| {
                pk_delay(u, v, chunk_bits).map_err(|e| match e {
                    Error::UnstableQueue { load, .. } => Error::UnstableQueue { server: j, load },
                    other => other,
                })
            })
            .collect()
    }

    /// `sum_j psi(E[sum_i b_ij] / rate_unit)`.
    pub fn utility(&self, scenario: &Scenario) -> f64 {
        self.rate_sum
            .iter()
            .map(|&r| {
                let y = r / scenario.rate_unit;
                match scenario.utility {
                    Utility::Linear => y,
                    Utility::Log1p => y.ln_1p(),
                }
            })
            .sum()
    }

    /// Average throughput `(1/M) sum_j 1 / (W_j + 1 / E[sum_i b_ij])`.
    pub fn throughput(&self, chunk_bits: f64) -> Result<f64> {
        let delays = self.delays(chunk_bits)?;
        Ok(throughput_from(&delays, &self.rate_sum))
    }
}

/// Throughput formula on given waits and expected aggregate rates.
pub fn throughput_from(waits: &[f64], rate_sums: &[f64]) -> f64 {
    let m = waits.len() as f64;
    waits
        .iter()
        .zip(rate_sums)
        .map(|(w, r)| 1.0 / (w + 1.0 / r))
        .sum::<f64>()
        / m
}

/// Estimates the expectations with `samples` channel draws and evaluates
/// the average throughput.
pub fn throughput(
    x: &DecisionVector,
    scenario: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    estimate_moments(scenario, x, samples, seed)?.throughput(scenario.chunk_bits)
}

/// Summary of a decision, as written to run summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub utility: f64,
    pub delays: Vec<f64>,
    /// `max_j (W_j - D_j)` in seconds.
    pub max_violation: f64,
    pub throughput: f64,
    pub loads: Vec<f64>,
}

pub fn evaluate(
    x: &DecisionVector,
    scenario: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<DecisionReport> {
    let mom = estimate_moments(scenario, x, samples, seed)?;
    let delays = mom.delays(scenario.chunk_bits)?;
    let max_violation = delays
        .iter()
        .zip(&scenario.delay_cap)
        .map(|(w, d)| w - d)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecisionReport {
        utility: mom.utility(scenario),
        throughput: throughput_from(&delays, &mom.rate_sum),
        max_violation,
        loads: mom.u.iter().map(|u| u * scenario.chunk_bits).collect(),
        delays,
    })
}

/// Scales all arrival rates so that the equiprobable policy at uniform power
/// has the given maximum server load.
pub fn calibrate_rates(
    scenario: &mut Scenario,
    target_load: f64,
    samples: usize,
    seed: u64,
) -> Result<()> {
    let eq = super::scenario::equiprobable_policy(scenario);
    let mom = estimate_moments(scenario, &eq, samples, seed)?;
    let max_load = mom
        .u
        .iter()
        .map(|u| u * scenario.chunk_bits)
        .fold(0.0, f64::max);
    if !(max_load > 0.0) {
        return Err(Error::Config("no server carries load".into()));
    }
    let factor = target_load / max_load;
    scenario.arrival_rates.iter_mut().for_each(|l| *l *= factor);
    Ok(())
}
