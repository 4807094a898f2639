//! Pollaczek-Khinchine waiting time and a discrete-event M/G/1 oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::channel::{capacity, sample_pair};
use super::scenario::{DecisionVector, Scenario};
use crate::error::{Error, Result};

/// Mean M/G/1 waiting time `L^2 v / (2 (1 - L u))` with `L u = Lambda E[X]`
/// and `L^2 v = Lambda E[X^2]`.
pub fn pk_delay(u: f64, v: f64, chunk_bits: f64) -> Result<f64> {
    let load = chunk_bits * u;
    if !(load < 1.0) {
        return Err(Error::UnstableQueue { server: 0, load });
    }
    Ok(chunk_bits * chunk_bits * v / (2.0 * (1.0 - load)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueEstimate {
    pub mean_wait: f64,
    /// Half-width of the batch-means 95% confidence interval.
    pub ci95: f64,
    pub customers: usize,
}

const BATCHES: usize = 20;
/// Student t quantile t_{0.975, 19}.
const T_QUANTILE: f64 = 2.093;

/// FIFO single server with Poisson arrivals. Waiting times follow the
/// Lindley recursion `W_{n+1} = max(0, W_n + S_n - A_{n+1})`; the first 10%
/// of customers are discarded as warm-up.
pub fn simulate_fifo<R: Rng + ?Sized>(
    arrival_rate: f64,
    customers: usize,
    rng: &mut R,
    mut service: impl FnMut(&mut R) -> f64,
) -> Result<QueueEstimate> {
    if !(arrival_rate > 0.0) || customers < 10 * BATCHES {
        return Err(Error::Config(format!(
            "queue simulation needs a positive rate and at least {} customers",
            10 * BATCHES
        )));
    }
    let gaps = Exp::new(arrival_rate).map_err(|e| Error::Config(e.to_string()))?;
    let warmup = customers / 10;
    let kept = customers - warmup;
    let per_batch = kept / BATCHES;
    let mut batch_sums = [0.0; BATCHES];
    let mut wait = 0.0;
    for n in 0..customers {
        if n >= warmup {
            let b = ((n - warmup) / per_batch).min(BATCHES - 1);
            batch_sums[b] += wait;
        }
        let s = service(rng);
        let a: f64 = gaps.sample(rng);
        wait = (wait + s - a).max(0.0);
    }
    let counts: Vec<f64> = (0..BATCHES)
        .map(|b| {
            if b + 1 == BATCHES {
                (kept - per_batch * (BATCHES - 1)) as f64
            } else {
                per_batch as f64
            }
        })
        .collect();
    let means: Vec<f64> = batch_sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
    let mean_wait = batch_sums.iter().sum::<f64>() / kept as f64;
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(QueueEstimate {
        mean_wait,
        ci95: T_QUANTILE * (var / BATCHES as f64).sqrt(),
        customers,
    })
}

/// Monte-Carlo load `Lambda_j E[X_j]` of one server.
pub fn estimate_load(
    scenario: &Scenario,
    server: usize,
    x: &DecisionVector,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let mix = ServiceMix::new(scenario, server, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        total += mix.draw(scenario, &mut rng)?;
    }
    Ok(mix.rate * total / draws as f64)
}

/// Monte-Carlo `(u_j, v_j) = (sum_i pi_ij lambda_i E[1/b_ij], sum_i pi_ij lambda_i E[1/b_ij^2])`
/// for a single server, drawing only the pairs it serves.
pub fn server_moments(
    scenario: &Scenario,
    server: usize,
    x: &DecisionVector,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mix = ServiceMix::new(scenario, server, x)?;
    if draws == 0 {
        return Err(Error::Config("need at least one channel draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut u, mut v) = (0.0, 0.0);
    for _ in 0..draws {
        for (i, row) in x.policy.iter().enumerate() {
            let w = row[server] * scenario.arrival_rates[i];
            if w == 0.0 {
                continue;
            }
            let xi = sample_pair(scenario, server, &mut rng);
            let b = capacity(mix.power, xi, scenario.bandwidth[server])?;
            if !(b > 0.0) {
                return Err(Error::SingularRate { file: i, server });
            }
            u += w / b;
            v += w / (b * b);
        }
    }
    Ok((u / draws as f64, v / draws as f64))
}

/// Chunk-request mixture seen by one server.
struct ServiceMix {
    server: usize,
    power: f64,
    rate: f64,
    /// cumulative selection probabilities over (file index, prob)
    cdf: Vec<(usize, f64)>,
}

impl ServiceMix {
    fn new(scenario: &Scenario, server: usize, x: &DecisionVector) -> Result<Self> {
        if server >= scenario.servers {
            return Err(Error::Config(format!("server {server} out of range")));
        }
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for (i, row) in x.policy.iter().enumerate() {
            let w = scenario.arrival_rates[i] * row[server];
            if w > 0.0 {
                acc += w;
                cdf.push((i, acc));
            }
        }
        Ok(Self {
            server,
            power: x.power[server],
            rate: acc,
            cdf,
        })
    }

    /// Service time `L / b_j` of a fresh request.
    fn draw<R: Rng + ?Sized>(&self, scenario: &Scenario, rng: &mut R) -> Result<f64> {
        let r = rng.random::<f64>() * self.rate;
        let file = self
            .cdf
            .iter()
            .find(|(_, c)| r < *c)
            .or(self.cdf.last())
            .map(|(i, _)| *i)
            .ok_or_else(|| Error::Config("server receives no requests".into()))?;
        let xi = sample_pair(scenario, self.server, rng);
        let b = capacity(self.power, xi, scenario.bandwidth[self.server])?;
        if !(b > 0.0) {
            return Err(Error::SingularRate {
                file,
                server: self.server,
            });
        }
        Ok(scenario.chunk_bits / b)
    }
}

/// Simulates server `server` under decision `x` for `horizon` arrivals.
/// Refuses loads at or above 0.95 (checked with 10^4 Monte-Carlo draws).
pub fn simulate_mg1(
    scenario: &Scenario,
    server: usize,
    x: &DecisionVector,
    horizon: usize,
    seed: u64,
) -> Result<QueueEstimate> {
    let mix = ServiceMix::new(scenario, server, x)?;
    if mix.cdf.is_empty() {
        return Ok(QueueEstimate {
            mean_wait: 0.0,
            ci95: 0.0,
            customers: 0,
        });
    }
    let load = estimate_load(scenario, server, x, 10_000, seed ^ 0x10ad)?;
    if load >= 0.95 {
        return Err(Error::UnstableQueue { server, load });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    let est = simulate_fifo(mix.rate, horizon, &mut rng, |rng| {
        match mix.draw(scenario, rng) {
            Ok(s) => s,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(est),
    }
}
