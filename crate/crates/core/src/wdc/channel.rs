//! Rayleigh-faded, path-loss attenuated channels and Shannon capacity.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::scenario::Scenario;
use crate::error::{Error, Result};

/// Effective SNR per unit power `xi[i * M + j]` between the user currently
/// requesting file `i` and server `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub servers: usize,
    pub xi: Vec<f64>,
}

impl ChannelSample {
    #[inline]
    pub fn get(&self, file: usize, server: usize) -> f64 {
        self.xi[file * self.servers + server]
    }
}

/// Uniform point in the disk of radius `radius`.
pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Gain for a user at distance `dist` with power fading `fade`.
pub fn channel_gain(scenario: &Scenario, dist: f64, fade: f64) -> f64 {
    let pl = scenario.path_loss;
    let attenuation = pl.k0 * (dist / pl.d0).powf(-pl.exponent);
    (attenuation * fade / scenario.noise_power).max(scenario.fading_floor)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws the gain of one (file, server) pair for a fresh user.
pub fn sample_pair<R: Rng + ?Sized>(scenario: &Scenario, server: usize, rng: &mut R) -> f64 {
    let user = uniform_in_disk(scenario.geometry.user_radius, rng);
    let fade: f64 = Exp1.sample(rng);
    channel_gain(
        scenario,
        distance(user, scenario.geometry.servers[server]),
        fade,
    )
}

/// One user position per file, independent exponential fading per pair.
pub fn sample_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> ChannelSample {
    let m = scenario.servers;
    let mut xi = Vec::with_capacity(scenario.files.len() * m);
    for _ in 0..scenario.files.len() {
        let user = uniform_in_disk(scenario.geometry.user_radius, rng);
        for server in &scenario.geometry.servers {
            let fade: f64 = Exp1.sample(rng);
            xi.push(channel_gain(scenario, distance(user, *server), fade));
        }
    }
    ChannelSample { servers: m, xi }
}

/// `B log2(1 + p xi)` in bits/s.
pub fn capacity(power: f64, xi: f64, bandwidth: f64) -> Result<f64> {
    if power < 0.0 || xi < 0.0 || bandwidth < 0.0 {
        return Err(Error::NegativeInput {
            context: "capacity",
        });
    }
    Ok(bandwidth * (power * xi).ln_1p() / std::f64::consts::LN_2)
}

/// `d/dp B log2(1 + p xi)`.
pub fn capacity_dpower(power: f64, xi: f64, bandwidth: f64) -> f64 {
    bandwidth * xi / ((1.0 + power * xi) * std::f64::consts::LN_2)
}
