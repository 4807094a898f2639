//! A small compositional problem with a closed-form optimum:
//!
//! ```text
//! minimize   1/2 || E[x + xi] - target ||^2
//! subject to E[x_1 + xi'_1] - cap <= 0,   lo <= x <= hi
//! ```
//!
//! with Gaussian `xi ~ N(mu_g, sd^2 I)` and `xi' ~ N(mu_h, sd^2 I)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::sco::{CompositionalProblem, Dims};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblem {
    pub target: Vec<f64>,
    pub cap: f64,
    pub mean_g: Vec<f64>,
    pub mean_h: Vec<f64>,
    pub noise_sd: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl Default for SyntheticProblem {
    /// Three coordinates; the unconstrained minimizer violates the
    /// constraint by `0.005`, so the constraint is active at the optimum.
    fn default() -> Self {
        let cap = 0.5;
        let mean_g = vec![0.1, -0.2, 0.0];
        let mean_h = vec![0.05, 0.0, 0.0];
        let target = vec![cap - mean_h[0] + mean_g[0] + 0.005, 0.3, -0.4];
        Self {
            target,
            cap,
            mean_g,
            mean_h,
            noise_sd: 0.5,
            lower: -2.0,
            upper: 2.0,
        }
    }
}

impl SyntheticProblem {
    /// Same problem with the unconstrained minimizer pushed `excess` past
    /// the constraint boundary.
    pub fn with_excess(mut self, excess: f64) -> Self {
        self.target[0] = self.cap - self.mean_h[0] + self.mean_g[0] + excess;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.target.len();
        ensure_len(&self.mean_g, n, "synthetic mean_g")?;
        ensure_len(&self.mean_h, n, "synthetic mean_h")?;
        if n == 0 || !(self.noise_sd >= 0.0) || !(self.lower < self.upper) {
            return Err(Error::Config("invalid synthetic problem".into()));
        }
        Ok(())
    }

    /// `E[g(x, xi)] = x + mu_g`.
    pub fn expected_g(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean_g).map(|(a, m)| a + m).collect()
    }

    /// `F(x) = 1/2 || x + mu_g - target ||^2`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.expected_g(x)
            .iter()
            .zip(&self.target)
            .map(|(a, b)| 0.5 * (a - b).powi(2))
            .sum()
    }

    /// `Q(x) = x_1 + mu_h1 - cap`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        x[0] + self.mean_h[0] - self.cap
    }

    /// Closed-form constrained minimizer: coordinatewise clamp of the
    /// unconstrained minimizer, with the first coordinate also capped.
    pub fn optimum(&self) -> Vec<f64> {
        (0..self.target.len())
            .map(|k| {
                let mut v = self.target[k] - self.mean_g[k];
                if k == 0 {
                    v = v.min(self.cap - self.mean_h[0]);
                }
                v.clamp(self.lower, self.upper)
            })
            .collect()
    }

    pub fn optimal_value(&self) -> f64 {
        self.objective(&self.optimum())
    }
}

impl CompositionalProblem for SyntheticProblem {
    type Sample = SyntheticSample;

    fn dims(&self) -> Dims {
        let n = self.target.len();
        Dims {
            x: n,
            g: n,
            h: n,
            constraints: 1,
        }
    }

    fn inner_g(&self, x: &[f64], xi: &SyntheticSample) -> Result<Vec<f64>> {
        Ok(x.iter().zip(&xi.g).map(|(a, b)| a + b).collect())
    }

    fn inner_h(&self, x: &[f64], xi: &SyntheticSample) -> Result<Vec<f64>> {
        Ok(x.iter().zip(&xi.h).map(|(a, b)| a + b).collect())
    }

    fn jacobian_g_tvp(&self, _x: &[f64], _xi: &SyntheticSample, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }

    fn jacobian_h_tvp(&self, _x: &[f64], _xi: &SyntheticSample, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }

    fn outer_f(&self, y: &[f64]) -> Result<f64> {
        Ok(y.iter()
            .zip(&self.target)
            .map(|(a, b)| 0.5 * (a - b).powi(2))
            .sum())
    }

    fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.iter().zip(&self.target).map(|(a, b)| a - b).collect())
    }

    fn outer_q(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![z[0] - self.cap])
    }

    fn outer_q_tvp(&self, z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; z.len()];
        out[0] = v[0];
        Ok(out)
    }

    fn prox(&self, v: &[f64], _step: f64) -> Result<Vec<f64>> {
        Ok(v.iter().map(|a| a.clamp(self.lower, self.upper)).collect())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SyntheticSample {
        let draw = |means: &[f64], rng: &mut R| -> Vec<f64> {
            means
                .iter()
                .map(|&m| {
                    if self.noise_sd == 0.0 {
                        m
                    } else {
                        Normal::new(m, self.noise_sd)
                            .expect("validated standard deviation")
                            .sample(rng)
                    }
                })
                .collect()
        };
        let g = draw(&self.mean_g, rng);
        let h = draw(&self.mean_h, rng);
        SyntheticSample { g, h }
    }
}
