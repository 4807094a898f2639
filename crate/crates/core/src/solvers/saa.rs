//! Sample-average reference solver.
//!
//! Freezes a sample set, replaces every expectation by its sample mean, and
//! solves the deterministic surrogate `f(g_bar(x)) + rho l(q(h_bar(x)))` by
//! projected gradient with backtracking, raising `rho` until the surrogate
//! constraints hold to `tol`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sco::{penalty_grad, penalty_value, CompositionalProblem, PenaltySpec};

/// Expectations replaced by means over a frozen sample set.
pub struct SampleAverage<'a, P: CompositionalProblem> {
    problem: &'a P,
    samples: Vec<P::Sample>,
}

impl<'a, P: CompositionalProblem> SampleAverage<'a, P> {
    pub fn draw(problem: &'a P, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..count).map(|_| problem.sample(&mut rng)).collect();
        Self { problem, samples }
    }

    pub fn from_samples(problem: &'a P, samples: Vec<P::Sample>) -> Self {
        Self { problem, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn mean(&self, eval: impl Fn(&P::Sample) -> Result<Vec<f64>>, dim: usize) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; dim];
        for s in &self.samples {
            for (a, v) in acc.iter_mut().zip(eval(s)?) {
                *a += v;
            }
        }
        let n = self.samples.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    pub fn mean_g(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.problem.dims().g;
        self.mean(|s| self.problem.inner_g(x, s), d)
    }

    pub fn mean_h(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.problem.dims().h;
        self.mean(|s| self.problem.inner_h(x, s), d)
    }

    /// `f(mean g(x))`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.problem.outer_f(&self.mean_g(x)?)
    }

    /// `q(mean h(x))`.
    pub fn constraints(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.problem.outer_q(&self.mean_h(x)?)
    }

    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .constraints(x)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn penalized(&self, x: &[f64], rho: f64, spec: PenaltySpec) -> Result<f64> {
        Ok(self.objective(x)? + rho * penalty_value(&self.constraints(x)?, spec)?)
    }

    pub fn penalized_grad(&self, x: &[f64], rho: f64, spec: PenaltySpec) -> Result<Vec<f64>> {
        let dims = self.problem.dims();
        let fy = self.problem.outer_f_grad(&self.mean_g(x)?)?;
        let hbar = self.mean_h(x)?;
        let lg = penalty_grad(&self.problem.outer_q(&hbar)?, spec)?;
        let dz = self.problem.outer_q_tvp(&hbar, &lg)?;
        let penalize = lg.iter().any(|&v| v != 0.0);
        let mut grad = vec![0.0; dims.x];
        for s in &self.samples {
            for (a, v) in grad.iter_mut().zip(self.problem.jacobian_g_tvp(x, s, &fy)?) {
                *a += v;
            }
            if penalize {
                for (a, v) in grad.iter_mut().zip(self.problem.jacobian_h_tvp(x, s, &dz)?) {
                    *a += rho * v;
                }
            }
        }
        let n = self.samples.len() as f64;
        grad.iter_mut().for_each(|a| *a /= n);
        Ok(grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaaOptions {
    pub sample_count: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SaaOptions {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            tol: 1e-6,
            max_iters: 100_000,
            seed: 0x5aa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaaSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub max_violation: f64,
    pub rho: f64,
    pub iterations: usize,
}

const RHO_MAX: f64 = 1e12;

/// Solves the sample-average surrogate. Fails when the iteration budget runs
/// out or no penalty weight reaches feasibility.
pub fn saa_reference<P: CompositionalProblem>(
    problem: &P,
    penalty: PenaltySpec,
    opts: SaaOptions,
) -> Result<SaaSolution> {
    if opts.sample_count < 1000 {
        return Err(Error::Config(format!(
            "reference solver needs at least 1000 samples, got {}",
            opts.sample_count
        )));
    }
    let avg = SampleAverage::draw(problem, opts.sample_count, opts.seed);
    solve_surrogate(&avg, penalty, opts.tol, opts.max_iters)
}

/// Runs the penalty escalation on an existing sample average.
pub fn solve_surrogate<P: CompositionalProblem>(
    avg: &SampleAverage<'_, P>,
    penalty: PenaltySpec,
    tol: f64,
    max_iters: usize,
) -> Result<SaaSolution> {
    let problem = avg.problem;
    let mut x = problem.initial_point()?;
    let mut rho = 1.0;
    let mut iterations = 0;
    let mut step = 1.0;
    loop {
        // projected gradient on the current penalized surrogate
        loop {
            if iterations >= max_iters {
                return Err(Error::OracleFailure(format!(
                    "no convergence within {max_iters} iterations (rho = {rho:e})"
                )));
            }
            iterations += 1;
            let val = avg.penalized(&x, rho, penalty)?;
            let grad = avg.penalized_grad(&x, rho, penalty)?;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let cand = problem.prox(&trial, step)?;
                let diff: Vec<f64> = cand.iter().zip(&x).map(|(c, a)| c - a).collect();
                let lin: f64 = grad.iter().zip(&diff).map(|(g, d)| g * d).sum();
                let sq: f64 = diff.iter().map(|d| d * d).sum();
                let cand_val = avg.penalized(&cand, rho, penalty)?;
                if cand_val <= val + lin + sq / (2.0 * step) + 1e-14 * val.abs() {
                    accepted = Some((cand, sq.sqrt()));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, moved)) = accepted else {
                return Err(Error::OracleFailure("line search failed".into()));
            };
            let residual = moved / step;
            x = cand;
            step *= 2.0;
            if residual <= tol {
                break;
            }
        }
        let viol = avg.max_violation(&x)?;
        if viol <= tol {
            return Ok(SaaSolution {
                f_star: avg.objective(&x)?,
                max_violation: viol,
                x_star: x,
                rho,
                iterations,
            });
        }
        rho *= 10.0;
        if rho > RHO_MAX {
            return Err(Error::OracleFailure(format!(
                "constraints unsatisfiable: violation {viol:e} at rho {RHO_MAX:e}"
            )));
        }
    }
}
