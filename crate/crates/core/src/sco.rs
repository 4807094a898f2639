//! Constrained stochastic compositional problems.
//!
//! A problem is `min_x f(E[g(x, xi)]) + R(x)` subject to `q(E[h(x, xi)]) <= 0`,
//! where the regularizer `R` is only ever touched through its proximal map.
//! Stochastic constraints are folded into the objective through the smoothed
//! penalty `l(w) = sum_j l_j(w_j)` implemented here.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Problem dimensions: decision `n`, inner objective output `m`, inner
/// constraint output `d`, number of constraints `J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub g: usize,
    pub h: usize,
    pub constraints: usize,
}

/// The evaluators of a constrained compositional problem.
///
/// Derivatives are exposed as Jacobian-transpose-vector products: the solver
/// never needs a full Jacobian. Every evaluator must be pure; the only state
/// lives in the caller-owned RNG handed to [`CompositionalProblem::sample`].
pub trait CompositionalProblem {
    type Sample: Clone;

    fn dims(&self) -> Dims;

    fn inner_g(&self, x: &[f64], xi: &Self::Sample) -> Result<Vec<f64>>;

    fn inner_h(&self, x: &[f64], xi: &Self::Sample) -> Result<Vec<f64>>;

    /// `grad_x g(x, xi) . v` for `v` in the inner objective space.
    fn jacobian_g_tvp(&self, x: &[f64], xi: &Self::Sample, v: &[f64]) -> Result<Vec<f64>>;

    /// `grad_x h(x, xi) . v` for `v` in the inner constraint space.
    fn jacobian_h_tvp(&self, x: &[f64], xi: &Self::Sample, v: &[f64]) -> Result<Vec<f64>>;

    fn outer_f(&self, y: &[f64]) -> Result<f64>;

    fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>>;

    fn outer_q(&self, z: &[f64]) -> Result<Vec<f64>>;

    /// `grad q(z) . v` for `v` in the constraint space (length `J`).
    fn outer_q_tvp(&self, z: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Proximal map of `step * R`. For indicator regularizers this is the
    /// Euclidean projection and `step` is ignored.
    fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>>;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Sample;

    /// Starting point of the solvers. Defaults to `prox_R(0)`.
    fn initial_point(&self) -> Result<Vec<f64>> {
        self.prox(&vec![0.0; self.dims().x], 1.0)
    }

    /// Maps the minimized `f` value to the quantity written to trajectories
    /// (e.g. a utility that is being maximized).
    fn report_objective(&self, f: f64) -> f64 {
        f
    }

    /// Maps a constraint value to its reporting unit.
    fn report_violation(&self, q: f64) -> f64 {
        q
    }
}

/// Cap `C_l` of the smoothed penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub c_ell: f64,
}

impl PenaltySpec {
    pub fn new(c_ell: f64) -> Result<Self> {
        let spec = Self { c_ell };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_ell.is_finite() && self.c_ell > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "penalty cap must be positive and finite, got {}",
                self.c_ell
            )))
        }
    }
}

fn penalty_component(v: f64, c: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if v <= c {
        0.5 * v * v
    } else {
        c * v - 0.5 * c * c
    }
}

/// `l(v) = sum_j l_j(v_j)`: zero below 0, quadratic on `[0, C_l]`, linear above.
pub fn penalty_value(v: &[f64], spec: PenaltySpec) -> Result<f64> {
    spec.validate()?;
    ensure_finite(v, "constraint evaluation")?;
    Ok(v.iter().map(|&vj| penalty_component(vj, spec.c_ell)).sum())
}

/// Exact derivative of [`penalty_value`]: `clamp(v_j, 0, C_l)` componentwise.
pub fn penalty_grad(v: &[f64], spec: PenaltySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    ensure_finite(v, "constraint evaluation")?;
    Ok(v.iter().map(|&vj| vj.clamp(0.0, spec.c_ell)).collect())
}

/// `grad h(x, xi) . grad q(z) . grad l(q(z))`, the constraint part of the
/// stochastic quasi-gradient.
pub fn penalized_constraint_grad_tvp<P: CompositionalProblem>(
    problem: &P,
    x: &[f64],
    xi: &P::Sample,
    z: &[f64],
    spec: PenaltySpec,
) -> Result<Vec<f64>> {
    let dims = problem.dims();
    ensure_len(z, dims.h, "penalized constraint gradient (z)")?;
    ensure_finite(z, "constraint tracking iterate")?;
    let q = problem.outer_q(z)?;
    let lg = penalty_grad(&q, spec)?;
    if lg.iter().all(|&g| g == 0.0) {
        return Ok(vec![0.0; dims.x]);
    }
    let dz = problem.outer_q_tvp(z, &lg)?;
    let out = problem.jacobian_h_tvp(x, xi, &dz)?;
    ensure_finite(&out, "penalized constraint gradient")?;
    Ok(out)
}

/// Estimates `C_l` as twice the largest single-sample constraint value seen
/// over `points` random feasible points (each `prox_R` of a standard normal
/// draw scaled by `spread`).
pub fn estimate_c_ell<P: CompositionalProblem, R: Rng + ?Sized>(
    problem: &P,
    points: usize,
    spread: f64,
    rng: &mut R,
) -> Result<PenaltySpec> {
    use rand_distr::{Distribution, StandardNormal};
    let n = problem.dims().x;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..points {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                spread * z
            })
            .collect();
        let x = problem.prox(&raw, 1.0)?;
        let xi = problem.sample(&mut *rng);
        let q = problem.outer_q(&problem.inner_h(&x, &xi)?)?;
        for qj in q {
            if qj.is_finite() {
                worst = worst.max(qj);
            }
        }
    }
    // Only boundedness matters; fall back to 1 when every sample is feasible.
    let c_ell = if worst > 0.0 { 2.0 * worst } else { 1.0 };
    PenaltySpec::new(c_ell)
}
