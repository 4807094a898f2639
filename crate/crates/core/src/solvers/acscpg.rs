//! Accelerated constrained stochastic compositional proximal gradient.
//!
//! Each iteration takes a proximal quasi-gradient step on `x` using the
//! tracked inner means `y ~ E[g]`, `z ~ E[h]`, then refreshes the trackers at
//! the extrapolated point `w = (1 - 1/beta) x_t + (1/beta) x_{t+1}`. The
//! extrapolation keeps `y`, `z` centred on the moving iterate. The baseline
//! variant queries the trackers at `x_{t+1}` instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::{RunMetadata, StepRecord, Trajectory};
use crate::error::{ensure_len, Error, Result};
use crate::schedules::{step_sizes, SchedulePreset, StepSizes};
use crate::sco::{penalized_constraint_grad_tvp, CompositionalProblem, PenaltySpec};

const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Trackers refreshed at the extrapolated point.
    Acscpg,
    /// Trackers refreshed at the new iterate (no extrapolation).
    Cscgd,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Acscpg => "acscpg",
            Variant::Cscgd => "cscgd",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acscpg" => Ok(Variant::Acscpg),
            "cscgd" => Ok(Variant::Cscgd),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// 1-indexed iteration the next step will perform.
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub running_sum: Vec<f64>,
    pub averaged: usize,
}

impl SolverState {
    /// `y_1 = z_1 = 0`, `w_1 = x_1`.
    pub fn new<P: CompositionalProblem>(problem: &P, x1: Vec<f64>) -> Result<Self> {
        let dims = problem.dims();
        ensure_len(&x1, dims.x, "initial iterate")?;
        Ok(Self {
            t: 1,
            w: x1.clone(),
            running_sum: vec![0.0; dims.x],
            x: x1,
            y: vec![0.0; dims.g],
            z: vec![0.0; dims.h],
            averaged: 0,
        })
    }

    pub fn average(&self) -> Option<Vec<f64>> {
        (self.averaged > 0).then(|| {
            self.running_sum
                .iter()
                .map(|s| s / self.averaged as f64)
                .collect()
        })
    }
}

/// Outcome of one step, alongside the new state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub sizes: StepSizes,
    pub step_norm: f64,
}

/// One iteration with explicit step sizes.
pub fn step_with_sizes<P: CompositionalProblem>(
    problem: &P,
    state: &SolverState,
    sample_t: &P::Sample,
    sample_next: &P::Sample,
    sizes: StepSizes,
    penalty: PenaltySpec,
    variant: Variant,
) -> Result<(SolverState, StepInfo)> {
    let dims = problem.dims();
    ensure_len(&state.x, dims.x, "solver state x")?;
    ensure_len(&state.y, dims.g, "solver state y")?;
    ensure_len(&state.z, dims.h, "solver state z")?;
    let t = state.t;
    let diverged = |reason: &str| Error::Divergence {
        iteration: t,
        reason: reason.to_string(),
    };

    let fy = problem.outer_f_grad(&state.y)?;
    let obj_dir = problem.jacobian_g_tvp(&state.x, sample_t, &fy)?;
    let con_dir = penalized_constraint_grad_tvp(problem, &state.x, sample_t, &state.z, penalty)?;
    let trial: Vec<f64> = state
        .x
        .iter()
        .zip(obj_dir.iter().zip(&con_dir))
        .map(|(x, (go, gc))| x - sizes.alpha * go - sizes.delta * gc)
        .collect();
    if trial.iter().any(|v| !v.is_finite()) {
        return Err(diverged("non-finite proximal input"));
    }
    let x_next = problem.prox(&trial, sizes.alpha)?;
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(diverged("non-finite iterate"));
    }
    if x_next.iter().map(|v| v * v).sum::<f64>().sqrt() > DIVERGENCE_NORM {
        return Err(diverged("iterate norm exceeded 1e6"));
    }

    let w_next: Vec<f64> = match variant {
        Variant::Acscpg if sizes.beta < 1.0 => {
            // (1 - 1/beta) x_t + (1/beta) x_{t+1}, written as a correction of x_t
            let inv = 1.0 / sizes.beta;
            state
                .x
                .iter()
                .zip(&x_next)
                .map(|(xo, xn)| xo + inv * (xn - xo))
                .collect()
        }
        Variant::Acscpg | Variant::Cscgd => x_next.clone(),
    };
    let g = problem.inner_g(&w_next, sample_next)?;
    let h = problem.inner_h(&w_next, sample_next)?;
    let b = sizes.beta;
    let y: Vec<f64> = state
        .y
        .iter()
        .zip(&g)
        .map(|(yo, gv)| (1.0 - b) * yo + b * gv)
        .collect();
    let z: Vec<f64> = state
        .z
        .iter()
        .zip(&h)
        .map(|(zo, hv)| (1.0 - b) * zo + b * hv)
        .collect();
    if y.iter().chain(&z).chain(&w_next).any(|v| !v.is_finite()) {
        return Err(diverged("non-finite tracking iterate"));
    }
    let step_norm = state
        .x
        .iter()
        .zip(&x_next)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((
        SolverState {
            t: t + 1,
            x: x_next,
            y,
            z,
            w: w_next,
            running_sum: state.running_sum.clone(),
            averaged: state.averaged,
        },
        StepInfo { sizes, step_norm },
    ))
}

/// One iteration with the preset's step sizes at `state.t`.
pub fn acscpg_step<P: CompositionalProblem>(
    problem: &P,
    state: &SolverState,
    sample_t: &P::Sample,
    sample_next: &P::Sample,
    preset: &SchedulePreset,
    penalty: PenaltySpec,
) -> Result<SolverState> {
    let sizes = step_sizes(state.t, preset)?;
    step_with_sizes(
        problem,
        state,
        sample_t,
        sample_next,
        sizes,
        penalty,
        Variant::Acscpg,
    )
    .map(|(s, _)| s)
}

/// A failed run: the error plus everything recorded before it.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

/// Runs `iterations` steps from `problem.initial_point()`.
pub fn run<P: CompositionalProblem>(
    problem: &P,
    penalty: PenaltySpec,
    preset: &SchedulePreset,
    iterations: usize,
    seed: u64,
    variant: Variant,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let meta = RunMetadata {
        solver: variant.name().to_string(),
        preset: preset.name.clone(),
        iterations,
        seed,
    };
    let mut traj = Trajectory {
        meta,
        records: Vec::with_capacity(iterations),
        x_hat: Vec::new(),
        x_last: Vec::new(),
    };
    match drive(
        problem, penalty, preset, iterations, seed, variant, &mut traj,
    ) {
        Ok(()) => Ok(traj),
        Err(error) => Err(Box::new(RunFailure {
            error,
            partial: traj,
        })),
    }
}

fn drive<P: CompositionalProblem>(
    problem: &P,
    penalty: PenaltySpec,
    preset: &SchedulePreset,
    iterations: usize,
    seed: u64,
    variant: Variant,
    traj: &mut Trajectory,
) -> Result<()> {
    if iterations < 4 || !iterations.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "iteration count must be even and at least 4, got {iterations}"
        )));
    }
    preset.validate()?;
    penalty.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1 = problem.initial_point()?;
    let mut state = SolverState::new(problem, x1)?;
    traj.x_hat = state.x.clone();
    traj.x_last = state.x.clone();
    let mut sample_t = problem.sample(&mut rng);
    let tail = iterations / 2..iterations;
    for t in 1..=iterations {
        let sample_next = problem.sample(&mut rng);
        let sizes = step_sizes(t, preset)?;
        let (mut next, info) = step_with_sizes(
            problem,
            &state,
            &sample_t,
            &sample_next,
            sizes,
            penalty,
            variant,
        )?;
        // x_hat averages x_{t+1} for t = T/2 .. T-1
        if tail.contains(&t) {
            for (s, v) in next.running_sum.iter_mut().zip(&next.x) {
                *s += v;
            }
            next.averaged += 1;
        }
        let objective = problem.report_objective(problem.outer_f(&next.y)?);
        let max_violation = problem.report_violation(
            problem
                .outer_q(&next.z)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
        );
        traj.records.push(StepRecord {
            t,
            objective,
            max_violation,
            step_norm: info.step_norm,
            alpha: sizes.alpha,
            beta: sizes.beta,
            delta: sizes.delta,
        });
        traj.x_last = next.x.clone();
        state = next;
        sample_t = sample_next;
    }
    traj.x_hat = state.average().unwrap_or_else(|| state.x.clone());
    Ok(())
}

pub fn run_acscpg<P: CompositionalProblem>(
    problem: &P,
    penalty: PenaltySpec,
    preset: &SchedulePreset,
    iterations: usize,
    seed: u64,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    run(problem, penalty, preset, iterations, seed, Variant::Acscpg)
}

pub fn run_cscgd<P: CompositionalProblem>(
    problem: &P,
    penalty: PenaltySpec,
    preset: &SchedulePreset,
    iterations: usize,
    seed: u64,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    run(problem, penalty, preset, iterations, seed, Variant::Cscgd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sco::Dims;
    use crate::synthetic::SyntheticProblem;
    use rand::Rng;

    /// `g(x, xi) = x + xi`, `f(y) = y` or `y^2 / 2`, no active constraint,
    /// `R = 0`.
    struct Scalar {
        quadratic: bool,
    }

    impl CompositionalProblem for Scalar {
        type Sample = f64;

        fn dims(&self) -> Dims {
            Dims {
                x: 1,
                g: 1,
                h: 1,
                constraints: 1,
            }
        }
        fn inner_g(&self, x: &[f64], xi: &f64) -> Result<Vec<f64>> {
            Ok(vec![x[0] + xi])
        }
        fn inner_h(&self, _x: &[f64], _xi: &f64) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
        fn jacobian_g_tvp(&self, _x: &[f64], _xi: &f64, v: &[f64]) -> Result<Vec<f64>> {
            Ok(v.to_vec())
        }
        fn jacobian_h_tvp(&self, _x: &[f64], _xi: &f64, _v: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
        fn outer_f(&self, y: &[f64]) -> Result<f64> {
            Ok(if self.quadratic {
                0.5 * y[0] * y[0]
            } else {
                y[0]
            })
        }
        fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![if self.quadratic { y[0] } else { 1.0 }])
        }
        fn outer_q(&self, _z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-1.0])
        }
        fn outer_q_tvp(&self, _z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![v[0]])
        }
        fn prox(&self, v: &[f64], _step: f64) -> Result<Vec<f64>> {
            Ok(v.to_vec())
        }
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            rng.random_range(-1.0..1.0)
        }
        fn initial_point(&self) -> Result<Vec<f64>> {
            Ok(vec![1.0])
        }
    }

    /// Inner functions that ignore `x`, with a satisfied constraint.
    struct Constant;

    impl CompositionalProblem for Constant {
        type Sample = ();

        fn dims(&self) -> Dims {
            Dims {
                x: 2,
                g: 1,
                h: 1,
                constraints: 1,
            }
        }
        fn inner_g(&self, _x: &[f64], _xi: &()) -> Result<Vec<f64>> {
            Ok(vec![3.0])
        }
        fn inner_h(&self, _x: &[f64], _xi: &()) -> Result<Vec<f64>> {
            Ok(vec![-2.0])
        }
        fn jacobian_g_tvp(&self, _x: &[f64], _xi: &(), _v: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0; 2])
        }
        fn jacobian_h_tvp(&self, _x: &[f64], _xi: &(), _v: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0; 2])
        }
        fn outer_f(&self, y: &[f64]) -> Result<f64> {
            Ok(y[0] * y[0])
        }
        fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![2.0 * y[0]])
        }
        fn outer_q(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(z.to_vec())
        }
        fn outer_q_tvp(&self, _z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
            Ok(v.to_vec())
        }
        fn prox(&self, v: &[f64], _step: f64) -> Result<Vec<f64>> {
            Ok(v.to_vec())
        }
        fn sample<R: Rng + ?Sized>(&self, _rng: &mut R) {}
        fn initial_point(&self) -> Result<Vec<f64>> {
            Ok(vec![0.7, -1.3])
        }
    }

    fn sizes(alpha: f64, beta: f64, delta: f64) -> StepSizes {
        StepSizes { alpha, beta, delta }
    }

    fn pen() -> PenaltySpec {
        PenaltySpec { c_ell: 1.0 }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let p = Constant;
        for variant in [Variant::Acscpg, Variant::Cscgd] {
            let mut st = SolverState::new(&p, p.initial_point().unwrap()).unwrap();
            for _ in 0..5 {
                let (next, info) =
                    step_with_sizes(&p, &st, &(), &(), sizes(0.5, 0.3, 0.5), pen(), variant)
                        .unwrap();
                assert_eq!(next.x, st.x);
                assert_eq!(next.w, st.x);
                assert_eq!(info.step_norm, 0.0);
                st = next;
            }
        }
    }

    #[test]
    fn scalar_linear_step() {
        let p = Scalar { quadratic: false };
        let st = SolverState::new(&p, vec![2.0]).unwrap();
        let (next, _) = step_with_sizes(
            &p,
            &st,
            &0.4,
            &-0.3,
            sizes(0.1, 1.0, 0.1),
            pen(),
            Variant::Acscpg,
        )
        .unwrap();
        assert!((next.x[0] - 1.9).abs() < 1e-15);
        assert_eq!(next.w, next.x);
        assert!((next.y[0] - (1.9 - 0.3)).abs() < 1e-15);
        assert_eq!(next.t, 2);
    }

    #[test]
    fn two_step_manual_trace() {
        // x1 = 1, y1 = 0, alpha = 0.1, beta = 0.5, xi = (0.3, -0.2, 0.5)
        // x2 = 1 - 0.1 * 0 = 1;       w2 = -1 * 1 + 2 * 1 = 1;       y2 = 0.5 * (1 - 0.2) = 0.4
        // x3 = 1 - 0.1 * 0.4 = 0.96;  w3 = -1 * 1 + 2 * 0.96 = 0.92; y3 = 0.2 + 0.5 * 1.42 = 0.91
        let p = Scalar { quadratic: true };
        let xi = [0.3, -0.2, 0.5];
        let s = sizes(0.1, 0.5, 0.1);
        let st = SolverState::new(&p, vec![1.0]).unwrap();
        let (st, _) = step_with_sizes(&p, &st, &xi[0], &xi[1], s, pen(), Variant::Acscpg).unwrap();
        assert!((st.x[0] - 1.0).abs() < 1e-12);
        assert!((st.w[0] - 1.0).abs() < 1e-12);
        assert!((st.y[0] - 0.4).abs() < 1e-12);
        let (st, _) = step_with_sizes(&p, &st, &xi[1], &xi[2], s, pen(), Variant::Acscpg).unwrap();
        assert!((st.x[0] - 0.96).abs() < 1e-12);
        assert!((st.w[0] - 0.92).abs() < 1e-12);
        assert!((st.y[0] - 0.91).abs() < 1e-12);
        assert_eq!(st.z, vec![0.0]);
    }

    #[test]
    fn deterministic_problem_converges() {
        let p = SyntheticProblem {
            noise_sd: 0.0,
            cap: 100.0,
            ..SyntheticProblem::default()
        };
        let preset = SchedulePreset::by_name("t1-row3").unwrap();
        let traj = run_acscpg(&p, pen(), &preset, 10_000, 1).unwrap();
        let opt = p.optimum();
        for (a, b) in traj.x_hat.iter().zip(&opt) {
            assert!((a - b).abs() < 1e-2, "{:?} vs {:?}", traj.x_hat, opt);
        }
    }

    #[test]
    fn zero_scale_keeps_initial_point() {
        let p = SyntheticProblem::default();
        let preset = SchedulePreset::by_name("t1-row1").unwrap().with_scale(0.0);
        let traj = run_cscgd(&p, pen(), &preset, 20, 3).unwrap();
        assert_eq!(traj.x_hat, p.initial_point().unwrap());
        assert!(traj.records.iter().all(|r| r.step_norm == 0.0));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = SyntheticProblem::default();
        let preset = SchedulePreset::by_name("t1-row2").unwrap();
        let a = run_acscpg(&p, pen(), &preset, 200, 11).unwrap();
        let b = run_acscpg(&p, pen(), &preset, 200, 11).unwrap();
        assert_eq!(a, b);
        let c = run_acscpg(&p, pen(), &preset, 200, 12).unwrap();
        assert_ne!(a.x_hat, c.x_hat);
    }

    #[test]
    fn unit_beta_removes_extrapolation() {
        let p = SyntheticProblem::default();
        let mut preset = SchedulePreset::by_name("t1-row3").unwrap();
        preset.b = 0.0;
        let a = run_acscpg(&p, pen(), &preset, 100, 5).unwrap();
        let b = run_cscgd(&p, pen(), &preset, 100, 5).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.x_hat, b.x_hat);
    }

    #[test]
    fn trajectory_shape() {
        let p = SyntheticProblem::default();
        let preset = SchedulePreset::by_name("t1-row3").unwrap();
        let traj = run_acscpg(&p, pen(), &preset, 50, 0).unwrap();
        assert_eq!(traj.records.len(), 50);
        assert!(traj.records.iter().enumerate().all(|(k, r)| r.t == k + 1));
        assert!(traj.x_hat.iter().all(|v| v.is_finite()));
        assert!(matches!(
            run_acscpg(&p, pen(), &preset, 7, 0).unwrap_err().error,
            Error::Config(_)
        ));
        assert!(run_acscpg(&p, pen(), &preset, 2, 0).is_err());
    }

    /// `x_hat` is the mean of `x_{t+1}` for `t = T/2 .. T-1`.
    #[test]
    fn average_window() {
        let p = SyntheticProblem::default();
        let preset = SchedulePreset::by_name("t1-row3").unwrap();
        let t_total = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = SolverState::new(&p, p.initial_point().unwrap()).unwrap();
        let mut xi = p.sample(&mut rng);
        let mut iterates = Vec::new();
        for t in 1..=t_total {
            let next_xi = p.sample(&mut rng);
            let (next, _) = step_with_sizes(
                &p,
                &st,
                &xi,
                &next_xi,
                step_sizes(t, &preset).unwrap(),
                pen(),
                Variant::Acscpg,
            )
            .unwrap();
            iterates.push(next.x.clone());
            st = next;
            xi = next_xi;
        }
        let window = &iterates[t_total / 2 - 1..t_total - 1];
        let expect: Vec<f64> = (0..3)
            .map(|i| window.iter().map(|x| x[i]).sum::<f64>() / window.len() as f64)
            .collect();
        let traj = run_acscpg(&p, pen(), &preset, t_total, 9).unwrap();
        for (a, b) in traj.x_hat.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(&traj.x_last, iterates.last().unwrap());
    }

    #[test]
    fn divergence_is_reported_with_partial_trajectory() {
        struct Blowup;
        impl CompositionalProblem for Blowup {
            type Sample = ();
            fn dims(&self) -> Dims {
                Dims {
                    x: 1,
                    g: 1,
                    h: 1,
                    constraints: 1,
                }
            }
            fn inner_g(&self, x: &[f64], _xi: &()) -> Result<Vec<f64>> {
                Ok(vec![x[0]])
            }
            fn inner_h(&self, _x: &[f64], _xi: &()) -> Result<Vec<f64>> {
                Ok(vec![0.0])
            }
            fn jacobian_g_tvp(&self, _x: &[f64], _xi: &(), v: &[f64]) -> Result<Vec<f64>> {
                Ok(v.to_vec())
            }
            fn jacobian_h_tvp(&self, _x: &[f64], _xi: &(), _v: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.0])
            }
            // concave outer function: gradient ascent to infinity
            fn outer_f(&self, y: &[f64]) -> Result<f64> {
                Ok(-y[0] * y[0])
            }
            fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![-2.0 * y[0]])
            }
            fn outer_q(&self, _z: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![-1.0])
            }
            fn outer_q_tvp(&self, _z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
                Ok(v.to_vec())
            }
            fn prox(&self, v: &[f64], _step: f64) -> Result<Vec<f64>> {
                Ok(v.to_vec())
            }
            fn sample<R: Rng + ?Sized>(&self, _rng: &mut R) {}
            fn initial_point(&self) -> Result<Vec<f64>> {
                Ok(vec![1.0])
            }
        }
        let preset = SchedulePreset::by_name("t1-row3").unwrap().with_scale(50.0);
        let fail = run_acscpg(&Blowup, pen(), &preset, 1000, 0).unwrap_err();
        let Error::Divergence { iteration, .. } = fail.error else {
            panic!("expected divergence, got {:?}", fail.error);
        };
        assert_eq!(fail.partial.records.len(), iteration - 1);
    }
}
