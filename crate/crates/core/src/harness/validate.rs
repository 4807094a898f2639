//! Self-checks with independent oracles: discrete-event queue simulation
//! against the P-K formula, projections against an exhaustive active-set
//! QP, and adapter derivatives against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracles::{central_gradient, qp_capped_simplex, qp_power, relative_error};
use crate::projections::{project_capped_simplex, project_power, PowerBox};
use crate::sco::CompositionalProblem;
use crate::wdc::queue::{pk_delay, server_moments, simulate_fifo, simulate_mg1};
use crate::wdc::scenario::{equiprobable_policy, DecisionVector, Scenario};
use crate::wdc::{build_problem, DataCenterProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Arrivals per discrete-event run.
    pub des_horizon: usize,
    /// Channel draws behind the P-K prediction.
    pub moment_draws: usize,
    pub loads: Vec<f64>,
    pub des_seeds: usize,
    pub projection_instances: usize,
    pub gradient_points: usize,
    /// Multiplies the analytic constraint Jacobian product; anything other
    /// than 1 is a negative control that must fail the gradient suite.
    pub gradient_scale: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            des_horizon: 100_000,
            moment_draws: 1_000_000,
            loads: vec![0.3, 0.6, 0.8],
            des_seeds: 3,
            projection_instances: 1000,
            gradient_points: 100,
            gradient_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest error seen, in the suite's own metric.
    pub worst: f64,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

/// One simulated queue compared with its P-K prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkCase {
    pub label: String,
    pub load: f64,
    pub predicted: f64,
    pub simulated: f64,
    pub ci95: f64,
    pub relative_error: f64,
    pub passed: bool,
}

pub const PK_TOLERANCE: f64 = 0.05;

fn pk_case(label: String, load: f64, predicted: f64, simulated: f64, ci95: f64) -> PkCase {
    let relative_error = (simulated - predicted).abs() / predicted;
    PkCase {
        passed: relative_error <= PK_TOLERANCE || (simulated - predicted).abs() <= ci95,
        label,
        load,
        predicted,
        simulated,
        ci95,
        relative_error,
    }
}

/// M/D/1 with arrival rate 0.5 and unit service: mean wait 0.5.
pub fn pk_md1(horizon: usize, seed: u64) -> Result<PkCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = simulate_fifo(0.5, horizon, &mut rng, |_| 1.0)?;
    let predicted = pk_delay(0.5, 0.5, 1.0)?;
    Ok(pk_case(
        format!("M/D/1 seed {seed}"),
        0.5,
        predicted,
        est.mean_wait,
        est.ci95,
    ))
}

/// Rescales all arrival rates so that `server` carries `load` under the
/// equiprobable policy, then compares the discrete-event wait with the P-K
/// value from Monte-Carlo moments.
pub fn pk_mixture(
    scenario: &Scenario,
    server: usize,
    load: f64,
    horizon: usize,
    moment_draws: usize,
    seed: u64,
) -> Result<PkCase> {
    let mut s = scenario.clone();
    let x = equiprobable_policy(&s);
    let (u0, _) = server_moments(&s, server, &x, moment_draws / 10, seed ^ 0xca1)?;
    let factor = load / (u0 * s.chunk_bits);
    s.arrival_rates.iter_mut().for_each(|l| *l *= factor);
    let (u, v) = server_moments(&s, server, &x, moment_draws, seed ^ 0x5eed)?;
    let predicted = pk_delay(u, v, s.chunk_bits)?;
    let est = simulate_mg1(&s, server, &x, horizon, seed)?;
    Ok(pk_case(
        format!("server {server} mixture, seed {seed}"),
        u * s.chunk_bits,
        predicted,
        est.mean_wait,
        est.ci95,
    ))
}

pub fn pk_suite(scenario: &Scenario, opts: &ValidateOptions) -> Result<(SuiteResult, Vec<PkCase>)> {
    let mut cases = vec![pk_md1(opts.des_horizon, opts.seed)?];
    let server = scenario.servers - 1;
    for &load in &opts.loads {
        for k in 0..opts.des_seeds as u64 {
            cases.push(pk_mixture(
                scenario,
                server,
                load,
                opts.des_horizon,
                opts.moment_draws,
                opts.seed + k,
            )?);
        }
    }
    let failures = cases.iter().filter(|c| !c.passed).count();
    let suite = SuiteResult {
        name: "pk-vs-des".into(),
        passed: failures == 0,
        cases: cases.len(),
        failures,
        worst: cases.iter().map(|c| c.relative_error).fold(0.0, f64::max),
        tolerance: PK_TOLERANCE,
        notes: cases
            .iter()
            .map(|c| {
                format!(
                    "{}: load {:.3}, P-K {:.6e}, DES {:.6e} +/- {:.2e}",
                    c.label, c.load, c.predicted, c.simulated, c.ci95
                )
            })
            .collect(),
    };
    Ok((suite, cases))
}

pub const PROJECTION_TOLERANCE: f64 = 1e-8;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Random capped-simplex and power-box instances (dimension 1 to 8)
/// checked against the exhaustive QP, plus idempotence and
/// non-expansiveness.
pub fn projection_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut record = |err: f64, worst: &mut f64| {
        *worst = worst.max(err);
        if !(err <= PROJECTION_TOLERANCE) {
            failures += 1;
        }
    };
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    };
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        // capped simplex on a random support
        let mut support: Vec<bool> = (0..n).map(|_| rng.random_bool(0.75)).collect();
        support[rng.random_range(0..n)] = true;
        let size = support.iter().filter(|&&s| s).count();
        let quota = rng.random_range(1..=size) as f64;
        let (v, u) = (draw(&mut rng, n), draw(&mut rng, n));
        let p = project_capped_simplex(&v, quota, &support)?;
        let pu = project_capped_simplex(&u, quota, &support)?;
        record(
            dist(&p, &qp_capped_simplex(&v, quota, &support)),
            &mut worst,
        );
        record(
            dist(&project_capped_simplex(&p, quota, &support)?, &p),
            &mut worst,
        );
        record((dist(&p, &pu) - dist(&v, &u)).max(0.0), &mut worst);

        // power box with a budget
        let p_min = rng.random_range(0.0..0.2);
        let p_max = p_min + rng.random_range(0.5..3.0);
        let budget = rng.random_range(n as f64 * p_min + 0.01..n as f64 * p_max + 1.0);
        let bounds = PowerBox {
            budget,
            p_min,
            p_max,
        };
        let p = project_power(&v, bounds)?;
        let pu = project_power(&u, bounds)?;
        record(dist(&p, &qp_power(&v, bounds)), &mut worst);
        record(dist(&project_power(&p, bounds)?, &p), &mut worst);
        record((dist(&p, &pu) - dist(&v, &u)).max(0.0), &mut worst);
    }
    Ok(SuiteResult {
        name: "projection-vs-qp".into(),
        passed: failures == 0,
        cases: 6 * instances,
        failures,
        worst,
        tolerance: PROJECTION_TOLERANCE,
        notes: vec![],
    })
}

/// A feasible decision strictly inside the power box and the policy
/// polytope.
pub fn random_feasible_point<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Vec<f64> {
    let m = s.servers;
    let pb = s.power;
    let span = pb.budget / m as f64 - pb.p_min;
    let power: Vec<f64> = (0..m)
        .map(|_| pb.p_min + (0.05 + 0.9 * rng.random::<f64>()) * span)
        .collect();
    let policy = s
        .files
        .iter()
        .map(|f| {
            let base = f.quota as f64 / f.servers.len() as f64;
            let mut row = vec![0.0; m];
            let delta: Vec<f64> = f
                .servers
                .iter()
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let mean = delta.iter().sum::<f64>() / delta.len() as f64;
            let room = base.min(1.0 - base) * 0.9;
            for (&j, d) in f.servers.iter().zip(&delta) {
                row[j] = base + room * (d - mean);
            }
            row
        })
        .collect();
    DecisionVector { power, policy }.to_flat()
}

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst relative error of the four derivative products at one point.
fn gradient_errors<R: Rng + ?Sized>(
    p: &DataCenterProblem,
    x: &[f64],
    rng: &mut R,
    scale: f64,
) -> Result<[f64; 4]> {
    let s = p.scenario();
    let m = s.servers;
    let xi = p.sample(rng);
    let cot =
        |n: usize, rng: &mut R| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>() - 0.5).collect() };

    let vg = cot(m, rng);
    let ag = p.jacobian_g_tvp(x, &xi, &vg)?;
    let fd = central_gradient(|x| dot(&p.inner_g(x, &xi).unwrap(), &vg), x, FD_STEP);
    let eg = relative_error(&ag, &fd, 1e-12);

    // weight the u and v halves so both contribute at comparable scale
    let h = p.inner_h(x, &xi)?;
    let nu = h[..m].iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let nv = h[m..].iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let vh: Vec<f64> = cot(2 * m, rng)
        .iter()
        .enumerate()
        .map(|(k, v)| if k < m { v / nu } else { v / nv })
        .collect();
    let ah: Vec<f64> = p
        .jacobian_h_tvp(x, &xi, &vh)?
        .into_iter()
        .map(|v| v * scale)
        .collect();
    let fd = central_gradient(|x| dot(&p.inner_h(x, &xi).unwrap(), &vh), x, FD_STEP);
    let eh = relative_error(&ah, &fd, 1e-12);

    let y = p.inner_g(x, &xi)?;
    let af = p.outer_f_grad(&y)?;
    let fd = central_gradient(|y| p.outer_f(y).unwrap(), &y, FD_STEP);
    let ef = relative_error(&af, &fd, 1e-12);

    // outer q on the stable side of the clamp, where it is smooth
    let z = h;
    let stable = (0..m).all(|j| 1.0 - s.chunk_bits * z[j] > s.stability_floor * 1.01);
    let eq = if stable {
        let vq = cot(m, rng);
        let aq = p.outer_q_tvp(&z, &vq)?;
        let fd = central_gradient(|z| dot(&p.outer_q(z).unwrap(), &vq), &z, FD_STEP);
        relative_error(&aq, &fd, 1e-12)
    } else {
        0.0
    };
    Ok([eg, eh, ef, eq])
}

/// Adapter derivative products against central differences at
/// `points` random feasible decisions.
pub fn gradient_suite(
    scenario: &Scenario,
    points: usize,
    seed: u64,
    scale: f64,
) -> Result<SuiteResult> {
    let p = build_problem(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    let mut failures = 0;
    for _ in 0..points {
        let x = random_feasible_point(scenario, &mut rng);
        let errs = gradient_errors(&p, &x, &mut rng, scale)?;
        if errs.iter().any(|e| !(*e <= GRADIENT_TOLERANCE)) {
            failures += 1;
        }
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Ok(SuiteResult {
        name: "gradient-vs-fd".into(),
        passed: failures == 0,
        cases: points,
        failures,
        worst: worst.iter().cloned().fold(0.0, f64::max),
        tolerance: GRADIENT_TOLERANCE,
        notes: ["inner_g", "inner_h", "outer_f", "outer_q"]
            .iter()
            .zip(worst)
            .map(|(n, w)| format!("{n}: worst relative error {w:.3e}"))
            .collect(),
    })
}

pub fn validate(scenario: &Scenario, opts: &ValidateOptions) -> Result<ValidationReport> {
    let (pk, _) = pk_suite(scenario, opts)?;
    let suites = vec![
        pk,
        projection_suite(opts.projection_instances, opts.seed)?,
        gradient_suite(
            scenario,
            opts.gradient_points,
            opts.seed,
            opts.gradient_scale,
        )?,
    ];
    Ok(ValidationReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
