//! The scheduling problem as a constrained compositional problem.
//!
//! * `g(x, xi)_j = sum_i b_j(p_j, xi_ij) / rate_unit` (aggregate server rate)
//! * `h(x, xi) = (u, v)` with `u_j = sum_i pi_ij lambda_i / b_ij` and
//!   `v_j = sum_i pi_ij lambda_i / b_ij^2`
//! * `f(y) = -sum_j psi(y_j)`
//! * `q_j(z) = (L^2 v_j / (2 max(eps, 1 - L u_j)) - D_j) / delay_unit`
//!
//! Inner functions are evaluated with power floored at `p_min`: the
//! extrapolated tracking point may leave the power box, where the capacity
//! is not defined.

use rand::Rng;

use super::channel::{capacity, capacity_dpower, sample_channel, ChannelSample};
use super::scenario::{equiprobable_policy, Scenario, Utility};
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::projections::{prox_policy_power, PolicySupport};
use crate::sco::{CompositionalProblem, Dims, PenaltySpec};

/// Where the solvers start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPoint {
    /// Equiprobable policy with uniform power `P / M`.
    #[default]
    Uniform,
    /// Projection of the origin (minimum power on every server).
    ProjectedOrigin,
}

#[derive(Debug, Clone)]
pub struct DataCenterProblem {
    scenario: Scenario,
    support: PolicySupport,
    start: StartPoint,
}

/// Builds the adapter after validating the scenario.
pub fn build_problem(scenario: &Scenario) -> Result<DataCenterProblem> {
    scenario.validate()?;
    Ok(DataCenterProblem {
        support: scenario.support(),
        scenario: scenario.clone(),
        start: StartPoint::default(),
    })
}

impl DataCenterProblem {
    pub fn with_start(mut self, start: StartPoint) -> Self {
        self.start = start;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec {
            c_ell: self.scenario.penalty_cap,
        }
    }

    fn m(&self) -> usize {
        self.scenario.servers
    }

    fn effective_power(&self, p: f64) -> f64 {
        p.max(self.scenario.power.p_min)
    }

    fn rate(&self, x: &[f64], xi: &ChannelSample, i: usize, j: usize) -> Result<f64> {
        capacity(
            self.effective_power(x[j]),
            xi.get(i, j),
            self.scenario.bandwidth[j],
        )
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        ensure_len(
            x,
            self.scenario.decision_len(),
            "data-center decision vector",
        )?;
        ensure_finite(x, "data-center decision vector")
    }

    /// `psi(y)` and `psi'(y)`.
    fn utility(&self, y: f64) -> (f64, f64) {
        match self.scenario.utility {
            Utility::Linear => (y, 1.0),
            Utility::Log1p => (y.ln_1p(), 1.0 / (1.0 + y)),
        }
    }
}

impl CompositionalProblem for DataCenterProblem {
    type Sample = ChannelSample;

    fn dims(&self) -> Dims {
        let m = self.m();
        Dims {
            x: self.scenario.decision_len(),
            g: m,
            h: 2 * m,
            constraints: m,
        }
    }

    fn inner_g(&self, x: &[f64], xi: &ChannelSample) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let m = self.m();
        let mut out = vec![0.0; m];
        for i in 0..self.scenario.files.len() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.rate(x, xi, i, j)?;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.scenario.rate_unit);
        Ok(out)
    }

    fn inner_h(&self, x: &[f64], xi: &ChannelSample) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let m = self.m();
        let mut out = vec![0.0; 2 * m];
        for (i, file) in self.scenario.files.iter().enumerate() {
            let lambda = self.scenario.arrival_rates[i];
            for &j in &file.servers {
                let pi = x[m * (1 + i) + j];
                if pi == 0.0 {
                    continue;
                }
                let b = self.rate(x, xi, i, j)?;
                if !(b > 0.0) {
                    return Err(Error::SingularRate { file: i, server: j });
                }
                out[j] += pi * lambda / b;
                out[m + j] += pi * lambda / (b * b);
            }
        }
        Ok(out)
    }

    fn jacobian_g_tvp(&self, x: &[f64], xi: &ChannelSample, v: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let m = self.m();
        ensure_len(v, m, "objective cotangent")?;
        let mut out = vec![0.0; x.len()];
        for j in 0..m {
            if x[j] < self.scenario.power.p_min {
                continue;
            }
            let dsum: f64 = (0..self.scenario.files.len())
                .map(|i| capacity_dpower(x[j], xi.get(i, j), self.scenario.bandwidth[j]))
                .sum();
            out[j] = v[j] * dsum / self.scenario.rate_unit;
        }
        Ok(out)
    }

    fn jacobian_h_tvp(&self, x: &[f64], xi: &ChannelSample, v: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let m = self.m();
        ensure_len(v, 2 * m, "constraint cotangent")?;
        let mut out = vec![0.0; x.len()];
        for (i, file) in self.scenario.files.iter().enumerate() {
            let lambda = self.scenario.arrival_rates[i];
            for &j in &file.servers {
                let b = self.rate(x, xi, i, j)?;
                if !(b > 0.0) {
                    return Err(Error::SingularRate { file: i, server: j });
                }
                let (vu, vv) = (v[j], v[m + j]);
                // d/dpi of (pi lambda / b, pi lambda / b^2)
                out[m * (1 + i) + j] += lambda * (vu / b + vv / (b * b));
                if x[j] >= self.scenario.power.p_min {
                    // d(1/b)/dp = -b'/b^2, d(1/b^2)/dp = -2 b'/b^3
                    let db = capacity_dpower(x[j], xi.get(i, j), self.scenario.bandwidth[j]);
                    let pi = x[m * (1 + i) + j];
                    out[j] -= pi * lambda * db * (vu / (b * b) + 2.0 * vv / (b * b * b));
                }
            }
        }
        Ok(out)
    }

    fn outer_f(&self, y: &[f64]) -> Result<f64> {
        ensure_len(y, self.m(), "objective tracker")?;
        ensure_finite(y, "objective tracker")?;
        Ok(-y.iter().map(|&v| self.utility(v).0).sum::<f64>())
    }

    fn outer_f_grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_len(y, self.m(), "objective tracker")?;
        ensure_finite(y, "objective tracker")?;
        Ok(y.iter().map(|&v| -self.utility(v).1).collect())
    }

    fn outer_q(&self, z: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        ensure_len(z, 2 * m, "constraint tracker")?;
        ensure_finite(z, "constraint tracker")?;
        let s = &self.scenario;
        let l = s.chunk_bits;
        Ok((0..m)
            .map(|j| {
                let den = (1.0 - l * z[j]).max(s.stability_floor);
                (l * l * z[m + j] / (2.0 * den) - s.delay_cap[j]) / s.delay_unit
            })
            .collect())
    }

    fn outer_q_tvp(&self, z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        ensure_len(z, 2 * m, "constraint tracker")?;
        ensure_len(v, m, "constraint cotangent")?;
        let s = &self.scenario;
        let l = s.chunk_bits;
        let mut out = vec![0.0; 2 * m];
        for j in 0..m {
            let raw = 1.0 - l * z[j];
            let den = raw.max(s.stability_floor);
            let scale = v[j] / s.delay_unit;
            if raw > s.stability_floor {
                out[j] = scale * l * l * z[m + j] * l / (2.0 * den * den);
            }
            out[m + j] = scale * l * l / (2.0 * den);
        }
        Ok(out)
    }

    fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        prox_policy_power(v, &self.support, self.scenario.power, step)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelSample {
        sample_channel(&self.scenario, rng)
    }

    fn initial_point(&self) -> Result<Vec<f64>> {
        match self.start {
            StartPoint::Uniform => self.prox(&equiprobable_policy(&self.scenario).to_flat(), 1.0),
            StartPoint::ProjectedOrigin => self.prox(&vec![0.0; self.scenario.decision_len()], 1.0),
        }
    }

    /// Utility `U = -f`, in `rate_unit` bits/s.
    fn report_objective(&self, f: f64) -> f64 {
        -f
    }

    /// `W_j - D_j` in seconds.
    fn report_violation(&self, q: f64) -> f64 {
        q * self.scenario.delay_unit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios::desk_scenario;
    use crate::harness::validate::random_feasible_point;
    use crate::oracles::{central_gradient, relative_error};
    use crate::projections::FileSupport;
    use crate::wdc::scenario::DecisionVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One server, one file, unit everything.
    fn tiny(bandwidth: f64, lambda: f64) -> Scenario {
        let mut s = desk_scenario(0).unwrap();
        s.servers = 1;
        s.files = vec![FileSupport {
            servers: vec![0],
            quota: 1,
        }];
        s.arrival_rates = vec![lambda];
        s.bandwidth = vec![bandwidth];
        s.delay_cap = vec![0.0];
        s.geometry.servers = vec![[0.0, 0.0]];
        s.chunk_bits = 1.0;
        s.rate_unit = 1.0;
        s.delay_unit = 1.0;
        s.stability_floor = 1e-3;
        s.power.p_min = 0.0;
        s.power.p_max = 2.0;
        s.power.budget = 2.0;
        s
    }

    fn chan(xi: Vec<f64>, servers: usize) -> ChannelSample {
        ChannelSample { servers, xi }
    }

    #[test]
    fn inner_g_examples() {
        let p = build_problem(&tiny(1.0, 1.0)).unwrap();
        assert_eq!(
            p.inner_g(&[1.0, 1.0], &chan(vec![1.0], 1)).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            p.inner_g(&[0.0, 1.0], &chan(vec![1.0], 1)).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn inner_h_examples() {
        // b = log2(1 + 15) = 4
        let p = build_problem(&tiny(1.0, 2.0)).unwrap();
        let h = p.inner_h(&[1.0, 1.0], &chan(vec![15.0], 1)).unwrap();
        assert!((h[0] - 0.5).abs() < 1e-15 && (h[1] - 0.125).abs() < 1e-15);
        let h = p.inner_h(&[1.0, 0.0], &chan(vec![15.0], 1)).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        let err = p.inner_h(&[0.0, 1.0], &chan(vec![15.0], 1)).unwrap_err();
        assert!(matches!(err, Error::SingularRate { .. }));
    }

    #[test]
    fn outer_examples() {
        let mut s = tiny(1.0, 1.0);
        let p = build_problem(&s).unwrap();
        assert_eq!(p.outer_q(&[0.5, 0.25]).unwrap(), vec![0.25]);
        s.delay_cap = vec![5.0];
        let p5 = build_problem(&s).unwrap();
        assert_eq!(p5.outer_q(&[0.5, 0.125]).unwrap(), vec![-4.875]);
        // clamp branch: L^2 v / (2 eps)
        let q = p.outer_q(&[2.0, 0.25]).unwrap()[0];
        assert!((q - 0.25 / (2.0 * 1e-3)).abs() < 1e-9);

        s.utility = Utility::Log1p;
        let pl = build_problem(&s).unwrap();
        assert_eq!(pl.outer_f(&[0.0]).unwrap(), 0.0);
        let mut lin = desk_scenario(0).unwrap();
        lin.utility = Utility::Linear;
        lin.servers = 2;
        let pl = DataCenterProblem {
            support: lin.support(),
            scenario: lin,
            start: StartPoint::Uniform,
        };
        assert_eq!(pl.outer_f(&[2.0, 3.0]).unwrap(), -5.0);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let s = desk_scenario(4).unwrap();
        let p = build_problem(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_feasible_point(&s, &mut rng);
            let xi = p.sample(&mut rng);
            let vg: Vec<f64> = (0..s.servers).map(|_| rng.random::<f64>() - 0.5).collect();
            let vh: Vec<f64> = (0..2 * s.servers)
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let ag = p.jacobian_g_tvp(&x, &xi, &vg).unwrap();
            let fd = central_gradient(
                |x| {
                    p.inner_g(x, &xi)
                        .unwrap()
                        .iter()
                        .zip(&vg)
                        .map(|(a, b)| a * b)
                        .sum()
                },
                &x,
                1e-6,
            );
            assert!(relative_error(&ag, &fd, 1e-12) < 1e-5);
            // scale the u and v halves so both contribute comparably
            let (su, sv) = {
                let h = p.inner_h(&x, &xi).unwrap();
                let m = s.servers;
                let nu = h[..m].iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
                let nv = h[m..].iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
                (1.0 / nu, 1.0 / nv)
            };
            let vh: Vec<f64> = vh
                .iter()
                .enumerate()
                .map(|(k, v)| if k < s.servers { v * su } else { v * sv })
                .collect();
            let ah = p.jacobian_h_tvp(&x, &xi, &vh).unwrap();
            let fd = central_gradient(
                |x| {
                    p.inner_h(x, &xi)
                        .unwrap()
                        .iter()
                        .zip(&vh)
                        .map(|(a, b)| a * b)
                        .sum()
                },
                &x,
                1e-6,
            );
            assert!(relative_error(&ah, &fd, 1e-12) < 1e-5);
        }
    }

    #[test]
    fn policy_does_not_enter_the_objective() {
        let s = desk_scenario(2).unwrap();
        let p = build_problem(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_feasible_point(&s, &mut rng);
        let xi = p.sample(&mut rng);
        let g = p.jacobian_g_tvp(&x, &xi, &vec![1.0; s.servers]).unwrap();
        assert!(g[s.servers..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn start_point_is_feasible() {
        let s = desk_scenario(2).unwrap();
        let p = build_problem(&s).unwrap();
        let x1 = DecisionVector::from_flat(&p.initial_point().unwrap(), s.servers).unwrap();
        assert!(x1.is_feasible(&s, 1e-10));
    }
}
