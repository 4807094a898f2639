//! Euclidean projections onto the scheduling polytope and the power budget.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

const BISECTION_ITERS: usize = 200;
const SUM_TOL: f64 = 1e-10;

/// Placement of one file: the servers holding its chunks and the number of
/// chunks `k` a request needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSupport {
    pub servers: Vec<usize>,
    pub quota: usize,
}

/// Per-file supports over `servers` servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySupport {
    pub servers: usize,
    pub files: Vec<FileSupport>,
}

impl PolicySupport {
    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.files.iter().enumerate() {
            let mut seen = vec![false; self.servers];
            for &j in &f.servers {
                if j >= self.servers {
                    return Err(Error::Config(format!(
                        "file {i}: server index {j} out of range"
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::Config(format!("file {i}: duplicate server {j}")));
                }
            }
            if f.quota == 0 || f.quota > f.servers.len() {
                return Err(Error::InfeasibleQuota {
                    quota: f.quota as f64,
                    support: f.servers.len(),
                });
            }
        }
        Ok(())
    }

    pub fn mask(&self, file: usize) -> Vec<bool> {
        let mut m = vec![false; self.servers];
        for &j in &self.files[file].servers {
            m[j] = true;
        }
        m
    }
}

/// Box and budget of the power block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBox {
    pub budget: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl PowerBox {
    pub fn validate(&self, servers: usize) -> Result<()> {
        let ok = self.budget > 0.0
            && self.p_min >= 0.0
            && self.p_min < self.p_max
            && servers as f64 * self.p_min <= self.budget;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "infeasible power box: {servers} x p_min {} vs budget {}, p_max {}",
                self.p_min, self.budget, self.p_max
            )))
        }
    }
}

/// Finds the root of a non-increasing function `sum(tau) - target` between
/// `lo` (sum >= target) and `hi` (sum <= target).
fn bisect(mut lo: f64, mut hi: f64, target: f64, sum: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Projects `v` onto `{x : sum_{j in support} x_j = quota, 0 <= x <= 1, x_j = 0 off support}`.
pub fn project_capped_simplex(v: &[f64], quota: f64, support: &[bool]) -> Result<Vec<f64>> {
    if v.len() != support.len() {
        return Err(Error::Dimension {
            context: "capped simplex support",
            expected: v.len(),
            got: support.len(),
        });
    }
    ensure_finite(v, "capped simplex input")?;
    let size = support.iter().filter(|&&s| s).count();
    if !(quota >= 0.0 && quota <= size as f64) {
        return Err(Error::InfeasibleQuota {
            quota,
            support: size,
        });
    }
    let idx: Vec<usize> = (0..v.len()).filter(|&j| support[j]).collect();
    let mut out = vec![0.0; v.len()];
    if idx.is_empty() {
        return Ok(out);
    }
    let shifted = |tau: f64| -> f64 { idx.iter().map(|&j| (v[j] - tau).clamp(0.0, 1.0)).sum() };
    let lo_v = idx.iter().map(|&j| v[j]).fold(f64::INFINITY, f64::min);
    let hi_v = idx.iter().map(|&j| v[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut tau = bisect(lo_v - 1.0, hi_v, quota, shifted);

    // Polish: with the active set fixed, the shift solves a linear equation.
    let free: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&j| {
            let s = v[j] - tau;
            s > 0.0 && s < 1.0
        })
        .collect();
    if !free.is_empty() {
        let capped = idx.iter().filter(|&&j| v[j] - tau >= 1.0).count() as f64;
        let free_sum: f64 = free.iter().map(|&j| v[j]).sum();
        let exact = (free_sum + capped - quota) / free.len() as f64;
        if (shifted(exact) - quota).abs() <= (shifted(tau) - quota).abs() {
            tau = exact;
        }
    }
    for &j in &idx {
        out[j] = (v[j] - tau).clamp(0.0, 1.0);
    }
    let total: f64 = out.iter().sum();
    if (total - quota).abs() > SUM_TOL {
        // Spread the residual over the free coordinates.
        let free: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&j| out[j] > 0.0 && out[j] < 1.0)
            .collect();
        if !free.is_empty() {
            let adj = (quota - total) / free.len() as f64;
            for j in free {
                out[j] = (out[j] + adj).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Projects `v` onto `{p : sum p <= budget, p_min <= p <= p_max}`.
pub fn project_power(v: &[f64], bounds: PowerBox) -> Result<Vec<f64>> {
    bounds.validate(v.len())?;
    ensure_finite(v, "power input")?;
    let clamp = |mu: f64| -> Vec<f64> {
        v.iter()
            .map(|&x| (x - mu).clamp(bounds.p_min, bounds.p_max))
            .collect()
    };
    let boxed = clamp(0.0);
    if boxed.iter().sum::<f64>() <= bounds.budget {
        return Ok(boxed);
    }
    let total = |mu: f64| -> f64 {
        v.iter()
            .map(|&x| (x - mu).clamp(bounds.p_min, bounds.p_max))
            .sum()
    };
    let hi = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - bounds.p_min;
    let mut mu = bisect(0.0, hi.max(0.0), bounds.budget, total);
    let free: Vec<usize> = (0..v.len())
        .filter(|&j| {
            let s = v[j] - mu;
            s > bounds.p_min && s < bounds.p_max
        })
        .collect();
    if !free.is_empty() {
        let fixed: f64 = (0..v.len())
            .filter(|j| !free.contains(j))
            .map(|j| (v[j] - mu).clamp(bounds.p_min, bounds.p_max))
            .sum();
        let free_sum: f64 = free.iter().map(|&j| v[j]).sum();
        let exact = (free_sum + fixed - bounds.budget) / free.len() as f64;
        if exact >= 0.0 && (total(exact) - bounds.budget).abs() <= (total(mu) - bounds.budget).abs()
        {
            mu = exact;
        }
    }
    let mut out = clamp(mu);
    // Never exceed the budget through rounding.
    let excess = out.iter().sum::<f64>() - bounds.budget;
    if excess > 0.0 {
        if let Some(j) = (0..out.len()).max_by(|&a, &b| out[a].total_cmp(&out[b])) {
            out[j] = (out[j] - excess).max(bounds.p_min);
        }
    }
    Ok(out)
}

/// Projection onto the product of the power set and every file's capped
/// simplex. `x` is laid out as `[power (M) | policy row-major (N x M)]`.
/// The step is ignored: the prox of an indicator is the projection.
pub fn prox_policy_power(
    x: &[f64],
    support: &PolicySupport,
    bounds: PowerBox,
    _step: f64,
) -> Result<Vec<f64>> {
    let m = support.servers;
    let expected = m * (1 + support.files.len());
    if x.len() != expected {
        return Err(Error::Dimension {
            context: "policy/power decision vector",
            expected,
            got: x.len(),
        });
    }
    let mut out = Vec::with_capacity(expected);
    out.extend(project_power(&x[..m], bounds)?);
    for (i, file) in support.files.iter().enumerate() {
        let row = &x[m * (1 + i)..m * (2 + i)];
        out.extend(project_capped_simplex(
            row,
            file.quota as f64,
            &support.mask(i),
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{qp_capped_simplex, qp_power};
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn capped_simplex_examples() {
        let full = [true; 4];
        let v = [0.5; 4];
        assert_eq!(project_capped_simplex(&v, 2.0, &full).unwrap(), v.to_vec());
        let out = project_capped_simplex(&[2.0, 0.0, 0.0, 0.0], 1.0, &full).unwrap();
        assert!(close(&out, &[1.0, 0.0, 0.0, 0.0], 1e-12));
        let out = project_capped_simplex(&[0.9, 0.9, 0.9], 1.0, &[true, true, false]).unwrap();
        assert!(close(&out, &[0.5, 0.5, 0.0], 1e-12));
        // cross-check against the enumeration oracle
        let oracle = qp_capped_simplex(&[0.9, 0.9, 0.9], 1.0, &[true, true, false]);
        assert!(close(&out, &oracle, 1e-12));
    }

    #[test]
    fn infeasible_quota() {
        let err = project_capped_simplex(&[0.0; 3], 3.0, &[true, true, false]).unwrap_err();
        assert!(matches!(err, Error::InfeasibleQuota { support: 2, .. }));
    }

    #[test]
    fn power_examples() {
        let b = |p_min, p_max| PowerBox {
            budget: 1.0,
            p_min,
            p_max,
        };
        assert_eq!(
            project_power(&[0.2, 0.3], b(0.0, 1.0)).unwrap(),
            vec![0.2, 0.3]
        );
        let out = project_power(&[2.0, 2.0], b(0.0, 2.0)).unwrap();
        assert!(close(&out, &[0.5, 0.5], 1e-12));
        assert_eq!(
            project_power(&[-1.0, -1.0], b(0.01, 1.0)).unwrap(),
            vec![0.01, 0.01]
        );
        assert!(project_power(&[0.0; 3], b(0.5, 1.0)).is_err());
        assert!(project_power(&[0.0; 2], b(0.5, 0.5)).is_err());
    }

    fn two_file_support() -> PolicySupport {
        PolicySupport {
            servers: 8,
            files: vec![
                FileSupport {
                    servers: (0..8).collect(),
                    quota: 4,
                },
                FileSupport {
                    servers: (0..8).collect(),
                    quota: 4,
                },
            ],
        }
    }

    #[test]
    fn zero_policy_rows_become_uniform() {
        let support = two_file_support();
        let bounds = PowerBox {
            budget: 8.0,
            p_min: 0.001,
            p_max: 8.0,
        };
        let out = prox_policy_power(&[0.0; 24], &support, bounds, 1.0).unwrap();
        assert!(out[..8].iter().all(|&p| p == 0.001));
        assert!(close(&out[8..], &[0.5; 16], 1e-12));
        let again = prox_policy_power(&out, &support, bounds, 0.3).unwrap();
        assert!(close(&again, &out, 1e-12));
    }

    #[test]
    fn supports_are_validated() {
        let mut s = two_file_support();
        s.files[0].quota = 9;
        assert!(s.validate().is_err());
        s.files[0].quota = 4;
        s.files[1].servers = vec![0, 0, 1, 2];
        assert!(s.validate().is_err());
        s.files[1].servers = vec![0, 1, 2, 9];
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn capped_simplex_matches_oracle(
            v in prop::collection::vec(-3.0f64..3.0, 1..=8),
            mask_bits in 0u32..256,
            quota_frac in 0.0f64..1.0,
        ) {
            let mut support: Vec<bool> = (0..v.len()).map(|j| mask_bits >> j & 1 == 1).collect();
            support[0] = true;
            let size = support.iter().filter(|&&s| s).count();
            let quota = (quota_frac * size as f64).max(0.1);
            let fast = project_capped_simplex(&v, quota, &support).unwrap();
            let slow = qp_capped_simplex(&v, quota, &support);
            let dist: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist <= 1e-8, "{:?} vs {:?}", fast, slow);
            prop_assert!((fast.iter().sum::<f64>() - quota).abs() <= 1e-10);
            let again = project_capped_simplex(&fast, quota, &support).unwrap();
            prop_assert!(close(&again, &fast, 1e-12));
        }

        #[test]
        fn power_matches_oracle(
            v in prop::collection::vec(-2.0f64..4.0, 1..=8),
            budget in 0.5f64..6.0,
        ) {
            let bounds = PowerBox { budget, p_min: 0.01, p_max: budget };
            prop_assume!(bounds.validate(v.len()).is_ok());
            let fast = project_power(&v, bounds).unwrap();
            let slow = qp_power(&v, bounds);
            let dist: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist <= 1e-8, "{:?} vs {:?}", fast, slow);
            prop_assert!(fast.iter().sum::<f64>() <= budget + 1e-12);
        }

        #[test]
        fn non_expansive(
            u in prop::collection::vec(-3.0f64..3.0, 6),
            w in prop::collection::vec(-3.0f64..3.0, 6),
        ) {
            let support = [true, true, false, true, true, true];
            let pu = project_capped_simplex(&u, 2.0, &support).unwrap();
            let pw = project_capped_simplex(&w, 2.0, &support).unwrap();
            let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d(&pu, &pw) <= d(&u, &w) + 1e-12);
        }
    }
}
