//! Independent reference computations used to check the fast paths:
//! exhaustive active-set QP solvers for the two projections and central
//! finite differences. Deliberately slow and dependency-free.

use crate::projections::PowerBox;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Lower,
    Upper,
    Free,
}

const STATUSES: [Status; 3] = [Status::Lower, Status::Upper, Status::Free];

/// Calls `visit` with every assignment of a bound status to `count` coordinates.
fn for_each_pattern(count: usize, mut visit: impl FnMut(&[Status])) {
    let mut pattern = vec![Status::Lower; count];
    let total = 3usize.pow(count as u32);
    for code in 0..total {
        let mut c = code;
        for s in pattern.iter_mut() {
            *s = STATUSES[c % 3];
            c /= 3;
        }
        visit(&pattern);
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Nearest point of the capped simplex found by enumerating every active set.
pub fn qp_capped_simplex(v: &[f64], quota: f64, support: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..v.len()).filter(|&j| support[j]).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let tol = 1e-11;
    for_each_pattern(idx.len(), |pattern| {
        let mut x = vec![0.0; v.len()];
        let mut fixed = 0.0;
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        for (&j, &s) in idx.iter().zip(pattern) {
            match s {
                Status::Lower => {}
                Status::Upper => {
                    x[j] = 1.0;
                    fixed += 1.0;
                }
                Status::Free => {
                    free_sum += v[j];
                    free_count += 1;
                }
            }
        }
        if free_count == 0 {
            if (fixed - quota).abs() > tol {
                return;
            }
        } else {
            let tau = (free_sum + fixed - quota) / free_count as f64;
            for (&j, &s) in idx.iter().zip(pattern) {
                if s == Status::Free {
                    let xj = v[j] - tau;
                    if !(-tol..=1.0 + tol).contains(&xj) {
                        return;
                    }
                    x[j] = xj;
                }
            }
        }
        let d = sq_dist(&x, v);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    });
    best.map(|(_, x)| x).expect("capped simplex is nonempty")
}

/// Nearest point of the power set found by enumerating active sets, with the
/// budget either slack or tight.
pub fn qp_power(v: &[f64], bounds: PowerBox) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let tol = 1e-11;
    for_each_pattern(n, |pattern| {
        for tight in [false, true] {
            let mut x = vec![0.0; n];
            let mut fixed = 0.0;
            let mut free_sum = 0.0;
            let mut free_count = 0usize;
            for j in 0..n {
                match pattern[j] {
                    Status::Lower => {
                        x[j] = bounds.p_min;
                        fixed += bounds.p_min;
                    }
                    Status::Upper => {
                        x[j] = bounds.p_max;
                        fixed += bounds.p_max;
                    }
                    Status::Free => {
                        free_sum += v[j];
                        free_count += 1;
                    }
                }
            }
            let mu = if tight && free_count > 0 {
                (free_sum + fixed - bounds.budget) / free_count as f64
            } else {
                0.0
            };
            if mu < -tol {
                continue;
            }
            let mut ok = true;
            for j in 0..n {
                if pattern[j] == Status::Free {
                    x[j] = v[j] - mu;
                    if x[j] < bounds.p_min - tol || x[j] > bounds.p_max + tol {
                        ok = false;
                    }
                }
            }
            if !ok || x.iter().sum::<f64>() > bounds.budget + tol {
                continue;
            }
            let d = sq_dist(&x, v);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    });
    best.map(|(_, x)| x).expect("power set is nonempty")
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = step * x[k].abs().max(1.0);
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let dn = f(&probe);
            probe[k] = x[k];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Relative error `|a - b| / max(|a|, |b|, floor)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = sq_dist(a, b).sqrt();
    let scale = a
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .max(floor);
    diff / scale
}
