//! Empirical rate study on the synthetic problem: every schedule preset,
//! both solvers, several horizons and seeds.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::with_worker_pool;
use crate::error::{Error, Result};
use crate::schedules::SchedulePreset;
use crate::sco::PenaltySpec;
use crate::solvers::{run, Variant};
use crate::synthetic::SyntheticProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStudyConfig {
    pub presets: Vec<String>,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    pub scale: f64,
    pub penalty_cap: f64,
    /// Distance of the unconstrained minimizer past the constraint.
    pub excess: f64,
    pub out: PathBuf,
}

impl Default for SyntheticStudyConfig {
    fn default() -> Self {
        Self {
            presets: vec!["t1-row1".into(), "t1-row2".into(), "t1-row3".into()],
            horizons: vec![1_000, 10_000, 100_000],
            seeds: (0..10).collect(),
            scale: 1.0,
            penalty_cap: 1.0,
            excess: 0.005,
            out: PathBuf::from("out"),
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRow {
    pub preset: String,
    pub solver: String,
    pub iterations: usize,
    pub seed: u64,
    /// `|F(x_hat) - F(x*)|`
    pub gap: f64,
    /// `[q(x_hat)]_+` with the exact expectation.
    pub violation: f64,
}

/// Medians over seeds for one (preset, solver, horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCell {
    pub preset: String,
    pub solver: String,
    pub iterations: usize,
    pub median_gap: f64,
    pub median_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSlope {
    pub preset: String,
    pub solver: String,
    /// Least-squares slope of log(median gap) against log(T).
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStudy {
    pub optimal_value: f64,
    pub rows: Vec<SyntheticRow>,
    pub cells: Vec<SyntheticCell>,
    pub slopes: Vec<GapSlope>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn run_synthetic_study(cfg: &SyntheticStudyConfig) -> Result<SyntheticStudy> {
    if cfg.seeds.is_empty() || cfg.horizons.is_empty() || cfg.presets.is_empty() {
        return Err(Error::Config(
            "synthetic study needs presets, horizons and seeds".into(),
        ));
    }
    let problem = SyntheticProblem::default().with_excess(cfg.excess);
    problem.validate()?;
    let penalty = PenaltySpec::new(cfg.penalty_cap)?;
    let presets: Vec<SchedulePreset> = cfg
        .presets
        .iter()
        .map(|n| SchedulePreset::by_name(n).map(|p| p.with_scale(cfg.scale)))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for p in &presets {
        for v in [Variant::Acscpg, Variant::Cscgd] {
            for &t in &cfg.horizons {
                for &s in &cfg.seeds {
                    jobs.push((p, v, t, s));
                }
            }
        }
    }
    let f_star = problem.optimal_value();
    let rows: Vec<SyntheticRow> = with_worker_pool(|| {
        jobs.par_iter()
            .map(|&(p, v, t, s)| {
                let traj = run(&problem, penalty, p, t, s, v).map_err(|f| f.error)?;
                Ok(SyntheticRow {
                    preset: p.name.clone(),
                    solver: v.name().to_string(),
                    iterations: t,
                    seed: s,
                    gap: (problem.objective(&traj.x_hat) - f_star).abs(),
                    violation: problem.violation(&traj.x_hat).max(0.0),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut cells = Vec::new();
    let mut slopes = Vec::new();
    for p in &presets {
        for v in [Variant::Acscpg, Variant::Cscgd] {
            let mut medians = Vec::new();
            for &t in &cfg.horizons {
                let sel: Vec<&SyntheticRow> = rows
                    .iter()
                    .filter(|r| r.preset == p.name && r.solver == v.name() && r.iterations == t)
                    .collect();
                let gaps: Vec<f64> = sel.iter().map(|r| r.gap).collect();
                let viols: Vec<f64> = sel.iter().map(|r| r.violation).collect();
                let cell = SyntheticCell {
                    preset: p.name.clone(),
                    solver: v.name().to_string(),
                    iterations: t,
                    median_gap: median(&gaps),
                    median_violation: median(&viols),
                };
                medians.push(cell.median_gap);
                cells.push(cell);
            }
            if cfg.horizons.len() >= 2 {
                let xs: Vec<f64> = cfg.horizons.iter().map(|&t| t as f64).collect();
                slopes.push(GapSlope {
                    preset: p.name.clone(),
                    solver: v.name().to_string(),
                    slope: loglog_slope(&xs, &medians),
                });
            }
        }
    }
    Ok(SyntheticStudy {
        optimal_value: f_star,
        rows,
        cells,
        slopes,
    })
}

/// Writes `synthetic_runs.csv`, `synthetic_table.csv` and
/// `synthetic_summary.json` into `dir`.
pub fn write_synthetic_study(study: &SyntheticStudy, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("synthetic_runs.csv"))?;
    for r in &study.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("synthetic_table.csv"))?;
    for c in &study.cells {
        w.serialize(c)?;
    }
    w.flush()?;
    std::fs::write(
        dir.join("synthetic_summary.json"),
        serde_json::to_string_pretty(study)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_study() {
        let cfg = SyntheticStudyConfig {
            presets: vec!["t1-row3".into()],
            horizons: vec![100, 1000],
            seeds: vec![0, 1, 2],
            ..SyntheticStudyConfig::default()
        };
        let study = run_synthetic_study(&cfg).unwrap();
        assert_eq!(study.rows.len(), 2 * 2 * 3);
        assert_eq!(study.cells.len(), 4);
        assert_eq!(study.slopes.len(), 2);
        assert!(study
            .rows
            .iter()
            .all(|r| r.gap.is_finite() && r.violation >= 0.0));
    }
}
