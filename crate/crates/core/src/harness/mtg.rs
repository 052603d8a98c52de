//! Martingale tail and normal-approximation experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::td::{discrepancy_summary, DiscrepancyParams, DiscrepancySummary};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::markov::ChainModel;
use crate::martingale::{
    berry_esseen_rhs, bernstein_bound, martingale_sums, verify_bernstein, verify_hoeffding, BoundReport,
    MartingaleSpec, MatrixFunction,
};
use crate::rng::{derive_seed, stream_rng};

/// Martingale generator `g`: explicit rows, or standard normal entries centered under `μ`.
pub fn martingale_generator(chain: &ChainModel, g: Option<&[Vec<f64>]>, dim: usize, seed: u64) -> Result<Mat> {
    let n = chain.n_states();
    if let Some(rows) = g {
        if rows.len() != n || rows.iter().any(|r| r.len() != rows[0].len()) || rows[0].is_empty() {
            return Err(Error::Config(format!("g must have {n} equal-length nonempty rows")));
        }
        return Ok(Mat::from_fn(n, rows[0].len(), |i, j| rows[i][j]));
    }
    let mut rng = stream_rng(derive_seed(seed, "martingale-g"), 0);
    let raw = Mat::from_fn(n, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mean = raw.transpose() * chain.stationary();
    Ok(Mat::from_fn(n, dim, |i, j| raw[(i, j)] - mean[j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinExperiment {
    pub reports: Vec<BoundReport>,
    /// Right-hand sides, `[n][δ]`.
    pub rhs: Vec<Vec<f64>>,
    /// Largest over smallest calibration multiplier across `n`.
    pub calibration_spread: f64,
}

pub fn bernstein_experiment(
    spec: &MartingaleSpec,
    chain: &ChainModel,
    ns: &[u64],
    deltas: &[f64],
    replications: usize,
    seed: u64,
) -> Result<BernsteinExperiment> {
    let mut reports = Vec::with_capacity(ns.len());
    let mut rhs = Vec::with_capacity(ns.len());
    for &n in ns {
        let n = n as usize;
        let report = verify_bernstein(spec, chain, n, deltas, replications, derive_seed(seed, &format!("bernstein-{n}")))?;
        rhs.push(
            deltas
                .iter()
                .map(|&d| bernstein_bound(spec, chain, n, d).map(|t| t.total))
                .collect::<Result<Vec<_>>>()?,
        );
        reports.push(report);
    }
    let cs: Vec<f64> = reports.iter().filter_map(|r| r.calibration).collect();
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BernsteinExperiment {
        reports,
        rhs,
        calibration_spread: hi / lo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingExperiment {
    /// One report per (function, n), function-major.
    pub reports: Vec<BoundReport>,
    pub function_index: Vec<usize>,
}

impl HoeffdingExperiment {
    pub fn any_violation(&self) -> bool {
        self.reports.iter().any(BoundReport::any_violation)
    }
}

/// `count` random matrix functions of dimension `d`, function `k` on stream `k`.
pub fn random_matrix_functions(chain: &ChainModel, d: usize, count: usize, seed: u64) -> Result<Vec<MatrixFunction>> {
    let base = derive_seed(seed, "matrix-functions");
    (0..count as u64)
        .map(|k| MatrixFunction::random(chain, d, &mut stream_rng(base, k)))
        .collect()
}

pub fn hoeffding_experiment(
    funcs: &[MatrixFunction],
    chain: &ChainModel,
    ns: &[u64],
    eps_grid: &[f64],
    replications: usize,
    seed: u64,
) -> Result<HoeffdingExperiment> {
    let mut reports = Vec::new();
    let mut function_index = Vec::new();
    for (k, f) in funcs.iter().enumerate() {
        for &n in ns {
            let s = derive_seed(seed, &format!("hoeffding-{k}-{n}"));
            reports.push(verify_hoeffding(f, chain, n as usize, eps_grid, replications, s)?);
            function_index.push(k);
        }
    }
    Ok(HoeffdingExperiment { reports, function_index })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtgBerryEsseen {
    pub discrepancy: DiscrepancySummary,
    /// Unit-constant right-hand side per `n`, for display.
    pub rhs: Vec<f64>,
}

/// Distance between `S_n/√n` and `N(0, Σ_n)` across path lengths.
pub fn mtg_berry_esseen_experiment(
    spec: &MartingaleSpec,
    chain: &ChainModel,
    ns: &[u64],
    replications: usize,
    params: DiscrepancyParams,
    seed: u64,
) -> Result<MtgBerryEsseen> {
    let samples: Vec<Vec<Vector>> = ns
        .iter()
        .map(|&n| {
            let scale = 1.0 / (n as f64).sqrt();
            martingale_sums(spec, chain, n as usize, replications, derive_seed(seed, &format!("paths-{n}")))
                .into_iter()
                .map(|s| s * scale)
                .collect()
        })
        .collect();
    let discrepancy = discrepancy_summary(ns, &samples, spec.sigma_n(), params, seed)?;
    let rhs = ns.iter().map(|&n| berry_esseen_rhs(spec, chain, n as usize)).collect();
    Ok(MtgBerryEsseen { discrepancy, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ChainModel {
        ChainModel::stationary_start(Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap()
    }

    #[test]
    fn random_generator_is_centered() {
        let c = chain();
        let g = martingale_generator(&c, None, 3, 4).unwrap();
        let mean = g.transpose() * c.stationary();
        assert!(mean.amax() < 1e-12);
        assert_eq!(g, martingale_generator(&c, None, 3, 4).unwrap());
    }

    #[test]
    fn explicit_generator_shape_is_checked() {
        let c = chain();
        assert!(martingale_generator(&c, Some(&[vec![1.0]]), 1, 0).is_err());
        let g = martingale_generator(&c, Some(&[vec![1.0], vec![-2.0]]), 1, 0).unwrap();
        assert_eq!(g.nrows(), 2);
    }

    #[test]
    fn hoeffding_experiment_layout() {
        let c = chain();
        let fs = random_matrix_functions(&c, 2, 2, 1).unwrap();
        let e = hoeffding_experiment(&fs, &c, &[50, 100], &[0.5], 100, 2).unwrap();
        assert_eq!(e.reports.len(), 4);
        assert_eq!(e.function_index, vec![0, 0, 1, 1]);
        assert!(!e.any_violation());
    }
}
