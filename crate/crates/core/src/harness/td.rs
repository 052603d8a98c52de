//! Replicated TD runs and the summaries built on them: error rates, ellipsoid
//! coverage, and distance to the limiting Gaussian.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::covariance::{default_gamma_tol, gamma_tilde, lambda_star, lambda_t_threshold};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Mat, Vector};
use crate::metrics::{
    bias_corrected_ci, bootstrap_draws, fit_rate_with_draws, halfspace_discrepancy, sliced_wasserstein, EstimatorKind,
    GaussianSpec, RateFit,
};
use crate::mrp::{MrpModel, TdConfig, TdRunner};
use crate::rng::derive_seed;
use crate::stats::{median, wilson_interval, Z95};

/// `λ_min(Γ̃)` at or below this makes `Λ̃*` unusable for ellipsoids.
pub const GAMMA_DEGENERACY_TOL: f64 = 1e-10;

/// Checkpointed TD runs, indexed `[grid point][replication]`.
#[derive(Debug, Clone)]
pub struct TdSweep {
    pub t_grid: Vec<u64>,
    pub eta0: f64,
    pub alpha: f64,
    pub seed: u64,
    /// `‖θ̄_T − θ*‖₂`.
    pub errors: Vec<Vec<f64>>,
    /// `√T (θ̄_T − θ*)`.
    pub scaled: Vec<Vec<Vector>>,
}

impl TdSweep {
    pub fn replications(&self) -> usize {
        self.errors.first().map_or(0, Vec::len)
    }
}

/// Run `replications` independent TD trajectories to `max(t_grid)`, replication
/// `r` on stream `r` of `seed`.
pub fn simulate_td(
    mrp: &MrpModel,
    eta0: f64,
    alpha: f64,
    t_grid: &[u64],
    replications: usize,
    seed: u64,
) -> Result<TdSweep> {
    let horizon = *t_grid
        .last()
        .ok_or_else(|| Error::Config("empty T grid".into()))?;
    let config = TdConfig::new(eta0, alpha, horizon).with_schedule(t_grid.to_vec());
    let runner = TdRunner::new(mrp, config)?;
    let runs = (0..replications as u64)
        .into_par_iter()
        .map(|r| runner.run(seed, r))
        .collect::<Result<Vec<_>>>()?;
    let theta_star = mrp.theta_star();
    let mut errors = vec![Vec::with_capacity(replications); t_grid.len()];
    let mut scaled = vec![Vec::with_capacity(replications); t_grid.len()];
    for run in &runs {
        for (k, cp) in run.checkpoints.iter().enumerate() {
            errors[k].push(cp.error);
            let diff = Vector::from_column_slice(&cp.theta_bar) - theta_star;
            scaled[k].push(diff * (cp.t as f64).sqrt());
        }
    }
    Ok(TdSweep {
        t_grid: t_grid.to_vec(),
        eta0,
        alpha,
        seed,
        errors,
        scaled,
    })
}

/// `Γ̃` and `Λ̃*` for a model, with `Γ̃` required to be positive definite.
pub fn limiting_covariance(mrp: &MrpModel) -> Result<(Mat, Mat)> {
    let (gamma, _) = gamma_tilde(mrp, default_gamma_tol(mrp))?;
    let min_eig = min_eigenvalue(&gamma);
    if min_eig <= GAMMA_DEGENERACY_TOL {
        return Err(Error::DegenerateGamma { min_eig });
    }
    let lam = lambda_star(mrp.a_mat(), &gamma)?;
    Ok((gamma, lam))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub t: u64,
    pub median_error: f64,
    /// `√(Tr Λ̃* / T)`.
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rows: Vec<RateRow>,
    pub fit: RateFit,
}

/// Median error per horizon and its log-log slope, with a bootstrap CI.
pub fn rate_summary(sweep: &TdSweep, lambda_star: &Mat, n_boot: usize) -> Result<RateSummary> {
    let tr = lambda_star.trace();
    let rows: Vec<RateRow> = sweep
        .t_grid
        .iter()
        .zip(&sweep.errors)
        .map(|(&t, errs)| {
            let median_error = median(errs);
            let reference = (tr / t as f64).sqrt();
            RateRow {
                t,
                median_error,
                reference,
                ratio: median_error / reference,
            }
        })
        .collect();
    let ts: Vec<f64> = sweep.t_grid.iter().map(|&t| t as f64).collect();
    let point: Vec<f64> = rows.iter().map(|r| r.median_error).collect();
    let base = derive_seed(sweep.seed, "rate-bootstrap");
    let draws: Vec<Vec<f64>> = sweep
        .errors
        .iter()
        .enumerate()
        .map(|(k, errs)| bootstrap_draws(errs, |x: &[f64]| median(x), n_boot, derive_seed(base, &k.to_string())))
        .collect();
    let fit = fit_rate_with_draws(&ts, &point, &draws)?;
    Ok(RateSummary { rows, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub t: u64,
    pub nominal: f64,
    pub covered: usize,
    pub replications: usize,
    pub coverage: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `T` is below the horizon from which `λ_min(AΛ̃_TAᵀ) ≥ λ_min(Γ̃)/2` is guaranteed.
    pub below_threshold: bool,
}

/// Fraction of replications with `T(θ̄_T − θ*)ᵀ Λ̃*⁻¹ (θ̄_T − θ*) ≤ χ²_{d,p}`.
pub fn coverage_table(sweep: &TdSweep, lambda_star: &Mat, nominal: &[f64], threshold: f64) -> Result<Vec<CoverageRow>> {
    let d = lambda_star.nrows();
    let chol = lambda_star.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let chi = ChiSquared::new(d as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rows = Vec::new();
    for (&t, samples) in sweep.t_grid.iter().zip(&sweep.scaled) {
        let stats: Vec<f64> = samples.iter().map(|z| z.dot(&chol.solve(z))).collect();
        for &p in nominal {
            let q = chi.inverse_cdf(p);
            let covered = stats.iter().filter(|&&s| s <= q).count();
            let n = stats.len();
            let (ci_lo, ci_hi) = wilson_interval(covered, n, Z95);
            rows.push(CoverageRow {
                t,
                nominal: p,
                covered,
                replications: n,
                coverage: covered as f64 / n as f64,
                ci_lo,
                ci_hi,
                below_threshold: (t as f64) < threshold,
            });
        }
    }
    Ok(rows)
}

/// Simulate and tabulate coverage for `{0.8, 0.9, 0.95}`-style nominal levels.
pub fn coverage_experiment(
    mrp: &MrpModel,
    eta0: f64,
    alpha: f64,
    t_grid: &[u64],
    replications: usize,
    nominal: &[f64],
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    let (gamma, lam) = limiting_covariance(mrp)?;
    let sweep = simulate_td(mrp, eta0, alpha, t_grid, replications, seed)?;
    coverage_table(&sweep, &lam, nominal, lambda_t_threshold(mrp, eta0, alpha, &gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub t: u64,
    pub estimator_kind: EstimatorKind,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySummary {
    pub rows: Vec<DiscrepancyRow>,
    /// Log-log fit of the half-space medians.
    pub fit: RateFit,
}

#[derive(Debug, Clone, Copy)]
pub struct DiscrepancyParams {
    pub n_directions: usize,
    pub direction_batches: usize,
    pub n_boot: usize,
    /// Also report sliced `W₁` (bootstrap with a quarter of the draws).
    pub sliced: bool,
}

fn unit_ci(value: f64, boot: &[f64]) -> (f64, f64) {
    bias_corrected_ci(value, boot).map_or((f64::NAN, f64::NAN), |(lo, hi)| (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

fn batch_seed(seed: u64, b: usize) -> u64 {
    derive_seed(seed, &format!("directions-{b}"))
}

/// Discrepancy between each grid point's samples and `N(0, cov)`.
///
/// The half-space value is the median over `direction_batches` independent direction
/// sets. Its bias-corrected bootstrap CI and the percentile slope CI come from resampling
/// the samples with the first set.
pub fn discrepancy_summary(
    ts: &[u64],
    samples: &[Vec<Vector>],
    cov: &Mat,
    params: DiscrepancyParams,
    seed: u64,
) -> Result<DiscrepancySummary> {
    let gauss = GaussianSpec::centered(cov.clone())?;
    let nd = params.n_directions;
    let mut rows = Vec::new();
    let mut medians = Vec::with_capacity(ts.len());
    let mut draws = Vec::with_capacity(ts.len());
    for (k, (&t, xs)) in ts.iter().zip(samples).enumerate() {
        let grid_seed = derive_seed(seed, &format!("grid-{k}"));
        let values = (0..params.direction_batches)
            .map(|b| halfspace_discrepancy(xs, &gauss, nd, batch_seed(grid_seed, b)).map(|e| e.value))
            .collect::<Result<Vec<_>>>()?;
        let first = batch_seed(grid_seed, 0);
        let boot = bootstrap_draws(
            xs,
            |r: &[Vector]| halfspace_discrepancy(r, &gauss, nd, first).map_or(f64::NAN, |e| e.value),
            params.n_boot,
            derive_seed(grid_seed, "bootstrap"),
        );
        let value = median(&values);
        // The bootstrap resamples the first direction set; shift it onto the median.
        let shifted: Vec<f64> = boot.iter().map(|b| b + value - values[0]).collect();
        let (ci_lo, ci_hi) = unit_ci(value, &shifted);
        rows.push(DiscrepancyRow {
            t,
            estimator_kind: EstimatorKind::Halfspace,
            value,
            ci_lo,
            ci_hi,
        });
        medians.push(value);
        draws.push(boot);
        if params.sliced {
            let sliced_seed = derive_seed(grid_seed, "sliced");
            let value = sliced_wasserstein(xs, &gauss, nd, sliced_seed)?;
            let boot = bootstrap_draws(
                xs,
                |r: &[Vector]| sliced_wasserstein(r, &gauss, nd, sliced_seed).unwrap_or(f64::NAN),
                (params.n_boot / 4).max(20),
                derive_seed(grid_seed, "sliced-bootstrap"),
            );
            let (ci_lo, ci_hi) = bias_corrected_ci(value, &boot).map_or((f64::NAN, f64::NAN), |(lo, hi)| (lo.max(0.0), hi));
            rows.push(DiscrepancyRow {
                t,
                estimator_kind: EstimatorKind::Sliced,
                value,
                ci_lo,
                ci_hi,
            });
        }
    }
    let tsf: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
    let fit = fit_rate_with_draws(&tsf, &medians, &draws)?;
    Ok(DiscrepancySummary { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::ChainModel;

    fn two_state() -> MrpModel {
        let chain = ChainModel::stationary_start(Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
        let phi = Mat::from_row_slice(2, 2, &[std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, 1.0]);
        MrpModel::new(chain, phi, Vector::from_vec(vec![0.0, 1.0]), 0.35).unwrap()
    }

    #[test]
    fn sweep_layout_and_determinism() {
        let mrp = two_state();
        let a = simulate_td(&mrp, mrp.max_eta0(), 0.75, &[10, 100, 1000], 8, 3).unwrap();
        let b = simulate_td(&mrp, mrp.max_eta0(), 0.75, &[10, 100, 1000], 8, 3).unwrap();
        assert_eq!(a.errors, b.errors);
        assert_eq!(a.errors.len(), 3);
        assert_eq!(a.replications(), 8);
        let z = &a.scaled[2][0];
        assert!((z.norm() / 1000f64.sqrt() - a.errors[2][0]).abs() < 1e-12);
    }

    #[test]
    fn coverage_of_exact_gaussian_samples_is_nominal() {
        // Feed the coverage table draws from N(0, Λ) itself.
        let lam = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GaussianSpec::centered(lam.clone()).unwrap();
        let mut rng = crate::rng::stream_rng(9, 0);
        let samples = g.sample(4000, &mut rng);
        let sweep = TdSweep {
            t_grid: vec![1],
            eta0: 1.0,
            alpha: 0.75,
            seed: 0,
            errors: vec![samples.iter().map(|z| z.norm()).collect()],
            scaled: vec![samples],
        };
        let rows = coverage_table(&sweep, &lam, &[0.8, 0.9, 0.95], 10.0).unwrap();
        for r in &rows {
            assert!(r.ci_lo <= r.nominal && r.nominal <= r.ci_hi, "{r:?}");
            assert!(r.below_threshold);
        }
    }

    #[test]
    fn degenerate_gamma_is_rejected() {
        let chain = ChainModel::stationary_start(Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
        // Tabular features with γ = 0 make the TD noise vanish identically.
        let mrp = MrpModel::new(chain, Mat::identity(2, 2), Vector::from_vec(vec![0.2, 0.7]), 0.0).unwrap();
        assert!(matches!(
            limiting_covariance(&mrp),
            Err(Error::DegenerateGamma { .. })
        ));
    }

    #[test]
    fn rate_summary_reports_reference_scale() {
        let mrp = two_state();
        let (_, lam) = limiting_covariance(&mrp).unwrap();
        let sweep = simulate_td(&mrp, mrp.max_eta0(), 0.75, &[100, 300, 1000, 3000], 100, 1).unwrap();
        let s = rate_summary(&sweep, &lam, 50).unwrap();
        assert_eq!(s.rows.len(), 4);
        let (lo, hi) = s.fit.slope_ci.unwrap();
        assert!(lo <= s.fit.slope && s.fit.slope <= hi);
        assert!((s.rows[0].reference - (lam.trace() / 100.0).sqrt()).abs() < 1e-15);
    }
}
