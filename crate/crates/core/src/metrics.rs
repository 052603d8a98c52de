//! Distances between sample clouds and Gaussians, and log-log rate fitting.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{is_psd, sym_inv_sqrt, sym_sqrt, symmetrize, Mat, Vector};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{quantile_sorted, sorted};

pub const MIN_SAMPLES: usize = 100;
/// Number of projected-quantile thresholds per direction.
pub const THRESHOLD_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vector,
    pub cov: Mat,
}

impl GaussianSpec {
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::InvalidInput("mean and covariance dimensions differ".into()));
        }
        if !is_psd(&cov, 1e-10 * cov.amax().max(1.0)) {
            return Err(Error::InvalidInput("covariance must be symmetric PSD".into()));
        }
        Ok(Self { mean, cov: symmetrize(&cov) })
    }

    pub fn centered(cov: Mat) -> Result<Self> {
        Self::new(Vector::zeros(cov.nrows()), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `n` draws using the symmetric square root of the covariance.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vector> {
        let root = sym_sqrt(&self.cov);
        let d = self.dim();
        (0..n)
            .map(|_| {
                let z = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + &root * z
            })
            .collect()
    }

    /// Mean and standard deviation of `uᵀX`.
    pub fn project(&self, u: &Vector) -> (f64, f64) {
        (u.dot(&self.mean), (u.dot(&(&self.cov * u))).max(0.0).sqrt())
    }
}

/// `(min(1, Δ/100), 1.5 Δ)` with `Δ = ‖Σ₁^{-1/2} Σ₂ Σ₁^{-1/2} − I‖_F`.
pub fn gaussian_tv_bounds(cov1: &Mat, cov2: &Mat) -> Result<(f64, f64)> {
    let scale = cov1.amax().max(f64::MIN_POSITIVE);
    let w = sym_inv_sqrt(cov1, 1e-14 * scale).ok_or(Error::SingularCovariance)?;
    let d = cov1.nrows();
    let delta = (&w * cov2 * &w - Mat::identity(d, d)).norm();
    Ok(((delta / 100.0).min(1.0), 1.5 * delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Halfspace,
    Ball,
    Wasserstein1d,
    Sliced,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Halfspace => "halfspace",
            Self::Ball => "ball",
            Self::Wasserstein1d => "wasserstein1d",
            Self::Sliced => "sliced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEstimate {
    pub value: f64,
    pub estimator_kind: EstimatorKind,
    pub n_samples: usize,
    pub n_directions: usize,
    pub seed: u64,
}

/// Uniform direction on the sphere from stream `k` of `seed`.
fn direction(d: usize, seed: u64, k: u64) -> Vector {
    let mut rng = stream_rng(seed, k);
    loop {
        let u = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 1e-12 {
            return u / norm;
        }
    }
}

fn check_samples(samples: &[Vector], d: usize) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidInput("sample dimension does not match the Gaussian".into()));
    }
    Ok(())
}

/// Largest `|F̂(t) − Φ(t)|` over the threshold grid on one direction, checking
/// both `F̂(t) = P̂(Y ≤ t)` and `F̂(t−) = P̂(Y < t)`.
fn projected_ks(sorted_proj: &[f64], mean: f64, sd: f64) -> f64 {
    let n = sorted_proj.len() as f64;
    let spread = sorted_proj[sorted_proj.len() - 1] - sorted_proj[0];
    let normal = (sd > 1e-12 * (spread.abs() + mean.abs() + 1.0)).then(|| Normal::new(mean, sd).unwrap());
    let mut best = 0.0f64;
    for j in 0..THRESHOLD_GRID {
        let t = quantile_sorted(sorted_proj, (j as f64 + 0.5) / THRESHOLD_GRID as f64);
        let le = sorted_proj.partition_point(|&y| y <= t) as f64 / n;
        let lt = sorted_proj.partition_point(|&y| y < t) as f64 / n;
        let (phi, phi_minus) = match &normal {
            Some(nd) => {
                let p = nd.cdf(t);
                (p, p)
            }
            // Point mass at the projected mean.
            None => (if t >= mean { 1.0 } else { 0.0 }, if t > mean { 1.0 } else { 0.0 }),
        };
        best = best.max((le - phi).abs()).max((lt - phi_minus).abs());
    }
    best
}

/// Max over random unit directions of the projected CDF discrepancy: a lower
/// bound on the convex distance, since half-spaces are convex.
pub fn halfspace_discrepancy(
    samples: &[Vector],
    gaussian: &GaussianSpec,
    n_directions: usize,
    seed: u64,
) -> Result<DiscrepancyEstimate> {
    let d = gaussian.dim();
    check_samples(samples, d)?;
    let value = (0..n_directions as u64)
        .into_par_iter()
        .map(|k| {
            let u = direction(d, seed, k);
            let proj: Vec<f64> = samples.iter().map(|x| u.dot(x)).collect();
            let (m, sd) = gaussian.project(&u);
            projected_ks(&sorted(&proj), m, sd)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DiscrepancyEstimate {
        value: value.clamp(0.0, 1.0),
        estimator_kind: EstimatorKind::Halfspace,
        n_samples: samples.len(),
        n_directions,
        seed,
    })
}

/// Exact empirical `W₁` between two samples: `∫₀¹ |F_a⁻¹(u) − F_b⁻¹(u)| du`.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let a = sorted(a);
    let b = sorted(b);
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i + 1) as f64 / na;
        let next_b = (j + 1) as f64 / nb;
        let next = next_a.min(next_b);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total
}

/// Mean over random directions of `W₁` between projected samples and an equal
/// number of fresh draws from the projected Gaussian.
pub fn sliced_wasserstein(samples: &[Vector], gaussian: &GaussianSpec, n_directions: usize, seed: u64) -> Result<f64> {
    let d = gaussian.dim();
    check_samples(samples, d)?;
    if n_directions == 0 {
        return Err(Error::InvalidInput("n_directions must be positive".into()));
    }
    let gauss_seed = derive_seed(seed, "sliced-gaussian");
    let per_direction: Vec<f64> = (0..n_directions as u64)
        .into_par_iter()
        .map(|k| {
            let u = direction(d, seed, k);
            let proj: Vec<f64> = samples.iter().map(|x| u.dot(x)).collect();
            let (m, sd) = gaussian.project(&u);
            let mut rng = stream_rng(gauss_seed, k);
            let reference: Vec<f64> =
                (0..samples.len()).map(|_| m + sd * rng.sample::<f64, _>(StandardNormal)).collect();
            wasserstein_1d(&proj, &reference)
        })
        .collect();
    Ok(per_direction.iter().sum::<f64>() / n_directions as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub grid: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: Option<(f64, f64)>,
}

fn check_grid(ts: &[f64]) -> Result<()> {
    if ts.len() < 4 {
        return Err(Error::DegenerateGrid(format!("need at least 4 grid points, got {}", ts.len())));
    }
    if !ts.windows(2).all(|w| w[0] < w[1]) || ts[0] <= 0.0 {
        return Err(Error::DegenerateGrid("grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn log_log_fit(ts: &[f64], stats: &[f64]) -> Result<(f64, f64)> {
    if stats.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateGrid("statistics must be positive".into()));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Least-squares fit of `log stat = intercept + slope · log T`.
pub fn fit_rate(grid: &[(f64, f64)]) -> Result<RateFit> {
    let ts: Vec<f64> = grid.iter().map(|g| g.0).collect();
    check_grid(&ts)?;
    let stats: Vec<f64> = grid.iter().map(|g| g.1).collect();
    let (slope, intercept) = log_log_fit(&ts, &stats)?;
    Ok(RateFit {
        grid: grid.to_vec(),
        slope,
        intercept,
        slope_ci: None,
    })
}

/// `n_boot` values of `statistic` on resamples (with replacement) of `replications`;
/// draw `b` uses stream `b` of `seed`.
pub fn bootstrap_draws<T: Clone + Sync>(
    replications: &[T],
    statistic: impl Fn(&[T]) -> f64 + Sync,
    n_boot: usize,
    seed: u64,
) -> Vec<f64> {
    let n = replications.len();
    (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let resample: Vec<T> = (0..n).map(|_| replications[rng.random_range(0..n)].clone()).collect();
            statistic(&resample)
        })
        .collect()
}

/// 95% percentile interval of bootstrap draws, ignoring non-finite values.
pub fn percentile_ci(draws: &[f64]) -> Option<(f64, f64)> {
    let finite: Vec<f64> = draws.iter().copied().filter(|s| s.is_finite()).collect();
    (!finite.is_empty()).then(|| {
        let s = sorted(&finite);
        (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975))
    })
}

/// Percentile interval shifted by the bootstrap bias `mean(draws) − θ̂`. Resampling
/// inflates distance statistics, so the raw percentile interval sits too high.
pub fn bias_corrected_ci(point: f64, draws: &[f64]) -> Option<(f64, f64)> {
    let finite: Vec<f64> = draws.iter().copied().filter(|s| s.is_finite()).collect();
    let bias = finite.iter().sum::<f64>() / finite.len().max(1) as f64 - point;
    percentile_ci(&finite).map(|(lo, hi)| (lo - bias, hi - bias))
}

/// Log-log fit of `point` against `ts`; the slope CI refits each column of
/// `draws` (one bootstrap vector per grid point, equal lengths).
pub fn fit_rate_with_draws(ts: &[f64], point: &[f64], draws: &[Vec<f64>]) -> Result<RateFit> {
    check_grid(ts)?;
    if point.len() != ts.len() || draws.len() != ts.len() {
        return Err(Error::DegenerateGrid("one statistic and one draw set per grid point required".into()));
    }
    let (slope, intercept) = log_log_fit(ts, point)?;
    let n_boot = draws.iter().map(Vec::len).min().unwrap_or(0);
    let slopes: Vec<f64> = (0..n_boot)
        .map(|b| {
            let stats: Vec<f64> = draws.iter().map(|d| d[b]).collect();
            log_log_fit(ts, &stats).map(|f| f.0).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(RateFit {
        grid: ts.iter().copied().zip(point.iter().copied()).collect(),
        slope,
        intercept,
        slope_ci: percentile_ci(&slopes),
    })
}

/// Fit `statistic(replications at T)` against `T`, with a 95% percentile CI for
/// the slope from resampling replications within each `T`.
pub fn fit_rate_bootstrap<T: Clone + Sync>(
    ts: &[f64],
    replications: &[Vec<T>],
    statistic: impl Fn(&[T]) -> f64 + Sync,
    n_boot: usize,
    seed: u64,
) -> Result<RateFit> {
    check_grid(ts)?;
    if replications.len() != ts.len() || replications.iter().any(|r| r.is_empty()) {
        return Err(Error::DegenerateGrid("one nonempty replication set per grid point required".into()));
    }
    let point: Vec<f64> = replications.iter().map(|r| statistic(r)).collect();
    let draws: Vec<Vec<f64>> = replications
        .iter()
        .enumerate()
        .map(|(k, r)| bootstrap_draws(r, &statistic, n_boot, derive_seed(seed, &format!("grid-{k}"))))
        .collect();
    fit_rate_with_draws(ts, &point, &draws)
}
