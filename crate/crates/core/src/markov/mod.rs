//! Finite-state Markov chains: stationary law, spectral expansion, mixing
//! constants, and seeded trajectory sampling.
//!
//! All analytics are exact up to floating point: the stationary law comes from
//! a direct null-space solve, the spectral expansion from an SVD of the
//! similarity-transformed deflated kernel, and mixing curves from matrix
//! powering.

mod sample;
pub mod structure;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{op_norm, Mat, Vector};

pub use sample::{TransitionSampler, Trajectory};

/// Row sums must match 1 to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Residual tolerance for `μP = μ`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// TV values below this are treated as numerical noise when fitting `(m, ρ)`.
pub const TV_NOISE_FLOOR: f64 = 1e-12;
pub const DEFAULT_MIXING_HORIZON: usize = 10_000;
pub const DEFAULT_TMIX_CAP: usize = 100_000;
/// `(m, ρ)` returned for chains that are exactly mixed after one step.
pub const INSTANT_MIXING_SENTINEL: MixingConstants = MixingConstants { m: 1e-12, rho: 0.5 };

/// Exponent `p ∈ (1, ∞]` of the `L_p(μ)` norm of `dν/dμ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityExponent {
    Finite(f64),
    Infinite,
}

impl DensityExponent {
    /// Hölder conjugate `q` with `1/p + 1/q = 1` (`q = 1` for `p = ∞`).
    pub fn conjugate(self) -> f64 {
        match self {
            DensityExponent::Finite(p) => p / (p - 1.0),
            DensityExponent::Infinite => 1.0,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            DensityExponent::Finite(p) if !(p > 1.0 && p.is_finite()) => Err(Error::InvalidInput(
                format!("density exponent p must lie in (1, inf], got {p}"),
            )),
            other => Ok(other),
        }
    }
}

impl Default for DensityExponent {
    fn default() -> Self {
        DensityExponent::Infinite
    }
}

impl Serialize for DensityExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DensityExponent::Finite(p) => s.serialize_f64(*p),
            DensityExponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for DensityExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(DensityExponent::Finite(p)),
            Raw::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => {
                Ok(DensityExponent::Infinite)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad density exponent {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConstants {
    pub m: f64,
    pub rho: f64,
}

impl MixingConstants {
    /// Upper bound on `t_mix(ε)` implied by `sup_s d_TV(P^t(·|s), μ) ≤ m ρ^t`.
    pub fn tmix_bound(&self, eps: f64) -> usize {
        let raw = (self.m / eps).ln() / (1.0 / self.rho).ln();
        // The assumption is stated for t ≥ 1.
        raw.ceil().max(1.0) as usize
    }
}

pub fn validate_kernel(kernel: &Mat) -> Result<()> {
    let n = kernel.nrows();
    if n == 0 || kernel.ncols() != n {
        return Err(Error::InvalidKernel(format!(
            "kernel must be square and non-empty, got {}x{}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    for i in 0..n {
        let row = kernel.row(i);
        if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidKernel(format!("entry {bad} in row {i} outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidKernel(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

fn validate_distribution(v: &Vector, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidInput(format!("{what} has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput(format!("{what} has negative or NaN entries")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("{what} sums to {sum}")));
    }
    Ok(())
}

fn stationary_residual(kernel: &Mat, mu: &Vector) -> f64 {
    (kernel.transpose() * mu - mu).amax()
}

/// Unique stationary distribution of an irreducible aperiodic kernel.
///
/// Solves `(Pᵀ - I) μ = 0` with the last equation replaced by `Σ μ = 1`, then
/// falls back to power iteration if the direct solve misses the tolerance.
pub fn stationary_distribution(kernel: &Mat) -> Result<Vector> {
    validate_kernel(kernel)?;
    structure::check_ergodic(kernel)?;
    let n = kernel.nrows();
    let mut system = kernel.transpose() - Mat::identity(n, n);
    let mut rhs = Vector::zeros(n);
    system.row_mut(n - 1).fill(1.0);
    rhs[n - 1] = 1.0;

    let direct = system.lu().solve(&rhs).map(|mut mu| {
        mu.iter_mut().for_each(|x| *x = x.max(0.0));
        let s = mu.sum();
        mu / s
    });
    if let Some(mu) = direct {
        if stationary_residual(kernel, &mu) <= STATIONARY_TOL * 1e-2 && mu.iter().all(|&x| x > 0.0) {
            return Ok(mu);
        }
    }

    let mut mu = Vector::from_element(n, 1.0 / n as f64);
    let pt = kernel.transpose();
    let mut residual = f64::INFINITY;
    for _ in 0..100_000 {
        let next = &pt * &mu;
        residual = (&next - &mu).amax();
        mu = next;
        if residual <= 1e-14 {
            break;
        }
    }
    let residual = residual.max(stationary_residual(kernel, &mu));
    if residual > STATIONARY_TOL || mu.iter().any(|&x| x <= 0.0) {
        return Err(Error::NoConvergence { residual });
    }
    Ok(&mu / mu.sum())
}

/// `‖D^{1/2} (P − 𝟙μᵀ) D^{-1/2}‖₂` with `D = diag(μ)`.
pub fn spectral_expansion_unchecked(kernel: &Mat, stationary: &Vector) -> f64 {
    let n = kernel.nrows();
    let sqrt_mu: Vec<f64> = stationary.iter().map(|x| x.sqrt()).collect();
    let deflated = Mat::from_fn(n, n, |i, j| {
        (kernel[(i, j)] - stationary[j]) * sqrt_mu[i] / sqrt_mu[j]
    });
    op_norm(&deflated)
}

pub fn spectral_expansion(kernel: &Mat, stationary: &Vector) -> Result<f64> {
    let lambda = spectral_expansion_unchecked(kernel, stationary);
    if lambda >= 1.0 - 1e-12 {
        return Err(Error::SpectralGapViolation { lambda });
    }
    Ok(lambda)
}

/// Time reversal `P*(x, y) = μ(y) P(y, x) / μ(x)`.
pub fn adjoint_kernel(kernel: &Mat, stationary: &Vector) -> Mat {
    let n = kernel.nrows();
    Mat::from_fn(n, n, |x, y| stationary[y] * kernel[(y, x)] / stationary[x])
}

/// `max_s d_TV(P^t(·|s), μ)` for a single power.
pub fn worst_tv(power: &Mat, stationary: &Vector) -> f64 {
    (0..power.nrows())
        .map(|s| {
            0.5 * power
                .row(s)
                .iter()
                .zip(stationary.iter())
                .map(|(p, m)| (p - m).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Worst-case TV curve for `t = 1..=horizon`, stopping early once below the noise floor.
pub fn tv_curve(kernel: &Mat, stationary: &Vector, horizon: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut power = kernel.clone();
    for t in 1..=horizon {
        let tv = worst_tv(&power, stationary);
        out.push(tv);
        if tv <= TV_NOISE_FLOOR || t == horizon {
            break;
        }
        power = &power * kernel;
    }
    out
}

/// Fit `(m, ρ)` so that `m ρ^t` dominates the measured TV curve on `t ≤ horizon`.
pub fn mixing_constants(kernel: &Mat, stationary: &Vector, horizon: usize) -> Result<MixingConstants> {
    let curve = tv_curve(kernel, stationary, horizon.max(1));
    if curve[0] <= 1e-14 {
        return Ok(INSTANT_MIXING_SENTINEL);
    }
    let usable: Vec<(usize, f64)> = curve
        .iter()
        .enumerate()
        .map(|(i, &tv)| (i + 1, tv))
        .filter(|&(_, tv)| tv > TV_NOISE_FLOOR)
        .collect();
    let rho = usable
        .iter()
        .map(|&(t, tv)| tv.powf(1.0 / t as f64))
        .fold(0.0, f64::max);
    if rho >= 1.0 - 1e-12 {
        return Err(Error::SpectralGapViolation { lambda: rho });
    }
    let m = usable
        .iter()
        .map(|&(t, tv)| tv / rho.powi(t as i32))
        .fold(0.0, f64::max);
    Ok(MixingConstants { m, rho })
}

/// Smallest `t ≥ 1` with worst-case TV at most `eps`, by exact powering.
pub fn mixing_time(kernel: &Mat, stationary: &Vector, eps: f64, cap: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("mixing-time epsilon must lie in (0,1), got {eps}")));
    }
    let mut power = kernel.clone();
    for t in 1..=cap {
        if worst_tv(&power, stationary) <= eps {
            return Ok(t);
        }
        power = &power * kernel;
    }
    Err(Error::HorizonExceeded { cap })
}

/// `‖dν/dμ‖_{μ,p}`.
pub fn density_norm(initial: &Vector, stationary: &Vector, p: DensityExponent) -> Result<f64> {
    for (s, (&nu, &mu)) in initial.iter().zip(stationary.iter()).enumerate() {
        if mu <= 0.0 && nu > 0.0 {
            return Err(Error::AbsoluteContinuityViolation { state: s });
        }
    }
    let ratios = initial
        .iter()
        .zip(stationary.iter())
        .filter(|(_, &mu)| mu > 0.0)
        .map(|(&nu, &mu)| (nu / mu, mu));
    Ok(match p {
        DensityExponent::Infinite => ratios.map(|(r, _)| r).fold(0.0, f64::max),
        DensityExponent::Finite(p) => ratios.map(|(r, mu)| mu * r.powf(p)).sum::<f64>().powf(1.0 / p),
    })
}

/// Validated finite chain with its derived analytics. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ChainModel {
    kernel: Mat,
    stationary: Vector,
    spectral_expansion: f64,
    mixing: MixingConstants,
    initial: Vector,
    density_p: DensityExponent,
    density_norm: f64,
    sampler: TransitionSampler,
}

impl ChainModel {
    pub fn new(kernel: Mat, initial: Vector, density_p: DensityExponent) -> Result<Self> {
        validate_kernel(&kernel)?;
        let n = kernel.nrows();
        validate_distribution(&initial, n, "initial distribution")?;
        let density_p = density_p.validate()?;
        let stationary = stationary_distribution(&kernel)?;
        let spectral_expansion = spectral_expansion(&kernel, &stationary)?;
        let mixing = mixing_constants(&kernel, &stationary, DEFAULT_MIXING_HORIZON)?;
        let density_norm = density_norm(&initial, &stationary, density_p)?;
        let sampler = TransitionSampler::new(&kernel, &initial);
        Ok(Self {
            kernel,
            stationary,
            spectral_expansion,
            mixing,
            initial,
            density_p,
            density_norm,
            sampler,
        })
    }

    /// Chain started from its stationary law.
    pub fn stationary_start(kernel: Mat) -> Result<Self> {
        let mu = stationary_distribution(&kernel)?;
        Self::new(kernel, mu, DensityExponent::Infinite)
    }

    /// Replace the fitted mixing constants; rejected unless they dominate the TV curve.
    pub fn with_mixing(mut self, mixing: MixingConstants) -> Result<Self> {
        if !(mixing.m > 0.0 && mixing.rho > 0.0 && mixing.rho < 1.0) {
            return Err(Error::InvalidInput(format!("invalid mixing constants {mixing:?}")));
        }
        let curve = tv_curve(&self.kernel, &self.stationary, DEFAULT_MIXING_HORIZON);
        for (i, tv) in curve.iter().enumerate() {
            let t = i as i32 + 1;
            if *tv > TV_NOISE_FLOOR && *tv > mixing.m * mixing.rho.powi(t) * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "mixing constants {mixing:?} do not dominate TV {tv} at t = {t}"
                )));
            }
        }
        self.mixing = mixing;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &Mat {
        &self.kernel
    }

    pub fn stationary(&self) -> &Vector {
        &self.stationary
    }

    pub fn spectral_expansion(&self) -> f64 {
        self.spectral_expansion
    }

    pub fn mixing(&self) -> MixingConstants {
        self.mixing
    }

    pub fn initial(&self) -> &Vector {
        &self.initial
    }

    pub fn density_exponent(&self) -> DensityExponent {
        self.density_p
    }

    /// `q`, the conjugate of the density exponent.
    pub fn q(&self) -> f64 {
        self.density_p.conjugate()
    }

    pub fn density_norm(&self) -> f64 {
        self.density_norm
    }

    pub fn sampler(&self) -> &TransitionSampler {
        &self.sampler
    }

    pub fn mixing_time(&self, eps: f64) -> Result<usize> {
        mixing_time(&self.kernel, &self.stationary, eps, DEFAULT_TMIX_CAP)
    }

    pub fn adjoint(&self) -> Mat {
        adjoint_kernel(&self.kernel, &self.stationary)
    }

    pub fn sample_trajectory(&self, length: usize, seed: u64, stream_id: u64) -> Trajectory {
        self.sampler.trajectory(length, seed, stream_id)
    }

    /// Apply the transition operator `𝒫` to a per-state function (rows = states).
    pub fn apply(&self, g: &Mat) -> Mat {
        &self.kernel * g
    }
}
