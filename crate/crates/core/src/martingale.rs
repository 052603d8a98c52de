//! Martingales induced by a Markov chain through the Poisson equation, the
//! closed-form Bernstein and matrix Hoeffding bounds, Monte Carlo tail checks,
//! and the Rademacher completion to a deterministic quadratic variation.

use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::fundamental_solve;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, psd_le, sym_op_norm, sym_pinv_sqrt, symmetrize, Mat, Vector};
use crate::markov::{ChainModel, TransitionSampler};
use crate::rng::{stream_rng, StreamRng};
use crate::stats::{quantile_sorted, sorted, wilson_interval, Z95};

const CENTERING_TOL: f64 = 1e-12;
pub const MIN_REPLICATIONS: usize = 100;

/// Homogeneous martingale `f(s, s') = U(s') − 𝒫U(s)` built from a per-state
/// function `g` by solving `g = U − 𝒫U`.
#[derive(Debug, Clone)]
pub struct MartingaleSpec {
    n_states: usize,
    dim: usize,
    g: Mat,
    u: Mat,
    pu: Mat,
    support: Vec<bool>,
    cond_cov: Vec<Mat>,
    sigma_n: Mat,
    f_bound: f64,
    m_bound: f64,
}

impl MartingaleSpec {
    /// `g` has one row per state. It is centered under `μ` when needed.
    pub fn build(chain: &ChainModel, g: Mat) -> Result<Self> {
        let n = chain.n_states();
        if g.nrows() != n || g.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "g must be {n} x d with d >= 1, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let mu = chain.stationary();
        let kernel = chain.kernel();
        let mean = g.transpose() * mu;
        let g = if mean.amax() > CENTERING_TOL {
            log::warn!("g is not centered under the stationary law (|μ(g)| = {:.3e}); centering", mean.amax());
            Mat::from_fn(n, g.ncols(), |s, k| g[(s, k)] - mean[k])
        } else {
            g
        };
        let d = g.ncols();
        let u = fundamental_solve(kernel, mu, &g)?;
        let pu = kernel * &u;

        let mut support = vec![false; n * n];
        let mut cond_cov = Vec::with_capacity(n);
        let mut sigma_n = Mat::zeros(d, d);
        let mut f_bound = 0.0f64;
        for s in 0..n {
            let mut v = Mat::zeros(d, d);
            for s2 in 0..n {
                let p = kernel[(s, s2)];
                if p > 0.0 {
                    support[s * n + s2] = true;
                    let f = (u.row(s2) - pu.row(s)).transpose();
                    f_bound = f_bound.max(f.norm());
                    v += p * &f * f.transpose();
                }
            }
            let v = symmetrize(&v);
            sigma_n += mu[s] * &v;
            cond_cov.push(v);
        }
        let sigma_n = symmetrize(&sigma_n);
        let whiten = sym_pinv_sqrt(&sigma_n, 1e-12);
        let mut m_bound = 0.0f64;
        for s in 0..n {
            for s2 in 0..n {
                if support[s * n + s2] {
                    let f = (u.row(s2) - pu.row(s)).transpose();
                    m_bound = m_bound.max((&whiten * f).norm());
                }
            }
        }
        Ok(Self {
            n_states: n,
            dim: d,
            g,
            u,
            pu,
            support,
            cond_cov,
            sigma_n,
            f_bound,
            m_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    /// Poisson solution, one row per state.
    pub fn u(&self) -> &Mat {
        &self.u
    }

    /// `𝒫U`, one row per state.
    pub fn pu(&self) -> &Mat {
        &self.pu
    }

    pub fn sigma_n(&self) -> &Mat {
        &self.sigma_n
    }

    /// `F = max ‖f(s, s')‖₂` over transitions with `P(s, s') > 0`.
    pub fn f_bound(&self) -> f64 {
        self.f_bound
    }

    /// `M = max ‖Σ_n^{-1/2} f(s, s')‖₂` over the same transitions.
    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn is_transition(&self, s: usize, s_next: usize) -> bool {
        self.support[s * self.n_states + s_next]
    }

    pub fn f(&self, s: usize, s_next: usize) -> Vector {
        (self.u.row(s_next) - self.pu.row(s)).transpose()
    }

    /// `V(s) = E[f fᵀ | s_{k−1} = s]`.
    pub fn conditional_covariance(&self, s: usize) -> &Mat {
        &self.cond_cov[s]
    }

    /// `max |g − (U − 𝒫U)|`.
    pub fn poisson_residual(&self) -> f64 {
        (&self.g - (&self.u - &self.pu)).amax()
    }

    /// `max_s ‖Σ_{s'} P(s, s') f(s, s')‖∞`.
    pub fn conditional_mean_residual(&self, chain: &ChainModel) -> f64 {
        let kernel = chain.kernel();
        (0..self.n_states)
            .map(|s| {
                let mut acc = Vector::zeros(self.dim);
                for s2 in 0..self.n_states {
                    acc += kernel[(s, s2)] * self.f(s, s2);
                }
                acc.amax()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_{i=1}^{n} f(s_{i−1}, s_i)` along a path `s_0..s_n`.
    pub fn path_sum(&self, states: &[usize]) -> Vector {
        let mut acc = Vector::zeros(self.dim);
        for w in states.windows(2) {
            acc += self.f(w[0], w[1]);
        }
        acc
    }

    /// Max-abs residual of `Σ g(s_i) = Σ f(s_{i−1}, s_i) + 𝒫U(s_0) − 𝒫U(s_n)` on a path.
    pub fn telescoping_residual(&self, states: &[usize]) -> f64 {
        let mut lhs = Vector::zeros(self.dim);
        for &s in &states[1..] {
            lhs += self.g.row(s).transpose();
        }
        let first = states[0];
        let last = *states.last().unwrap();
        let rhs = self.path_sum(states) + self.pu.row(first).transpose() - self.pu.row(last).transpose();
        (lhs - rhs).amax()
    }

    /// Flat `f` table indexed by `(s · n + s') · d + k`.
    fn f_table(&self) -> Vec<f64> {
        let n = self.n_states;
        let mut out = Vec::with_capacity(n * n * self.dim);
        for s in 0..n {
            for s2 in 0..n {
                out.extend(self.f(s, s2).iter());
            }
        }
        out
    }

    /// Sum of `f` over `n` transitions given transition counts.
    fn sum_from_counts(&self, table: &[f64], counts: &[u64]) -> Vector {
        let d = self.dim;
        let mut acc = Vector::zeros(d);
        for (idx, &c) in counts.iter().enumerate() {
            if c > 0 {
                for k in 0..d {
                    acc[k] += c as f64 * table[idx * d + k];
                }
            }
        }
        acc
    }
}

/// Transition counts `#{i ≤ n : (s_{i−1}, s_i) = (s, s')}` for a fresh path from `ν`.
pub fn transition_counts(sampler: &TransitionSampler, n_states: usize, n: usize, rng: &mut StreamRng) -> Vec<u64> {
    let mut counts = vec![0u64; n_states * n_states];
    let mut s = sampler.initial_state(rng);
    for _ in 0..n {
        let next = sampler.step(s, rng);
        counts[s * n_states + next] += 1;
        s = next;
    }
    counts
}

/// Visit counts of `s_1..s_n` with `s_1 ∼ ν`.
pub fn visit_counts(sampler: &TransitionSampler, n_states: usize, n: usize, rng: &mut StreamRng) -> Vec<u64> {
    let mut counts = vec![0u64; n_states];
    if n == 0 {
        return counts;
    }
    let mut s = sampler.initial_state(rng);
    counts[s] += 1;
    for _ in 1..n {
        s = sampler.step(s, rng);
        counts[s] += 1;
    }
    counts
}

/// Per-term right-hand side of the Bernstein inequality with unit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinTerms {
    pub variance: f64,
    pub mixing: f64,
    pub tail: f64,
    pub total: f64,
}

/// `sqrt(Tr Σ_n / n · log(1/δ)) + √q F / ((1−λ)^{1/4} n^{3/4}) · log^{3/4}(‖dν/dμ‖/δ) + F/n · log(1/δ)`.
pub fn bernstein_bound(spec: &MartingaleSpec, chain: &ChainModel, n: usize, delta: f64) -> Result<BernsteinTerms> {
    bernstein_terms(
        spec.sigma_n().trace(),
        spec.f_bound(),
        chain.q(),
        chain.spectral_expansion(),
        chain.density_norm(),
        n,
        delta,
    )
}

pub fn bernstein_terms(
    trace_sigma: f64,
    f_bound: f64,
    q: f64,
    lambda: f64,
    density_norm: f64,
    n: usize,
    delta: f64,
) -> Result<BernsteinTerms> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let n = n as f64;
    let log_inv = (1.0 / delta).ln();
    let variance = (trace_sigma / n * log_inv).sqrt();
    let mixing =
        q.sqrt() * f_bound / ((1.0 - lambda).powf(0.25) * n.powf(0.75)) * (density_norm / delta).ln().max(0.0).powf(0.75);
    let tail = f_bound / n * log_inv;
    Ok(BernsteinTerms {
        variance,
        mixing,
        tail,
        total: variance + mixing + tail,
    })
}

/// `2 d^{2−π/4} ‖dν/dμ‖ exp(−(1−λ)/(20q) (π/4)² n² ε² / Σ M_k²)`.
pub fn hoeffding_matrix_bound(chain: &ChainModel, d: usize, m_list: &[f64], eps: f64) -> f64 {
    hoeffding_bound_value(
        d,
        chain.density_norm(),
        chain.spectral_expansion(),
        chain.q(),
        m_list.len(),
        m_list.iter().map(|m| m * m).sum(),
        eps,
    )
}

pub fn hoeffding_bound_value(d: usize, density_norm: f64, lambda: f64, q: f64, n: usize, sum_m_sq: f64, eps: f64) -> f64 {
    let n = n as f64;
    let prefactor = 2.0 * (d as f64).powf(2.0 - FRAC_PI_4) * density_norm;
    if eps == 0.0 {
        return prefactor;
    }
    let exponent = (1.0 - lambda) / (20.0 * q) * FRAC_PI_4 * FRAC_PI_4 * n * n * eps * eps / sum_m_sq;
    prefactor * (-exponent).exp()
}

/// Berry-Esseen right-hand side with unit constants, for display only.
pub fn berry_esseen_rhs(spec: &MartingaleSpec, chain: &ChainModel, n: usize) -> f64 {
    let d = spec.dim() as f64;
    let m = spec.m_bound();
    let n = n as f64;
    let lead = m * (chain.q() / (1.0 - chain.spectral_expansion())).powf(0.25) * d.powf(0.75)
        * (d * chain.density_norm()).ln().max(0.0).powf(0.25);
    let second = m.sqrt() * d.powf(0.625) * d.ln().max(0.0).sqrt();
    (lead + second) * n.ln() / n.powf(0.25)
}

/// Symmetric matrix-valued function of the state, centered under `μ`.
#[derive(Debug, Clone)]
pub struct MatrixFunction {
    values: Vec<Mat>,
    sup_norm: f64,
}

impl MatrixFunction {
    pub fn new(values: Vec<Mat>, chain: &ChainModel) -> Result<Self> {
        if values.len() != chain.n_states() || values.is_empty() {
            return Err(Error::InvalidInput("one matrix per state required".into()));
        }
        let d = values[0].nrows();
        let mu = chain.stationary();
        let mut mean = Mat::zeros(d, d);
        for (s, v) in values.iter().enumerate() {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::InvalidInput("matrix function values must be d x d".into()));
            }
            mean += mu[s] * symmetrize(v);
        }
        let values: Vec<Mat> = values.iter().map(|v| symmetrize(v) - &mean).collect();
        let sup_norm = values.iter().map(sym_op_norm).fold(0.0, f64::max);
        Ok(Self { values, sup_norm })
    }

    /// Gaussian symmetric entries, centered, scaled to `sup_s ‖F(s)‖ = 1`.
    pub fn random<R: Rng + ?Sized>(chain: &ChainModel, d: usize, rng: &mut R) -> Result<Self> {
        let values = (0..chain.n_states())
            .map(|_| Mat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let raw = Self::new(values, chain)?;
        let scale = raw.sup_norm;
        if scale == 0.0 {
            return Ok(raw);
        }
        Ok(Self {
            values: raw.values.into_iter().map(|v| v / scale).collect(),
            sup_norm: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn value(&self, s: usize) -> &Mat {
        &self.values[s]
    }

    /// `sup_s ‖F(s)‖`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `‖(1/n) Σ_s count(s) F(s)‖`.
    pub fn average_norm(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let d = self.dim();
        let mut acc = Mat::zeros(d, d);
        for (s, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc += c as f64 * &self.values[s];
            }
        }
        sym_op_norm(&(acc / total as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Dominates,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    /// `δ` for Bernstein, `ε` for Hoeffding.
    pub grid: f64,
    pub closed_form: f64,
    pub empirical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ci_half_width: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub points: Vec<BoundPoint>,
    /// Smallest `c` with `c · RHS(δ)` above the empirical `(1−δ)` quantile at every grid `δ`.
    pub calibration: Option<f64>,
}

impl BoundReport {
    pub fn any_violation(&self) -> bool {
        self.points.iter().any(|p| p.verdict == Verdict::Violated)
    }
}

/// A grid point is violated only when the whole Wilson interval sits above the bound.
fn bound_point(grid: f64, closed_form: f64, exceed: usize, reps: usize) -> BoundPoint {
    let (ci_lo, ci_hi) = wilson_interval(exceed, reps, Z95);
    BoundPoint {
        grid,
        closed_form,
        empirical: exceed as f64 / reps as f64,
        ci_lo,
        ci_hi,
        ci_half_width: 0.5 * (ci_hi - ci_lo),
        verdict: if ci_lo > closed_form { Verdict::Violated } else { Verdict::Dominates },
    }
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_REPLICATIONS} replications required, got {replications}"
        )));
    }
    Ok(())
}

/// `‖(1/n) Σ f(s_{i−1}, s_i)‖₂` for independent replications, ordered by stream id.
pub fn martingale_mean_norms(spec: &MartingaleSpec, chain: &ChainModel, n: usize, replications: usize, seed: u64) -> Vec<f64> {
    martingale_sums(spec, chain, n, replications, seed)
        .into_iter()
        .map(|s| s.norm() / n as f64)
        .collect()
}

/// `Σ_{i=1}^{n} f(s_{i−1}, s_i)` for independent replications, ordered by stream id.
pub fn martingale_sums(spec: &MartingaleSpec, chain: &ChainModel, n: usize, replications: usize, seed: u64) -> Vec<Vector> {
    let table = spec.f_table();
    let ns = chain.n_states();
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let counts = transition_counts(chain.sampler(), ns, n, &mut rng);
            spec.sum_from_counts(&table, &counts)
        })
        .collect()
}

/// Monte Carlo check of the Bernstein bound over a `δ` grid.
pub fn verify_bernstein(
    spec: &MartingaleSpec,
    chain: &ChainModel,
    n: usize,
    deltas: &[f64],
    replications: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_replications(replications)?;
    let norms = martingale_mean_norms(spec, chain, n, replications, seed);
    let sorted_norms = sorted(&norms);
    let mut points = Vec::with_capacity(deltas.len());
    let mut calibration = 0.0f64;
    for &delta in deltas {
        let rhs = bernstein_bound(spec, chain, n, delta)?.total;
        let exceed = norms.iter().filter(|&&x| x > rhs).count();
        points.push(bound_point(delta, delta, exceed, replications));
        let q = quantile_sorted(&sorted_norms, 1.0 - delta);
        let c = if rhs > 0.0 { q / rhs } else if q > 0.0 { f64::INFINITY } else { 0.0 };
        calibration = calibration.max(c);
    }
    Ok(BoundReport {
        bound_name: "bernstein".into(),
        n,
        replications,
        seed,
        points,
        calibration: Some(calibration),
    })
}

/// Monte Carlo check of the matrix Hoeffding bound over an `ε` grid, with the
/// chain visiting `s_1..s_n` and `M_k = sup ‖F‖` for every `k`.
pub fn verify_hoeffding(
    func: &MatrixFunction,
    chain: &ChainModel,
    n: usize,
    eps_grid: &[f64],
    replications: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_replications(replications)?;
    let ns = chain.n_states();
    let norms: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            func.average_norm(&visit_counts(chain.sampler(), ns, n, &mut rng))
        })
        .collect();
    let m = func.sup_norm();
    let points = eps_grid
        .iter()
        .map(|&eps| {
            let bound = hoeffding_bound_value(
                func.dim(),
                chain.density_norm(),
                chain.spectral_expansion(),
                chain.q(),
                n,
                n as f64 * m * m,
                eps,
            );
            let exceed = norms.iter().filter(|&&x| x >= eps).count();
            bound_point(eps, bound, exceed, replications)
        })
        .collect();
    Ok(BoundReport {
        bound_name: "hoeffding".into(),
        n,
        replications,
        seed,
        points,
        calibration: None,
    })
}

/// `κ = M̄²/√n · sqrt(40q/(1−λ) · log(2 d n ‖dν/dμ‖))` for a homogeneous martingale.
pub fn paper_kappa(spec: &MartingaleSpec, chain: &ChainModel, n: usize) -> f64 {
    let nf = n as f64;
    let m = spec.m_bound();
    m * m / nf.sqrt()
        * (40.0 * chain.q() / (1.0 - chain.spectral_expansion())
            * (2.0 * spec.dim() as f64 * nf * chain.density_norm()).ln())
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub kappa: f64,
    pub tau: usize,
    /// Number of Rademacher steps appended after `τ`.
    pub pad_steps: usize,
    pub padded_length: usize,
    pub cap: f64,
    /// `Σ_{i≤n} V_i`.
    pub original_qv: Mat,
    /// `Σ_{i≤τ} V_i + m · (D/m)`, which equals the target `n(1+κ)Σ_n`.
    pub terminal_qv: Mat,
    pub target_qv: Mat,
    pub original_sum: Vector,
    pub completed_sum: Vector,
    /// `sqrt(Tr D / m)`, the common norm of every padding increment.
    pub pad_increment_norm: f64,
}

/// Complete a martingale path to terminal quadratic variation `n(1+κ)Σ_n`.
///
/// `increments[i]` is `x_{i+1}` and `cond_covs[i]` its conditional covariance `V_{i+1}`.
pub fn complete_martingale<R: Rng + ?Sized>(
    increments: &[Vector],
    cond_covs: &[Mat],
    sigma_n: &Mat,
    kappa: f64,
    cap: f64,
    rng: &mut R,
) -> Result<CompletionResult> {
    let n = increments.len();
    if cond_covs.len() != n || n == 0 {
        return Err(Error::InvalidInput("increments and conditional covariances must align".into()));
    }
    if !(kappa > 0.0) || !(cap > 0.0) {
        return Err(Error::InvalidInput(format!("need κ > 0 and M > 0, got κ = {kappa}, M = {cap}")));
    }
    let d = sigma_n.nrows();
    let target = sigma_n * (n as f64 * (1.0 + kappa));
    let scale = target.amax().max(1.0);
    let tol = 1e-12 * scale;

    let mut qv = Mat::zeros(d, d);
    let mut running = Mat::zeros(d, d);
    let mut tau = 0;
    let mut stopped = false;
    let mut sum_tau = Vector::zeros(d);
    let mut sum_all = Vector::zeros(d);
    for i in 0..n {
        qv += &cond_covs[i];
        sum_all += &increments[i];
        if !stopped {
            let next = &running + &cond_covs[i];
            if psd_le(&next, &target, tol) {
                running = next;
                sum_tau += &increments[i];
                tau = i + 1;
            } else {
                stopped = true;
            }
        }
    }

    let deficit = symmetrize(&(&target - &running));
    let min_eig = min_eigenvalue(&deficit);
    if min_eig < -tol {
        return Err(Error::DeficitNotPsd { min_eig });
    }
    let eig = nalgebra::SymmetricEigen::new(deficit.clone());
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let trace: f64 = lambdas.iter().sum();
    let pad_steps = ((trace / (cap * cap)).ceil() as usize).max(1);
    let padded_length = ((target.trace() / (cap * cap)).ceil() as usize) + n;

    let mut pad_sum = Vector::zeros(d);
    let mut coeffs = vec![0i64; d];
    for _ in 0..pad_steps {
        for c in coeffs.iter_mut() {
            *c += if rng.random::<bool>() { 1 } else { -1 };
        }
    }
    for j in 0..d {
        pad_sum += eig.eigenvectors.column(j) * (coeffs[j] as f64 * lambdas[j].sqrt());
    }
    pad_sum /= (pad_steps as f64).sqrt();

    let mut pad_cov = Mat::zeros(d, d);
    for j in 0..d {
        let u = eig.eigenvectors.column(j);
        pad_cov += lambdas[j] * (u * u.transpose());
    }

    Ok(CompletionResult {
        kappa,
        tau,
        pad_steps,
        padded_length,
        cap,
        original_qv: qv,
        terminal_qv: &running + pad_cov,
        target_qv: target,
        original_sum: sum_all,
        completed_sum: sum_tau + pad_sum,
        pad_increment_norm: (trace / pad_steps as f64).sqrt(),
    })
}

impl MartingaleSpec {
    /// Complete a sampled path in whitened coordinates `Σ_n^{-1/2} f`, where the
    /// target is `n(1+κ) I` and the per-step cap is `M`.
    pub fn complete_path<R: Rng + ?Sized>(&self, states: &[usize], kappa: f64, rng: &mut R) -> Result<CompletionResult> {
        let whiten = crate::linalg::sym_inv_sqrt(&self.sigma_n, 1e-12 * self.sigma_n.amax().max(1e-300))
            .ok_or(Error::SingularCovariance)?;
        let increments: Vec<Vector> = states.windows(2).map(|w| &whiten * self.f(w[0], w[1])).collect();
        let covs: Vec<Mat> = states[..states.len() - 1]
            .iter()
            .map(|&s| symmetrize(&(&whiten * &self.cond_cov[s] * &whiten)))
            .collect();
        complete_martingale(&increments, &covs, &Mat::identity(self.dim, self.dim), kappa, self.m_bound, rng)
    }
}
