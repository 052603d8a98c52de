//! Exact asymptotic covariance of averaged TD: the long-run noise covariance
//! `Γ̃`, its sandwich `Λ̃* = A⁻¹Γ̃A⁻ᵀ`, the finite-horizon `Λ̃_T` built from the
//! `Q_t` matrices, and the Lyapunov correction `X(Λ̃*)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, op_norm, symmetrize, Mat, Vector};
use crate::mrp::{MrpModel, StepSchedule};

pub const DEFAULT_LAG_CAP: usize = 1_000_000;
/// Bytes of `Q_t` storage allowed before `Λ̃_T` switches to streaming accumulation.
pub const DEFAULT_Q_MEMORY_BUDGET: usize = 256 << 20;
const LYAPUNOV_COND_LIMIT: f64 = 1e12;

/// Default truncation tolerance `1e-12 (2‖θ*‖ + 1)²`.
pub fn default_gamma_tol(mrp: &MrpModel) -> f64 {
    1e-12 * noise_scale(mrp).powi(2)
}

/// Uniform bound `2‖θ*‖ + 1` on the TD noise norm.
pub fn noise_scale(mrp: &MrpModel) -> f64 {
    2.0 * mrp.theta_star().norm() + 1.0
}

/// Noise `e(s, s')` for every transition, laid out as `n·n` vectors.
struct NoiseTable {
    n: usize,
    e: Vec<Vector>,
    /// Row `s` is `ē(s) = Σ_{s'} P(s, s') e(s, s')`.
    e_bar: Mat,
    /// Row `s'` is `c(s') = Σ_s μ(s) P(s, s') e(s, s')`.
    c: Mat,
    lag0: Mat,
}

impl NoiseTable {
    fn new(mrp: &MrpModel) -> Self {
        let n = mrp.n_states();
        let d = mrp.dim();
        let mu = mrp.chain().stationary();
        let p = mrp.chain().kernel();
        let mut e = Vec::with_capacity(n * n);
        let mut e_bar = Mat::zeros(n, d);
        let mut c = Mat::zeros(n, d);
        let mut lag0 = Mat::zeros(d, d);
        for s in 0..n {
            for s2 in 0..n {
                let v = mrp.td_noise(s, s2);
                let w = p[(s, s2)];
                if w > 0.0 {
                    for k in 0..d {
                        e_bar[(s, k)] += w * v[k];
                        c[(s2, k)] += mu[s] * w * v[k];
                    }
                    lag0 += (mu[s] * w) * &v * v.transpose();
                }
                e.push(v);
            }
        }
        Self { n, e, e_bar, c, lag0 }
    }

    fn at(&self, s: usize, s2: usize) -> &Vector {
        &self.e[s * self.n + s2]
    }
}

/// `(I − P + 𝟙μᵀ)⁻¹ rhs`.
pub(crate) fn fundamental_solve(kernel: &Mat, mu: &Vector, rhs: &Mat) -> Result<Mat> {
    let n = kernel.nrows();
    let mut z = Mat::identity(n, n) - kernel;
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] += mu[j];
        }
    }
    z.lu().solve(rhs).ok_or(Error::SingularFundamentalMatrix)
}

/// `Γ̃ = E[e₁e₁ᵀ] + Σ_{ℓ≥1} (C_ℓ + C_ℓᵀ)` with `C_ℓ = E[e₁ e_{ℓ+1}ᵀ]` under stationarity,
/// truncated at the first lag `K` whose geometric tail bound falls below `tol`.
pub fn gamma_tilde(mrp: &MrpModel, tol: f64) -> Result<(Mat, usize)> {
    gamma_tilde_capped(mrp, tol, DEFAULT_LAG_CAP)
}

pub fn gamma_tilde_capped(mrp: &MrpModel, tol: f64, cap: usize) -> Result<(Mat, usize)> {
    let noise = NoiseTable::new(mrp);
    let mixing = mrp.chain().mixing();
    let scale_sq = noise_scale(mrp).powi(2);
    let kernel = mrp.chain().kernel();

    let mut gamma = noise.lag0.clone();
    let mut g = noise.e_bar.clone(); // P^{ℓ−1} ē
    let mut lag = 1usize;
    loop {
        let cross = noise.c.transpose() * &g;
        gamma += &cross + cross.transpose();
        if mixing.m * mixing.rho.powi((lag - 1) as i32) * scale_sq <= tol {
            break;
        }
        if lag >= cap {
            return Err(Error::TruncationFailure { cap });
        }
        g = kernel * &g;
        lag += 1;
    }
    Ok((symmetrize(&gamma), lag))
}

/// `Γ̃` in closed form from the fundamental matrix: `Σ_ℓ P^{ℓ−1} ē = (I − P + 𝟙μᵀ)⁻¹ ē`.
pub fn gamma_tilde_exact(mrp: &MrpModel) -> Result<Mat> {
    let noise = NoiseTable::new(mrp);
    let w = fundamental_solve(mrp.chain().kernel(), mrp.chain().stationary(), &noise.e_bar)?;
    let cross = noise.c.transpose() * w;
    Ok(symmetrize(&(noise.lag0 + &cross + cross.transpose())))
}

/// Tail-free upper bound `(1 + 2m/(1−ρ)) (2‖θ*‖ + 1)²` on `Tr Γ̃`.
pub fn gamma_trace_bound(mrp: &MrpModel) -> f64 {
    let mix = mrp.chain().mixing();
    (1.0 + 2.0 * mix.m / (1.0 - mix.rho)) * noise_scale(mrp).powi(2)
}

/// `A⁻¹ Γ̃ A⁻ᵀ` via two LU solves.
pub fn lambda_star(a: &Mat, gamma: &Mat) -> Result<Mat> {
    let lu = a.clone().lu();
    let left = lu.solve(gamma).ok_or(Error::SingularA)?;
    // A⁻¹ (A⁻¹ Γ̃)ᵀ = A⁻¹ Γ̃ᵀ A⁻ᵀ
    let both = lu.solve(&left.transpose()).ok_or(Error::SingularA)?;
    Ok(symmetrize(&both))
}

/// `Q_1..Q_T` by the backward recursion
/// `Q_T = η_T I`, `Q_t = η_t I + (η_t/η_{t+1}) (I − η_{t+1} A) Q_{t+1}`.
pub fn q_family(a: &Mat, schedule: &StepSchedule) -> Vec<Mat> {
    let horizon = schedule.horizon() as usize;
    let mut out = vec![Mat::zeros(0, 0); horizon];
    for_each_q(a, schedule, |t, q| out[t - 1] = q.clone());
    out
}

/// Visit `(t, Q_t)` for `t = T, T−1, ..., 1`.
pub fn for_each_q(a: &Mat, schedule: &StepSchedule, mut visit: impl FnMut(usize, &Mat)) {
    let d = a.nrows();
    let horizon = schedule.horizon() as usize;
    if horizon == 0 {
        return;
    }
    let eye = Mat::identity(d, d);
    let mut q = &eye * schedule.eta(horizon as u64);
    visit(horizon, &q);
    let mut scratch = Mat::zeros(d, d);
    for t in (1..horizon).rev() {
        let eta_t = schedule.eta(t as u64);
        let eta_next = schedule.eta(t as u64 + 1);
        // scratch = A Q_{t+1}
        a.mul_to(&q, &mut scratch);
        q -= eta_next * &scratch;
        q *= eta_t / eta_next;
        for i in 0..d {
            q[(i, i)] += eta_t;
        }
        visit(t, &q);
    }
}

/// `(1/T) Σ_t Q_t Γ̃ Q_tᵀ` from a stored family.
pub fn lambda_t(q_family: &[Mat], gamma: &Mat) -> Mat {
    assert!(!q_family.is_empty(), "q_family must be nonempty");
    let d = gamma.nrows();
    let mut acc = Mat::zeros(d, d);
    for q in q_family {
        acc += q * gamma * q.transpose();
    }
    symmetrize(&(acc / q_family.len() as f64))
}

/// `Λ̃_T` computed during the backward recursion without storing `Q_t`.
pub fn lambda_t_streaming(a: &Mat, gamma: &Mat, schedule: &StepSchedule) -> Mat {
    let d = a.nrows();
    let mut acc = Mat::zeros(d, d);
    let mut qg = Mat::zeros(d, d);
    for_each_q(a, schedule, |_, q| {
        q.mul_to(gamma, &mut qg);
        acc += &qg * q.transpose();
    });
    symmetrize(&(acc / schedule.horizon() as f64))
}

/// `Λ̃_T`, storing the `Q_t` only when `T·d²·8` fits in `budget_bytes`.
pub fn lambda_t_budgeted(a: &Mat, gamma: &Mat, schedule: &StepSchedule, budget_bytes: usize) -> Mat {
    let d = a.nrows();
    let bytes = (schedule.horizon() as usize).saturating_mul(d * d * 8);
    if bytes <= budget_bytes {
        lambda_t(&q_family(a, schedule), gamma)
    } else {
        lambda_t_streaming(a, gamma, schedule)
    }
}

/// Solve `A X + X Aᵀ = E` through `(I ⊗ A + A ⊗ I) vec X = vec E`.
pub fn solve_lyapunov(a: &Mat, e: &Mat) -> Result<Mat> {
    let d = a.nrows();
    let n = d * d;
    let mut k = Mat::zeros(n, n);
    // Column-major vec: index (i, j) ↦ i + j d.
    for j in 0..d {
        for i in 0..d {
            let row = i + j * d;
            for l in 0..d {
                // (A X)_{ij} = Σ_l A_{il} X_{lj}
                k[(row, l + j * d)] += a[(i, l)];
                // (X Aᵀ)_{ij} = Σ_l X_{il} A_{jl}
                k[(row, i + l * d)] += a[(j, l)];
            }
        }
    }
    let k_norm = one_norm(&k);
    let lu = k.lu();
    let inv = lu.try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let cond = k_norm * one_norm(&inv);
    if !(cond <= LYAPUNOV_COND_LIMIT) {
        return Err(Error::IllConditioned { cond });
    }
    let rhs = Vector::from_iterator(n, e.iter().copied());
    let x = inv * rhs;
    Ok(Mat::from_column_slice(d, d, x.as_slice()))
}

fn one_norm(m: &Mat) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `X(Λ̃*)` solving `η0 (A X + X Aᵀ) = Λ̃*`.
pub fn lyapunov_x(a: &Mat, lambda_star: &Mat, eta0: f64) -> Result<Mat> {
    Ok(symmetrize(&solve_lyapunov(a, &(lambda_star / eta0))?))
}

/// Horizon beyond which `λ_min(A Λ̃_T Aᵀ) ≥ λ_min(Γ̃)/2` is guaranteed:
/// `4 (2/((1−γ)λ0η0))^{1/(1−α)} (1−α)^{α/(1−α)} Γ(1/(1−α)) cond(Γ̃)`.
pub fn lambda_t_threshold(mrp: &MrpModel, eta0: f64, alpha: f64, gamma_tilde: &Mat) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    let base = 2.0 / ((1.0 - mrp.gamma()) * mrp.lambda0() * eta0);
    let lo = min_eigenvalue(gamma_tilde);
    let cond = if lo > 0.0 { op_norm(gamma_tilde) / lo } else { f64::INFINITY };
    4.0 * base.powf(p) * (1.0 - alpha).powf(alpha * p) * statrs::function::gamma::gamma(p) * cond
}

/// Uniform bound `3 η0^{−α/(1−α)} (4α/(λ0(1−γ)))^{1/(1−α)}` on `‖Q_t‖`.
pub fn q_norm_bound(mrp: &MrpModel, eta0: f64, alpha: f64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    3.0 * eta0.powf(-alpha * p) * (4.0 * alpha / (mrp.lambda0() * (1.0 - mrp.gamma()))).powf(p)
}

/// Bound `2 + η0 β^{−1/(1−α)} Γ(1/(1−α)) t^{α−1}` on `‖A Q_t‖`, with `β = (1−γ)λ0η0/2`.
pub fn aq_norm_bound(mrp: &MrpModel, eta0: f64, alpha: f64, t: u64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    let beta = 0.5 * (1.0 - mrp.gamma()) * mrp.lambda0() * eta0;
    2.0 + eta0 * beta.powf(-p) * statrs::function::gamma::gamma(p) * (t as f64).powf(alpha - 1.0)
}

/// Poisson-equation representation of the TD noise.
///
/// `U(s, s') = e(s, s') + W(s')` with `W = (I − P + 𝟙μᵀ)⁻¹ ē`, and the martingale
/// increment `m(s, s') = U(s, s') − Σ_{s''} P(s, s'') U(s, s'') = e(s, s') + W(s') − W(s)`.
#[derive(Debug, Clone)]
pub struct PoissonSeries {
    n: usize,
    u: Vec<Vector>,
    w: Mat,
    weights: Mat,
}

impl PoissonSeries {
    pub fn u(&self, s: usize, s_next: usize) -> &Vector {
        &self.u[s * self.n + s_next]
    }

    /// Row `s` of `W`, the expected future noise starting from `s`.
    pub fn w(&self) -> &Mat {
        &self.w
    }

    pub fn increment(&self, s: usize, s_next: usize) -> Vector {
        let d = self.w.ncols();
        let mut v = self.u(s, s_next).clone();
        for k in 0..d {
            v[k] -= self.w[(s, k)];
        }
        v
    }

    /// `E_{s∼μ, s'∼P}[m mᵀ]`, which equals `Γ̃`.
    pub fn increment_covariance(&self) -> Mat {
        let d = self.w.ncols();
        let mut out = Mat::zeros(d, d);
        for s in 0..self.n {
            for s2 in 0..self.n {
                let w = self.weights[(s, s2)];
                if w > 0.0 {
                    let m = self.increment(s, s2);
                    out += w * &m * m.transpose();
                }
            }
        }
        symmetrize(&out)
    }

    /// `max ‖U(s, s')‖₂` over positive-probability transitions.
    pub fn max_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for s in 0..self.n {
            for s2 in 0..self.n {
                if self.weights[(s, s2)] > 0.0 {
                    best = best.max(self.u(s, s2).norm());
                }
            }
        }
        best
    }
}

pub fn poisson_u_series(mrp: &MrpModel) -> Result<PoissonSeries> {
    let noise = NoiseTable::new(mrp);
    let kernel = mrp.chain().kernel();
    let mu = mrp.chain().stationary();
    let w = fundamental_solve(kernel, mu, &noise.e_bar)?;
    let n = noise.n;
    let mut u = Vec::with_capacity(n * n);
    let mut weights = Mat::zeros(n, n);
    for s in 0..n {
        for s2 in 0..n {
            u.push(noise.at(s, s2) + w.row(s2).transpose());
            weights[(s, s2)] = mu[s] * kernel[(s, s2)];
        }
    }
    Ok(PoissonSeries { n, u, w, weights })
}

/// `(2‖θ*‖ + 1)(1 + m/(1−ρ))`, the explicit bound on `‖U‖`.
pub fn u_norm_bound(mrp: &MrpModel) -> f64 {
    let mix = mrp.chain().mixing();
    noise_scale(mrp) * (1.0 + mix.m / (1.0 - mix.rho))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceSet {
    pub gamma_tilde: Mat,
    pub lambda_star: Mat,
    pub lambda_t: BTreeMap<u64, Mat>,
    pub lyapunov_x: Mat,
    pub truncation_k: usize,
}

impl CovarianceSet {
    /// Compute every covariance object for the given stepsize and horizons.
    pub fn compute(mrp: &MrpModel, eta0: f64, alpha: f64, horizons: &[u64]) -> Result<Self> {
        let (gamma, k) = gamma_tilde(mrp, default_gamma_tol(mrp))?;
        let lam = lambda_star(mrp.a_mat(), &gamma)?;
        let x = lyapunov_x(mrp.a_mat(), &lam, eta0)?;
        let lambda_t = horizons
            .iter()
            .map(|&t| {
                let schedule = StepSchedule::new(eta0, alpha, t);
                (t, lambda_t_budgeted(mrp.a_mat(), &gamma, &schedule, DEFAULT_Q_MEMORY_BUDGET))
            })
            .collect();
        Ok(Self {
            gamma_tilde: gamma,
            lambda_star: lam,
            lambda_t,
            lyapunov_x: x,
            truncation_k: k,
        })
    }

    /// JSON with keys `gamma_tilde`, `lambda_star`, `lambda_T`, `lyap_X`, `truncation_K`;
    /// matrices as arrays of rows.
    pub fn to_json(&self) -> serde_json::Value {
        let lambda_t: serde_json::Map<String, serde_json::Value> =
            self.lambda_t.iter().map(|(t, m)| (t.to_string(), rows(m))).collect();
        serde_json::json!({
            "gamma_tilde": rows(&self.gamma_tilde),
            "lambda_star": rows(&self.lambda_star),
            "lambda_T": lambda_t,
            "lyap_X": rows(&self.lyapunov_x),
            "truncation_K": self.truncation_k,
        })
    }
}

fn rows(m: &Mat) -> serde_json::Value {
    serde_json::Value::Array(
        m.row_iter()
            .map(|r| serde_json::Value::from(r.iter().copied().collect::<Vec<f64>>()))
            .collect(),
    )
}
