//! Markov reward processes with linear features and their exact TD population
//! quantities.

mod td;

pub use td::{
    geometric_checkpoints, td_error_trace, td_run, StepSchedule, TdCheckpoint, TdConfig, TdRunResult, TdRunner, OVERFLOW_NORM,
};

use crate::error::{Error, Result};
use crate::linalg::{max_eigenvalue, min_eigenvalue, op_norm, psd_le, Mat, Vector};
use crate::markov::ChainModel;

const FEATURE_NORM_TOL: f64 = 1e-12;
const INVARIANT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MrpModel {
    chain: ChainModel,
    features: Mat,
    rewards: Vector,
    gamma: f64,
    a_mat: Mat,
    b_vec: Vector,
    sigma_mat: Mat,
    lambda0: f64,
    lambda_sigma: f64,
    theta_star: Vector,
}

impl MrpModel {
    /// Build the model and its population quantities by exact weighted sums
    /// over transitions `(s, s')` with weight `μ(s) P(s, s')`.
    pub fn new(chain: ChainModel, features: Mat, rewards: Vector, gamma: f64) -> Result<Self> {
        let n = chain.n_states();
        if features.nrows() != n || features.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "features must be {n} x d with d >= 1, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if rewards.len() != n {
            return Err(Error::InvalidInput(format!("rewards have length {}, expected {n}", rewards.len())));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("discount must lie in [0, 1), got {gamma}")));
        }
        for s in 0..n {
            let norm = features.row(s).norm();
            if !(norm <= 1.0 + FEATURE_NORM_TOL) {
                return Err(Error::InvalidInput(format!("feature row {s} has norm {norm} > 1")));
            }
            if !(0.0..=1.0).contains(&rewards[s]) {
                return Err(Error::InvalidInput(format!("reward {} at state {s} outside [0, 1]", rewards[s])));
            }
        }

        let d = features.ncols();
        let mu = chain.stationary();
        let kernel = chain.kernel();
        let mut a_mat = Mat::zeros(d, d);
        let mut b_vec = Vector::zeros(d);
        let mut sigma_mat = Mat::zeros(d, d);
        for s in 0..n {
            let phi = features.row(s).transpose();
            let phi_phi = &phi * phi.transpose();
            sigma_mat += mu[s] * &phi_phi;
            b_vec += (mu[s] * rewards[s]) * &phi;
            for s2 in 0..n {
                let w = mu[s] * kernel[(s, s2)];
                if w == 0.0 {
                    continue;
                }
                let next = features.row(s2).transpose();
                a_mat += w * (&phi_phi - gamma * (&phi * next.transpose()));
            }
        }
        let sigma_mat = (&sigma_mat + sigma_mat.transpose()) * 0.5;
        let lambda0 = min_eigenvalue(&sigma_mat);
        let lambda_sigma = max_eigenvalue(&sigma_mat);
        if lambda0 <= 1e-10 {
            return Err(Error::DegenerateFeatures { lambda0 });
        }
        let theta_star = a_mat.clone().lu().solve(&b_vec).ok_or(Error::SingularA)?;

        let model = Self {
            chain,
            features,
            rewards,
            gamma,
            a_mat,
            b_vec,
            sigma_mat,
            lambda0,
            lambda_sigma,
            theta_star,
        };
        model.check_invariants()?;
        Ok(model)
    }

    fn check_invariants(&self) -> Result<()> {
        let residual = (&self.a_mat * &self.theta_star - &self.b_vec).amax();
        if residual > INVARIANT_TOL {
            return Err(Error::SingularA);
        }
        let sym = &self.a_mat + self.a_mat.transpose();
        let lo = 2.0 * (1.0 - self.gamma) * &self.sigma_mat;
        let hi = 2.0 * (1.0 + self.gamma) * &self.sigma_mat;
        if !psd_le(&lo, &sym, INVARIANT_TOL) || !psd_le(&sym, &hi, INVARIANT_TOL) {
            return Err(Error::InvariantViolation(
                "2(1-γ)Σ ⪯ A + Aᵀ ⪯ 2(1+γ)Σ failed".into(),
            ));
        }
        let bound = 1.0 / (self.lambda0 * (1.0 - self.gamma)) + INVARIANT_TOL;
        if self.theta_star.norm() > bound {
            return Err(Error::InvariantViolation(format!(
                "‖θ*‖ = {} exceeds 1/(λ0(1-γ)) = {bound}",
                self.theta_star.norm()
            )));
        }
        Ok(())
    }

    pub fn chain(&self) -> &ChainModel {
        &self.chain
    }

    pub fn n_states(&self) -> usize {
        self.chain.n_states()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn feature(&self, s: usize) -> Vector {
        self.features.row(s).transpose()
    }

    pub fn rewards(&self) -> &Vector {
        &self.rewards
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a_mat(&self) -> &Mat {
        &self.a_mat
    }

    pub fn b_vec(&self) -> &Vector {
        &self.b_vec
    }

    pub fn sigma_mat(&self) -> &Mat {
        &self.sigma_mat
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda_sigma(&self) -> f64 {
        self.lambda_sigma
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    /// Default initial stepsize `min(0.45 / λΣ, 0.5)`.
    pub fn default_eta0(&self) -> f64 {
        (0.45 / self.lambda_sigma).min(0.5)
    }

    /// Largest admissible initial stepsize `1 / (2 λΣ)`.
    pub fn max_eta0(&self) -> f64 {
        0.5 / self.lambda_sigma
    }

    /// `A(s, s') = φ(s)(φ(s) − γ φ(s'))ᵀ`.
    pub fn a_sample(&self, s: usize, s_next: usize) -> Mat {
        let phi = self.feature(s);
        let diff = &phi - self.gamma * self.feature(s_next);
        phi * diff.transpose()
    }

    /// `b(s) = φ(s) r(s)`.
    pub fn b_sample(&self, s: usize) -> Vector {
        self.feature(s) * self.rewards[s]
    }

    /// TD noise at the fixed point, `A(s, s') θ* − b(s)`.
    pub fn td_noise(&self, s: usize, s_next: usize) -> Vector {
        self.a_sample(s, s_next) * &self.theta_star - self.b_sample(s)
    }

    /// `E_{s∼μ, s'∼P}[A_tᵀ A_t]`.
    pub fn expected_ata(&self) -> Mat {
        let d = self.dim();
        let mu = self.chain.stationary();
        let kernel = self.chain.kernel();
        let mut out = Mat::zeros(d, d);
        for s in 0..self.n_states() {
            for s2 in 0..self.n_states() {
                let w = mu[s] * kernel[(s, s2)];
                if w > 0.0 {
                    let a = self.a_sample(s, s2);
                    out += w * (a.transpose() * a);
                }
            }
        }
        out
    }

    pub fn a_inverse_norm(&self) -> f64 {
        self.a_mat.clone().try_inverse().map(|inv| op_norm(&inv)).unwrap_or(f64::INFINITY)
    }
}
