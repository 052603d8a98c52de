//! TD(0) with linear features and Polyak-Ruppert averaging.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::MrpModel;
use crate::error::{Error, Result};
use crate::linalg::{KahanSum, Vector};
use crate::rng::stream_rng;

/// Iterates whose norm exceeds this are treated as divergence.
pub const OVERFLOW_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdConfig {
    pub eta0: f64,
    pub alpha: f64,
    pub horizon: u64,
    /// Steps at which `θ̄_t` is recorded; empty means only `horizon`.
    #[serde(default)]
    pub record_schedule: Vec<u64>,
    /// Keep every iterate `θ_t` (small horizons only).
    #[serde(default)]
    pub keep_iterates: bool,
}

impl TdConfig {
    pub fn new(eta0: f64, alpha: f64, horizon: u64) -> Self {
        Self {
            eta0,
            alpha,
            horizon,
            record_schedule: Vec::new(),
            keep_iterates: false,
        }
    }

    /// Config with the default stepsize `min(0.45/λΣ, 0.5)` and `α = 3/4`.
    pub fn default_for(mrp: &MrpModel, horizon: u64) -> Self {
        Self::new(mrp.default_eta0(), 0.75, horizon)
    }

    pub fn with_schedule(mut self, schedule: Vec<u64>) -> Self {
        self.record_schedule = schedule;
        self
    }

    pub fn validate(&self, mrp: &MrpModel) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (1/2, 1), got {}", self.alpha)));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        let cap = mrp.max_eta0();
        if self.eta0 > cap * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "eta0 = {} exceeds the contraction limit 1/(2 λΣ) = {cap}",
                self.eta0
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !self.record_schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("record_schedule must be strictly increasing".into()));
        }
        if let (Some(&first), Some(&last)) = (self.record_schedule.first(), self.record_schedule.last()) {
            if first == 0 || last > self.horizon {
                return Err(Error::Config(format!(
                    "record_schedule must lie in [1, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    fn checkpoints(&self) -> Vec<u64> {
        if self.record_schedule.is_empty() {
            vec![self.horizon]
        } else {
            self.record_schedule.clone()
        }
    }
}

/// Precomputed stepsizes `η_t = η0 t^{-α}` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct StepSchedule {
    eta0: f64,
    alpha: f64,
    etas: Arc<Vec<f64>>,
}

impl StepSchedule {
    pub fn new(eta0: f64, alpha: f64, horizon: u64) -> Self {
        let etas = (1..=horizon).map(|t| eta0 * (t as f64).powf(-alpha)).collect();
        Self {
            eta0,
            alpha,
            etas: Arc::new(etas),
        }
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn horizon(&self) -> u64 {
        self.etas.len() as u64
    }

    /// `η_t`, one-based.
    #[inline]
    pub fn eta(&self, t: u64) -> f64 {
        self.etas[(t - 1) as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.etas
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdCheckpoint {
    pub t: u64,
    pub theta_bar: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdRunResult {
    pub theta_final: Vec<f64>,
    pub theta_bar: Vec<f64>,
    pub error_bar: f64,
    pub checkpoints: Vec<TdCheckpoint>,
    pub seed: u64,
    pub stream_id: u64,
    #[serde(skip)]
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl TdRunResult {
    pub fn checkpoint_errors(&self) -> Vec<(u64, f64)> {
        self.checkpoints.iter().map(|c| (c.t, c.error)).collect()
    }
}

/// Reusable TD runner: validates the config and precomputes the stepsize table
/// once, then executes independent replications.
#[derive(Debug, Clone)]
pub struct TdRunner<'a> {
    mrp: &'a MrpModel,
    config: TdConfig,
    schedule: StepSchedule,
    features: Vec<f64>,
    checkpoints: Vec<u64>,
}

impl<'a> TdRunner<'a> {
    pub fn new(mrp: &'a MrpModel, config: TdConfig) -> Result<Self> {
        config.validate(mrp)?;
        let schedule = StepSchedule::new(config.eta0, config.alpha, config.horizon);
        let d = mrp.dim();
        let n = mrp.n_states();
        let mut features = Vec::with_capacity(n * d);
        for s in 0..n {
            features.extend(mrp.features().row(s).iter());
        }
        let checkpoints = config.checkpoints();
        Ok(Self {
            mrp,
            config,
            schedule,
            features,
            checkpoints,
        })
    }

    pub fn config(&self) -> &TdConfig {
        &self.config
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn run(&self, seed: u64, stream_id: u64) -> Result<TdRunResult> {
        let mrp = self.mrp;
        let d = mrp.dim();
        let gamma = mrp.gamma();
        let rewards = mrp.rewards().as_slice();
        let theta_star = mrp.theta_star();
        let sampler = mrp.chain().sampler();
        let feats = &self.features;
        let etas = self.schedule.as_slice();

        let mut rng = stream_rng(seed, stream_id);
        let mut theta = vec![0.0; d];
        let mut sum = KahanSum::new(d);
        let mut checkpoints = Vec::with_capacity(self.checkpoints.len());
        let mut next_cp = self.checkpoints.iter().copied().peekable();
        let mut iterates = self.config.keep_iterates.then(Vec::new);
        let overflow_sq = OVERFLOW_NORM * OVERFLOW_NORM;

        let mut prev = sampler.initial_state(&mut rng);
        for t in 1..=self.config.horizon {
            let next = sampler.step(prev, &mut rng);
            let phi = &feats[prev * d..prev * d + d];
            let phi_next = &feats[next * d..next * d + d];
            // A_t θ − b_t = φ(s_{t−1}) [(φ(s_{t−1}) − γ φ(s_t))ᵀ θ − r(s_{t−1})]
            let mut td = -rewards[prev];
            for i in 0..d {
                td += (phi[i] - gamma * phi_next[i]) * theta[i];
            }
            let step = etas[(t - 1) as usize] * td;
            let mut norm_sq = 0.0;
            for i in 0..d {
                theta[i] -= step * phi[i];
                norm_sq += theta[i] * theta[i];
            }
            if !(norm_sq <= overflow_sq) {
                return Err(Error::NumericalOverflow { step: t });
            }
            sum.add(&theta);
            if let Some(its) = iterates.as_mut() {
                its.push(theta.clone());
            }
            if next_cp.peek() == Some(&t) {
                next_cp.next();
                let theta_bar: Vec<f64> = sum.total().iter().map(|x| x / t as f64).collect();
                let error = error_norm(&theta_bar, theta_star);
                checkpoints.push(TdCheckpoint { t, theta_bar, error });
            }
            prev = next;
        }

        let horizon = self.config.horizon as f64;
        let theta_bar: Vec<f64> = sum.total().iter().map(|x| x / horizon).collect();
        let error_bar = error_norm(&theta_bar, theta_star);
        Ok(TdRunResult {
            theta_final: theta,
            theta_bar,
            error_bar,
            checkpoints,
            seed,
            stream_id,
            iterates,
        })
    }
}

fn error_norm(theta_bar: &[f64], theta_star: &Vector) -> f64 {
    theta_bar
        .iter()
        .zip(theta_star.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Single TD replication. Prefer [`TdRunner`] when running many replications.
pub fn td_run(mrp: &MrpModel, config: &TdConfig, seed: u64, stream_id: u64) -> Result<TdRunResult> {
    TdRunner::new(mrp, config.clone())?.run(seed, stream_id)
}

/// `(t, ‖θ̄_t − θ*‖₂)` at the recorded checkpoints.
pub fn td_error_trace(mrp: &MrpModel, config: &TdConfig, seed: u64, stream_id: u64) -> Result<Vec<(u64, f64)>> {
    Ok(td_run(mrp, config, seed, stream_id)?.checkpoint_errors())
}

/// Geometrically spaced checkpoints in `[t_min, t_max]`, `per_decade` per factor of 10,
/// always including both ends.
pub fn geometric_checkpoints(t_min: u64, t_max: u64, per_decade: usize) -> Vec<u64> {
    assert!(t_min >= 1 && t_min <= t_max && per_decade >= 1);
    let lo = (t_min as f64).log10();
    let hi = (t_max as f64).log10();
    let steps = ((hi - lo) * per_decade as f64).round().max(1.0) as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / steps as f64).round() as u64)
        .collect();
    out[0] = t_min;
    *out.last_mut().unwrap() = t_max;
    out.dedup();
    out
}
