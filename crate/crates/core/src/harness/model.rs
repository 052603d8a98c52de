//! JSON model specifications and the random MRP generator.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::markov::{ChainModel, DensityExponent, MixingConstants};
use crate::mrp::MrpModel;
use crate::rng::stream_rng;

/// Uniform smoothing added to every generated kernel row before renormalizing.
pub const EPS_MIX: f64 = 1e-3;
pub const MAX_GENERATION_ATTEMPTS: usize = 100;
/// Accuracy levels reported by `chain analyze`.
pub const TMIX_LEVELS: [f64; 3] = [0.25, 0.1, 0.01];

fn rows_to_mat(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!("{what} must be a nonempty rectangular array")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub kernel: Vec<Vec<f64>>,
    /// Initial law; the stationary law when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub density_p: DensityExponent,
    /// Override for the fitted `(m, ρ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingConstants>,
}

impl ChainSpec {
    pub fn build(&self) -> Result<ChainModel> {
        let kernel = rows_to_mat(&self.kernel, "kernel")?;
        let chain = match &self.initial {
            Some(init) => ChainModel::new(kernel, Vector::from_vec(init.clone()), self.density_p)?,
            None => {
                let mu = crate::markov::stationary_distribution(&kernel)?;
                ChainModel::new(kernel, mu, self.density_p)?
            }
        };
        match self.mixing {
            Some(m) => chain.with_mixing(m),
            None => Ok(chain),
        }
    }

    pub fn from_chain(chain: &ChainModel) -> Self {
        Self {
            kernel: mat_to_rows(chain.kernel()),
            initial: Some(chain.initial().iter().copied().collect()),
            density_p: chain.density_exponent(),
            mixing: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAnalysis {
    pub stationary: Vec<f64>,
    pub lambda: f64,
    pub m: f64,
    pub rho: f64,
    pub tmix: BTreeMap<String, usize>,
}

pub fn analyze_chain(chain: &ChainModel) -> Result<ChainAnalysis> {
    let mix = chain.mixing();
    let mut tmix = BTreeMap::new();
    for eps in TMIX_LEVELS {
        tmix.insert(eps.to_string(), chain.mixing_time(eps)?);
    }
    Ok(ChainAnalysis {
        stationary: chain.stationary().iter().copied().collect(),
        lambda: chain.spectral_expansion(),
        m: mix.m,
        rho: mix.rho,
        tmix,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub chain: ChainSpec,
    pub features: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub gamma: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<MrpModel> {
        let chain = self.chain.build()?;
        let features = rows_to_mat(&self.features, "features")?;
        MrpModel::new(chain, features, Vector::from_vec(self.rewards.clone()), self.gamma)
    }

    pub fn from_model(mrp: &MrpModel) -> Self {
        Self {
            chain: ChainSpec::from_chain(mrp.chain()),
            features: mat_to_rows(mrp.features()),
            rewards: mrp.rewards().iter().copied().collect(),
            gamma: mrp.gamma(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Sparse random MRP: each kernel row has `branching` successors with
/// Dirichlet(1) weights, features uniform in the unit ball, rewards `U[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMrpSpec {
    pub n_states: usize,
    pub branching: usize,
    pub dim: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default = "default_min_lambda0")]
    pub min_lambda0: f64,
}

fn default_min_lambda0() -> f64 {
    1e-3
}

impl RandomMrpSpec {
    fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.dim == 0 {
            return Err(Error::Config("n_states and dim must be positive".into()));
        }
        if self.branching == 0 || self.branching > self.n_states {
            return Err(Error::Config(format!(
                "branching must lie in [1, {}], got {}",
                self.n_states, self.branching
            )));
        }
        if self.dim > self.n_states {
            return Err(Error::Config(format!(
                "dim {} exceeds n_states {}",
                self.dim, self.n_states
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

fn random_kernel<R: Rng + ?Sized>(n: usize, branching: usize, rng: &mut R) -> Mat {
    let mut p = Mat::from_element(n, n, EPS_MIX);
    for s in 0..n {
        let succ = sample_indices(rng, n, branching);
        let w: Vec<f64> = (0..branching).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        for (k, j) in succ.iter().enumerate() {
            p[(s, j)] += w[k] / total;
        }
        let row_sum: f64 = p.row(s).sum();
        for j in 0..n {
            p[(s, j)] /= row_sum;
        }
    }
    p
}

fn unit_ball_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let radius = rng.random::<f64>().powf(1.0 / d as f64);
            return g.into_iter().map(|x| x * radius / norm).collect();
        }
    }
}

fn random_model_spec(spec: &RandomMrpSpec, attempt: u64) -> ModelSpec {
    let mut rng = stream_rng(spec.seed, attempt);
    let n = spec.n_states;
    let kernel = random_kernel(n, spec.branching, &mut rng);
    let features = (0..n).map(|_| unit_ball_point(spec.dim, &mut rng)).collect();
    let rewards = (0..n).map(|_| rng.random::<f64>()).collect();
    ModelSpec {
        chain: ChainSpec {
            kernel: mat_to_rows(&kernel),
            initial: None,
            density_p: DensityExponent::Infinite,
            mixing: None,
        },
        features,
        rewards,
        gamma: spec.gamma,
    }
}

/// Draw models until one passes every `MrpModel` invariant and the `λ0` floor.
pub fn generate_random_mrp(spec: &RandomMrpSpec) -> Result<MrpModel> {
    spec.validate()?;
    for attempt in 0..MAX_GENERATION_ATTEMPTS as u64 {
        match random_model_spec(spec, attempt).build() {
            Ok(mrp) if mrp.lambda0() >= spec.min_lambda0 => return Ok(mrp),
            Ok(mrp) => log::debug!("attempt {attempt}: lambda0 {:.3e} below floor", mrp.lambda0()),
            Err(e) => log::debug!("attempt {attempt}: {e}"),
        }
    }
    Err(Error::GenerationExhausted {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Where an experiment gets its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Explicit(ModelSpec),
    File(std::path::PathBuf),
    Random(RandomMrpSpec),
}

impl ModelSource {
    pub fn build(&self) -> Result<MrpModel> {
        match self {
            ModelSource::Explicit(spec) => spec.build(),
            ModelSource::File(path) => ModelSpec::load(path)
                .and_then(|s| s.build())
                .map_err(|e| e.with_context(format!("model file {}", path.display()))),
            ModelSource::Random(spec) => generate_random_mrp(spec),
        }
    }
}
