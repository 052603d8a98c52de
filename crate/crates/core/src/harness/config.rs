//! Versioned experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::ModelSource;
use crate::error::{Error, Result};
use crate::martingale::MIN_REPLICATIONS;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TdRate,
    TdCoverage,
    TdBerryEsseen,
    Bernstein,
    Hoeffding,
    MtgBerryEsseen,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::TdRate => "td-rate",
            ExperimentKind::TdCoverage => "td-coverage",
            ExperimentKind::TdBerryEsseen => "td-berry-esseen",
            ExperimentKind::Bernstein => "bernstein",
            ExperimentKind::Hoeffding => "hoeffding",
            ExperimentKind::MtgBerryEsseen => "mtg-berry-esseen",
        }
    }

    /// Experiments that estimate tail probabilities.
    pub fn is_tail(self) -> bool {
        matches!(self, ExperimentKind::Bernstein | ExperimentKind::Hoeffding)
    }

    /// Experiments that fit a log-log slope over the grid.
    pub fn fits_rate(self) -> bool {
        matches!(
            self,
            ExperimentKind::TdRate | ExperimentKind::TdBerryEsseen | ExperimentKind::MtgBerryEsseen
        )
    }

    pub fn is_td(self) -> bool {
        matches!(
            self,
            ExperimentKind::TdRate | ExperimentKind::TdCoverage | ExperimentKind::TdBerryEsseen
        )
    }
}

/// TD stepsize parameters; `eta0` defaults to the model's `min(0.45/λΣ, 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for TdParams {
    fn default() -> Self {
        Self {
            eta0: None,
            alpha: default_alpha(),
        }
    }
}

fn default_alpha() -> f64 {
    0.75
}

fn default_nominal() -> Vec<f64> {
    vec![0.8, 0.9, 0.95]
}

fn default_directions() -> usize {
    64
}

fn default_direction_batches() -> usize {
    5
}

fn default_bootstrap() -> usize {
    200
}

fn default_matrix_functions() -> usize {
    3
}

fn default_matrix_dim() -> usize {
    2
}

fn default_martingale_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub model: ModelSource,
    /// Horizons `T` for TD experiments, path lengths `n` for martingale experiments.
    pub t_grid: Vec<u64>,
    pub replications: usize,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub td: TdParams,
    #[serde(default = "default_nominal")]
    pub nominal: Vec<f64>,
    #[serde(default = "default_directions")]
    pub n_directions: usize,
    #[serde(default = "default_direction_batches")]
    pub direction_batches: usize,
    #[serde(default = "default_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default = "default_matrix_functions")]
    pub n_matrix_functions: usize,
    #[serde(default = "default_matrix_dim")]
    pub matrix_dim: usize,
    /// Per-state martingale generator `g` (one row per state); random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_martingale_dim")]
    pub martingale_dim: usize,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, model: ModelSource, t_grid: Vec<u64>, replications: usize, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            kind,
            model,
            t_grid,
            replications,
            deltas: Vec::new(),
            epsilons: Vec::new(),
            seed,
            workers: None,
            out: None,
            td: TdParams::default(),
            nominal: default_nominal(),
            n_directions: default_directions(),
            direction_batches: default_direction_batches(),
            n_bootstrap: default_bootstrap(),
            n_matrix_functions: default_matrix_functions(),
            matrix_dim: default_matrix_dim(),
            g: None,
            martingale_dim: default_martingale_dim(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.t_grid.is_empty() || self.t_grid[0] == 0 || !self.t_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("t_grid must be positive and strictly increasing".into()));
        }
        if self.kind.fits_rate() && self.t_grid.len() < 4 {
            return Err(Error::Config(format!(
                "{} fits a rate and needs at least 4 grid points",
                self.kind.as_str()
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.kind.is_tail() && self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "tail experiments need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if self.kind == ExperimentKind::Bernstein && self.deltas.is_empty() {
            return Err(Error::Config("bernstein experiments need a nonempty deltas grid".into()));
        }
        if self.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::Config("deltas must lie in (0, 1)".into()));
        }
        if self.kind == ExperimentKind::Hoeffding && self.epsilons.is_empty() {
            return Err(Error::Config("hoeffding experiments need a nonempty epsilons grid".into()));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.nominal.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config("nominal levels must lie in (0, 1)".into()));
        }
        if self.n_directions == 0 || self.direction_batches == 0 {
            return Err(Error::Config("direction counts must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with `workers` and `out` removed, so the hash
    /// identifies the experiment rather than how or where it ran.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = None;
        canon.out = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}
