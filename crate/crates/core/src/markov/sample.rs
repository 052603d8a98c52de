//! Trajectory sampling from a row-stochastic kernel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};
use crate::rng::stream_rng;

/// Inverse-CDF sampler over the positive-probability entries of a distribution.
#[derive(Debug, Clone)]
struct DiscreteCdf {
    states: Vec<usize>,
    cumulative: Vec<f64>,
}

impl DiscreteCdf {
    fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut states = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (j, w) in weights.enumerate() {
            if w > 0.0 {
                acc += w;
                states.push(j);
                cumulative.push(acc);
            }
        }
        // Normalize away rounding so the last bucket always closes at 1.
        for c in &mut cumulative {
            *c /= acc;
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { states, cumulative }
    }

    #[inline]
    fn draw(&self, u: f64) -> usize {
        if self.states.len() == 1 {
            return self.states[0];
        }
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.states[idx.min(self.states.len() - 1)]
    }
}

/// Precomputed per-row samplers for a kernel plus the initial law.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    rows: Vec<DiscreteCdf>,
    initial: DiscreteCdf,
}

impl TransitionSampler {
    pub fn new(kernel: &Mat, initial: &Vector) -> Self {
        let rows = (0..kernel.nrows())
            .map(|i| DiscreteCdf::new(kernel.row(i).iter().copied()))
            .collect();
        Self {
            rows,
            initial: DiscreteCdf::new(initial.iter().copied()),
        }
    }

    #[inline]
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.initial.draw(rng.random::<f64>())
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        self.rows[state].draw(rng.random::<f64>())
    }

    /// `s_0 ~ ν` followed by `length` transitions.
    pub fn trajectory(&self, length: usize, seed: u64, stream_id: u64) -> Trajectory {
        let mut rng = stream_rng(seed, stream_id);
        let mut states = Vec::with_capacity(length + 1);
        let mut s = self.initial_state(&mut rng);
        states.push(s);
        for _ in 0..length {
            s = self.step(s, &mut rng);
            states.push(s);
        }
        Trajectory {
            states,
            seed,
            stream_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub seed: u64,
    pub stream_id: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Consecutive `(s_{i-1}, s_i)` pairs.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.windows(2).map(|w| (w[0], w[1]))
    }
}
