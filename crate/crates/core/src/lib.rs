pub mod covariance;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod markov;
pub mod martingale;
pub mod metrics;
pub mod mrp;
pub mod rng;
pub mod stats;
pub mod steps;

pub use error::{Error, Result};
