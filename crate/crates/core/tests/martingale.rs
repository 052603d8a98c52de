use mcuq::harness::mtg::martingale_generator;
use mcuq::linalg::{Mat, Vector};
use mcuq::markov::ChainModel;
use mcuq::martingale::{martingale_sums, MartingaleSpec};

fn three_state() -> ChainModel {
    ChainModel::stationary_start(Mat::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.4, 0.1, 0.5])).unwrap()
}

/// `E_μ[f fᵀ]` enumerated from the increments.
fn increment_covariance(spec: &MartingaleSpec, chain: &ChainModel) -> Mat {
    let n = chain.n_states();
    let d = spec.dim();
    let mut acc = Mat::zeros(d, d);
    for s in 0..n {
        for s2 in 0..n {
            let f = spec.f(s, s2);
            acc += chain.stationary()[s] * chain.kernel()[(s, s2)] * &f * f.transpose();
        }
    }
    acc
}

#[test]
fn increments_have_zero_conditional_mean() {
    let chain = three_state();
    let spec = MartingaleSpec::build(&chain, martingale_generator(&chain, None, 2, 3).unwrap()).unwrap();
    for s in 0..3 {
        let mut mean = Vector::zeros(2);
        for s2 in 0..3 {
            mean += chain.kernel()[(s, s2)] * spec.f(s, s2);
        }
        assert!(mean.amax() < 1e-12);
    }
}

#[test]
fn sigma_matches_enumerated_covariance() {
    let chain = three_state();
    let spec = MartingaleSpec::build(&chain, martingale_generator(&chain, None, 2, 5).unwrap()).unwrap();
    let oracle = increment_covariance(&spec, &chain);
    assert!((spec.sigma_n() - &oracle).amax() < 1e-12);
}

/// From a stationary start the increments are uncorrelated and identically
/// distributed, so `Cov(S_n/√n) = E_μ[f fᵀ]` for every `n`; only Monte Carlo
/// noise separates the empirical covariance from it.
#[test]
fn empirical_covariance_matches_sigma() {
    let chain = three_state();
    let spec = MartingaleSpec::build(&chain, martingale_generator(&chain, None, 2, 9).unwrap()).unwrap();
    let sigma = increment_covariance(&spec, &chain);
    let reps = 5000;
    for n in [50usize, 400] {
        let sums = martingale_sums(&spec, &chain, n, reps, 17 + n as u64);
        let mut cov = Mat::zeros(2, 2);
        for s in &sums {
            let x = s / (n as f64).sqrt();
            cov += &x * x.transpose();
        }
        cov /= reps as f64;
        // Entrywise standard error of a second moment is at most sqrt(2/reps) relative.
        let tol = 5.0 * (2.0 / reps as f64).sqrt() * sigma.amax();
        assert!((&cov - &sigma).amax() < tol, "n = {n}: {cov} vs {sigma}");
    }
}
