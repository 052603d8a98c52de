//! Scalar step-product sequences `Π_{k=i+1}^{t} (1 − β k^{−α})` and the
//! worst-case ratios of their sums and maxima against the closed-form envelopes.
//!
//! Every routine runs a single O(t) recursion; ratios ≤ 1 mean the envelope holds.

use std::f64::consts::E;

use crate::error::{Error, Result};

fn check(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (1/2, 1), got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

#[inline]
fn factor(alpha: f64, beta: f64, k: u64) -> f64 {
    1.0 - beta * (k as f64).powf(-alpha)
}

/// `max_{t ≤ t_max} t^α Π_{k=1}^{t}(1 − βk^{−α})` over `e (α/β)^{α/(1−α)}`.
pub fn r1_worst_ratio(alpha: f64, beta: f64, t_max: u64) -> Result<f64> {
    check(alpha, beta)?;
    let env = E * (alpha / beta).powf(alpha / (1.0 - alpha));
    let mut log_prod = 0.0;
    let mut worst: f64 = 0.0;
    for t in 1..=t_max {
        log_prod += factor(alpha, beta, t).ln();
        worst = worst.max((alpha * (t as f64).ln() + log_prod).exp());
    }
    Ok(worst / env)
}

/// Worst ratio of `Σ_{i≤t} i^{−ν} Π_{k=i+1}^{t}(1 − βk^{−α})` to
/// `(ν−1)^{−1} (2(ν−α)/β)^{(ν−α)/(1−α)} t^{α−ν}` over `t ≤ t_max`, for `ν ∈ (1, α+1]`.
pub fn r2_worst_ratio(alpha: f64, beta: f64, nu: f64, t_max: u64) -> Result<f64> {
    check(alpha, beta)?;
    if !(nu > 1.0 && nu <= alpha + 1.0) {
        return Err(Error::InvalidInput(format!("nu must lie in (1, alpha + 1], got {nu}")));
    }
    let c = (2.0 * (nu - alpha) / beta).powf((nu - alpha) / (1.0 - alpha)) / (nu - 1.0);
    let mut s = 0.0;
    let mut worst: f64 = 0.0;
    for t in 1..=t_max {
        let tf = t as f64;
        s = factor(alpha, beta, t) * s + tf.powf(-nu);
        worst = worst.max(s / (c * tf.powf(alpha - nu)));
    }
    Ok(worst)
}

/// `β t^α Σ_{i≤t} i^{−2α} Π_{k=i+1}^{t}(1 − βk^{−α})` at each requested `t`
/// (sorted ascending); tends to 1.
pub fn r3_normalized(alpha: f64, beta: f64, ts: &[u64]) -> Result<Vec<f64>> {
    check(alpha, beta)?;
    let t_max = ts.last().copied().unwrap_or(0);
    let mut out = Vec::with_capacity(ts.len());
    let mut next = ts.iter().peekable();
    let mut s = 0.0;
    for t in 1..=t_max {
        let tf = t as f64;
        s = factor(alpha, beta, t) * s + tf.powf(-2.0 * alpha);
        while next.peek() == Some(&&t) {
            out.push(beta * tf.powf(alpha) * s);
            next.next();
        }
    }
    Ok(out)
}

/// Worst ratio of `max_{i≤t} i^{−α} Π_{k=i+1}^{t}(1 − βk^{−α})` to
/// `e (α/β)^{α/(1−α)} t^{−α}` over `t ≤ t_max`.
pub fn r4_worst_ratio(alpha: f64, beta: f64, t_max: u64) -> Result<f64> {
    check(alpha, beta)?;
    let env = E * (alpha / beta).powf(alpha / (1.0 - alpha));
    let mut m: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for t in 1..=t_max {
        let tf = t as f64;
        m = (factor(alpha, beta, t) * m).max(tf.powf(-alpha));
        worst = worst.max(m * tf.powf(alpha) / env);
    }
    Ok(worst)
}

/// `G_t = Σ_{j=t}^{T} Π_{k=t+1}^{j}(1 − βk^{−α})` for `t = 1..=T` (index `t−1`).
pub fn forward_sums(alpha: f64, beta: f64, horizon: u64) -> Result<Vec<f64>> {
    check(alpha, beta)?;
    let mut g = vec![0.0; horizon as usize];
    let mut acc = 0.0;
    for t in (1..=horizon).rev() {
        acc = 1.0 + factor(alpha, beta, t + 1) * acc;
        g[(t - 1) as usize] = acc;
    }
    Ok(g)
}

/// Worst ratio of `t^{−α} G_t` to `3 (2/β)^{1/(1−α)}` over `t ≤ T`.
pub fn q_uni_worst_ratio(alpha: f64, beta: f64, horizon: u64) -> Result<f64> {
    let env = 3.0 * (2.0 / beta).powf(1.0 / (1.0 - alpha));
    let g = forward_sums(alpha, beta, horizon)?;
    Ok(g.iter()
        .enumerate()
        .map(|(i, v)| v * ((i + 1) as f64).powf(-alpha) / env)
        .fold(0.0, f64::max))
}

/// Smallest horizon `T` with `Π_{k=t+1}^{T}(1 − βk^{−α}) ≤ tail` by the bound
/// `ln(1 − x) ≤ −x` and an integral comparison.
pub fn horizon_for_tail(alpha: f64, beta: f64, t: u64, tail: f64) -> f64 {
    let a1 = 1.0 - alpha;
    ((t as f64 + 1.0).powf(a1) - tail.ln() * a1 / beta).powf(1.0 / a1)
}

/// `(t^{−α} G_t^∞ − 1/β) / (β^{−1/(1−α)} Γ(1/(1−α)) t^{α−1})` at each `t ∈ ts`, where
/// `G_t^∞` is the infinite sum truncated once the product falls below `tail`.
/// Entries whose truncation horizon would exceed `cap` are `None`.
pub fn q_uni_tail_ratio(alpha: f64, beta: f64, ts: &[u64], tail: f64, cap: u64) -> Result<Vec<Option<f64>>> {
    check(alpha, beta)?;
    let p = 1.0 / (1.0 - alpha);
    let scale = beta.powf(-p) * statrs::function::gamma::gamma(p);
    let horizons: Vec<f64> = ts.iter().map(|&t| horizon_for_tail(alpha, beta, t, tail)).collect();
    let feasible: Vec<bool> = horizons.iter().map(|&h| h <= cap as f64).collect();
    let horizon = ts
        .iter()
        .zip(&horizons)
        .zip(&feasible)
        .filter(|(_, &ok)| ok)
        .map(|((&t, &h), _)| (h.ceil() as u64).max(t))
        .max();
    let Some(horizon) = horizon else {
        return Ok(vec![None; ts.len()]);
    };
    let g = forward_sums(alpha, beta, horizon)?;
    ts.iter()
        .zip(feasible)
        .map(|(&t, ok)| {
            if t == 0 {
                return Err(Error::InvalidInput("t must be positive".into()));
            }
            if !ok {
                return Ok(None);
            }
            let tf = t as f64;
            Ok(Some((g[(t - 1) as usize] * tf.powf(-alpha) - 1.0 / beta) / (scale * tf.powf(alpha - 1.0))))
        })
        .collect()
}

/// `Π_{k=t+1}^{T}(1 − βk^{−α})`: the weight of the last retained term.
pub fn tail_mass(alpha: f64, beta: f64, t: u64, horizon: u64) -> f64 {
    (t + 1..=horizon).map(|k| factor(alpha, beta, k).ln()).sum::<f64>().exp()
}
