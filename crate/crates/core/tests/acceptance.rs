//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting so the workspace test run stays green while a
//! failing criterion is still visible. Set `MCUQ_ACCEPTANCE_STRICT=1` to turn
//! any FAIL into a nonzero exit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mcuq::covariance::{
    aq_norm_bound, default_gamma_tol, for_each_q, gamma_tilde, lambda_star, lambda_t_streaming, lambda_t_threshold,
    lyapunov_x, q_norm_bound, solve_lyapunov,
};
use mcuq::harness::mtg::{bernstein_experiment, hoeffding_experiment, martingale_generator, random_matrix_functions};
use mcuq::harness::{
    coverage_table, discrepancy_summary, generate_random_mrp, limiting_covariance, rate_summary, run_experiment,
    simulate_td, DiscrepancyParams, ExperimentConfig, ExperimentKind, ModelSource, ModelSpec, RandomMrpSpec, TdSweep,
};
use mcuq::linalg::{min_eigenvalue, op_norm, psd_le, Mat};
use mcuq::martingale::MartingaleSpec;
use mcuq::mrp::{MrpModel, StepSchedule};
use mcuq::rng::stream_rng;
use mcuq::steps;
use rand::Rng;

const SEED: u64 = 20240917;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn two_state() -> MrpModel {
    ModelSpec::load(&fixture_path("two_state.json")).unwrap().build().unwrap()
}

fn rel(residual: f64, scale: f64) -> f64 {
    residual / scale.max(f64::MIN_POSITIVE)
}

/// Fifty models of varied size, dimension and discount.
fn random_family() -> Vec<MrpModel> {
    let gammas = [0.3, 0.5, 0.7, 0.9, 0.99];
    (0..50u64)
        .map(|i| {
            let n_states = 5 + (i as usize % 6) * 9;
            generate_random_mrp(&RandomMrpSpec {
                n_states,
                branching: 3,
                dim: 2 + i as usize % 4,
                gamma: gammas[i as usize % 5],
                seed: SEED + i,
                min_lambda0: 1e-3,
            })
            .unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------- criterion 1

fn q_telescoping_residual(mrp: &MrpModel, eta0: f64, horizon: u64) -> f64 {
    let a = mrp.a_mat();
    let d = a.nrows();
    let a_inv = a.clone().try_inverse().unwrap();
    let schedule = StepSchedule::new(eta0, 0.75, horizon);
    let mut lhs = Mat::zeros(d, d);
    for_each_q(a, &schedule, |_, q| lhs += q - &a_inv);
    let eye = Mat::identity(d, d);
    let mut prod = eye.clone();
    let mut sum = Mat::zeros(d, d);
    for k in 1..=horizon {
        prod = (&eye - a * schedule.eta(k)) * prod;
        sum += &prod;
    }
    let rhs = -(&a_inv * sum);
    rel((lhs - &rhs).norm(), rhs.norm())
}

fn criterion_1() -> Outcome {
    let mut worst: [f64; 4] = [0.0; 4];
    let mut models = vec![two_state()];
    models.extend(random_family().into_iter().step_by(10));
    for mrp in &models {
        let eta0 = mrp.default_eta0();
        worst[0] = worst[0].max(q_telescoping_residual(mrp, eta0, 4000));

        let (gamma, _) = gamma_tilde(mrp, default_gamma_tol(mrp)).unwrap();
        let lam = lambda_star(mrp.a_mat(), &gamma).unwrap();
        let x = lyapunov_x(mrp.a_mat(), &lam, eta0).unwrap();
        let a = mrp.a_mat();
        let res = (eta0 * (a * &x + &x * a.transpose()) - &lam).norm();
        worst[1] = worst[1].max(rel(res, lam.norm()));

        let chain = mrp.chain();
        let g = martingale_generator(chain, None, 3, SEED).unwrap();
        let spec = MartingaleSpec::build(chain, g.clone()).unwrap();
        worst[2] = worst[2].max(rel(spec.poisson_residual(), g.amax()));

        for r in 0..20 {
            let path = chain.sample_trajectory(2000, SEED, r);
            let scale: f64 = path.states[1..].iter().map(|&s| g.row(s).amax()).sum();
            worst[3] = worst[3].max(rel(spec.telescoping_residual(&path.states), scale));
        }
    }
    let pass = worst.iter().all(|&w| w <= 1e-8);
    Outcome::new(
        pass,
        format!(
            "{} models; relative residuals Q-telescoping {:.1e}, Lyapunov {:.1e}, Poisson {:.1e}, martingale telescoping {:.1e} (tol 1e-8)",
            models.len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3]
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

const TOL: f64 = 1e-9;

/// Eigenvalue orderings and norm bounds on one model; returns failed check names.
fn matrix_facts(mrp: &MrpModel, seed: u64) -> Vec<&'static str> {
    let mut failed = Vec::new();
    let a = mrp.a_mat();
    let d = a.nrows();
    let sigma = mrp.sigma_mat();
    let g = mrp.gamma();
    let l0 = mrp.lambda0();
    let ls = mrp.lambda_sigma();
    let sym = a + a.transpose();
    let scale = op_norm(&sym).max(1e-300);

    if !(psd_le(&(sigma * (2.0 * (1.0 - g))), &sym, TOL * scale) && psd_le(&sym, &(sigma * (2.0 * (1.0 + g))), TOL * scale)) {
        failed.push("A+A^T sandwich");
    }
    let re_min = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if re_min < (1.0 - g) * l0 * (1.0 - TOL) {
        failed.push("Re eig(A)");
    }
    if !psd_le(&mrp.expected_ata(), &sym, TOL * scale) {
        failed.push("E[At^T At]");
    }
    if !psd_le(&(a.transpose() * a), &(&sym * ls), TOL * scale) {
        failed.push("A^T A");
    }
    let eye = Mat::identity(d, d);
    let eta_max = mrp.max_eta0();
    for k in 1..=40 {
        let eta = eta_max * k as f64 / 40.0 * (1.0 - 1e-12);
        if op_norm(&(&eye - a * eta)) > (1.0 - 0.5 * (1.0 - g) * l0 * eta) * (1.0 + TOL) {
            failed.push("contraction");
            break;
        }
    }
    let a_inv = a.clone().try_inverse().unwrap();
    if op_norm(&a_inv) > (1.0 + TOL) / (l0 * (1.0 - g)) {
        failed.push("A^-1 norm");
    }

    // Lyapunov solution bounds for random PSD right-hand sides.
    let mut rng = stream_rng(seed, 0);
    for _ in 0..3 {
        let b = Mat::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        let e = &b * b.transpose();
        let x = solve_lyapunov(a, &e).unwrap();
        let c = 1.0 / (2.0 * (1.0 - g) * l0);
        if min_eigenvalue(&x) < -TOL * op_norm(&x)
            || op_norm(&x) > c * op_norm(&e) * (1.0 + TOL)
            || x.trace() > c * e.trace() * (1.0 + TOL)
        {
            failed.push("Lyapunov bounds");
            break;
        }
    }

    // Q_t and A Q_t bounds along a full horizon.
    let eta0 = mrp.default_eta0();
    let alpha = 0.75;
    let horizon = 4096;
    let q_bound = q_norm_bound(mrp, eta0, alpha);
    let mut q_ok = true;
    let mut aq_ok = true;
    for_each_q(a, &StepSchedule::new(eta0, alpha, horizon), |t, q| {
        if op_norm(q) > q_bound * (1.0 + TOL) {
            q_ok = false;
        }
        if op_norm(&(a * q)) > aq_norm_bound(mrp, eta0, alpha, t as u64) * (1.0 + TOL) {
            aq_ok = false;
        }
    });
    if !q_ok {
        failed.push("Q bound");
    }
    if !aq_ok {
        failed.push("AQ bound");
    }
    failed
}

const ALPHAS: [f64; 3] = [0.6, 0.75, 0.9];
const BETAS: [f64; 3] = [0.1, 0.5, 0.9];
const T_MAX: u64 = 1_000_000;
/// `β t^{1−α}/(1−α)` at `T_MAX` above which the asymptotic equivalence is checked.
const R3_REGIME: f64 = 50.0;
const R3_TOL: f64 = 0.1;

fn criterion_2() -> Outcome {
    let models = random_family();
    let mut failures = Vec::new();
    for (i, mrp) in models.iter().enumerate() {
        for name in matrix_facts(mrp, SEED + i as u64) {
            failures.push(format!("model {i}: {name}"));
        }
    }

    let mut worst_r = 0.0f64;
    let mut worst_q1 = 0.0f64;
    let mut worst_q2 = 0.0f64;
    let mut worst_r3 = 0.0f64;
    let mut r3_checked = 0;
    let mut q2_checked = 0;
    let mut q2_skipped = 0;
    let ts = [1_000u64, 10_000, 100_000, 1_000_000];
    for &alpha in &ALPHAS {
        for &beta in &BETAS {
            let mut ratios = vec![
                steps::r1_worst_ratio(alpha, beta, T_MAX).unwrap(),
                steps::r4_worst_ratio(alpha, beta, T_MAX).unwrap(),
            ];
            for frac in [0.25, 0.5, 1.0] {
                ratios.push(steps::r2_worst_ratio(alpha, beta, 1.0 + frac * alpha, T_MAX).unwrap());
            }
            worst_r = ratios.iter().copied().fold(worst_r, f64::max);

            let regime = beta * (T_MAX as f64).powf(1.0 - alpha) / (1.0 - alpha);
            if regime >= R3_REGIME {
                let r3 = steps::r3_normalized(alpha, beta, &ts).unwrap();
                let gap = (r3.last().unwrap() - 1.0).abs();
                worst_r3 = worst_r3.max(gap);
                r3_checked += 1;
            }

            worst_q1 = worst_q1.max(steps::q_uni_worst_ratio(alpha, beta, T_MAX).unwrap());
            for r in steps::q_uni_tail_ratio(alpha, beta, &ts, 1e-12, 50_000_000).unwrap() {
                match r {
                    Some(v) => {
                        worst_q2 = worst_q2.max(v);
                        q2_checked += 1;
                    }
                    None => q2_skipped += 1,
                }
            }
        }
    }
    if worst_r > 1.0 {
        failures.push(format!("step products ratio {worst_r:.3}"));
    }
    if worst_r3 > R3_TOL {
        failures.push(format!("R-3 gap {worst_r3:.3}"));
    }
    if worst_q1 > 1.0 {
        failures.push(format!("Q-uni-1 ratio {worst_q1:.3}"));
    }
    if worst_q2 > 1.0 || q2_checked == 0 {
        failures.push(format!("Q-uni-2 ratio {worst_q2:.3} over {q2_checked} points"));
    }
    let detail = format!(
        "{} models, 9 (α,β) pairs to t=1e6; step-product max ratio {worst_r:.3}, R-3 gap {worst_r3:.3} on {r3_checked} pairs, Q-uni-1 {worst_q1:.3}, Q-uni-2 {worst_q2:.3} ({q2_checked} points, {q2_skipped} beyond horizon cap){}",
        models.len(),
        if failures.is_empty() {
            String::new()
        } else {
            format!("; failures: {}", failures.join(", "))
        }
    );
    Outcome::new(failures.is_empty(), detail)
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let mrp = two_state();
    let chain = mrp.chain();
    let funcs = random_matrix_functions(chain, 2, 3, SEED).unwrap();
    let eps = [0.05, 0.1, 0.2, 0.3, 0.5, 1.0];
    let exp = hoeffding_experiment(&funcs, chain, &[1_000, 10_000], &eps, 2000, SEED).unwrap();
    let mut checked = 0;
    let mut violated = 0;
    let mut tightest = 0.0f64;
    for report in &exp.reports {
        for p in report.points.iter().filter(|p| p.closed_form <= 1.0) {
            checked += 1;
            if p.ci_lo > p.closed_form {
                violated += 1;
            }
            if p.empirical > 0.0 {
                tightest = tightest.max(p.empirical / p.closed_form);
            }
        }
    }
    Outcome::new(
        checked > 0 && violated == 0,
        format!("3 functions, n ∈ {{1e3, 1e4}}, 2000 replications; {checked} grid points with bound ≤ 1, {violated} violated; largest empirical / bound {tightest:.3}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let mrp = two_state();
    let chain = mrp.chain();
    let g = martingale_generator(chain, None, 2, SEED).unwrap();
    let spec = MartingaleSpec::build(chain, g).unwrap();
    let ns = [1_000u64, 10_000, 100_000];
    let exp = bernstein_experiment(&spec, chain, &ns, &[0.2, 0.1, 0.05, 0.01], 1000, SEED).unwrap();
    let cs: Vec<Option<f64>> = exp.reports.iter().map(|r| r.calibration).collect();
    let finite = cs.iter().all(|c| c.is_some_and(f64::is_finite));
    let pass = finite && exp.calibration_spread < 2.0;
    let shown: Vec<String> = cs
        .iter()
        .map(|c| c.map_or("none".into(), |v| format!("{v:.4}")))
        .collect();
    Outcome::new(
        pass,
        format!("c* at n = 1e3, 1e4, 1e5: [{}]; spread {:.3} (< 2)", shown.join(", "), exp.calibration_spread),
    )
}

// ---------------------------------------------------------------- criteria 5-7

const TD_GRID: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

fn first_replications(sweep: &TdSweep, reps: usize) -> TdSweep {
    TdSweep {
        t_grid: sweep.t_grid.clone(),
        eta0: sweep.eta0,
        alpha: sweep.alpha,
        seed: sweep.seed,
        errors: sweep.errors.iter().map(|e| e[..reps].to_vec()).collect(),
        scaled: sweep.scaled.iter().map(|s| s[..reps].to_vec()).collect(),
    }
}

fn criterion_5(sweep: &TdSweep, lam: &Mat, sim_secs: f64) -> Outcome {
    let sub = first_replications(sweep, 500);
    let summary = rate_summary(&sub, lam, 200).unwrap();
    let slope = summary.fit.slope;
    let last = summary.rows.last().unwrap();
    let ratios: Vec<String> = summary.rows.iter().map(|r| format!("{:.2}", r.ratio)).collect();
    let pass = (-0.6..=-0.4).contains(&slope) && last.ratio <= 3.0 && last.ratio >= 1.0 / 3.0 && sim_secs < 1200.0;
    Outcome::new(
        pass,
        format!(
            "500 replications; slope {slope:.4} (target [-0.6, -0.4]); median/√(TrΛ̃*/T) by T: [{}]; simulation {sim_secs:.0}s for 2000 replications",
            ratios.join(", ")
        ),
    )
}

fn criterion_6(sweep: &TdSweep, lam: &Mat, threshold: f64) -> Outcome {
    let rows = coverage_table(sweep, lam, &[0.9], threshold).unwrap();
    let row = rows.iter().find(|r| r.t == 1_000_000).unwrap();
    let all: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.coverage)).collect();
    Outcome::new(
        (0.87..=0.93).contains(&row.coverage),
        format!(
            "{} replications; 90% ellipsoid coverage at T = 1e6: {:.4} (target 0.90 ± 0.03); by T: [{}]",
            row.replications,
            row.coverage,
            all.join(", ")
        ),
    )
}

fn criterion_7(sweep: &TdSweep, lam: &Mat) -> Outcome {
    let params = DiscrepancyParams {
        n_directions: 64,
        direction_batches: 5,
        n_boot: 200,
        sliced: false,
    };
    let summary = discrepancy_summary(&sweep.t_grid, &sweep.scaled, lam, params, SEED).unwrap();
    let values: Vec<f64> = summary.rows.iter().map(|r| r.value).collect();
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    let fit = &summary.fit;
    let ci = fit.slope_ci;
    let excludes_zero = ci.is_some_and(|(_, hi)| hi < 0.0);
    Outcome::new(
        monotone && fit.slope < 0.0 && excludes_zero,
        format!(
            "half-space medians [{}]; slope {:.3}, bootstrap CI {}",
            values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
            fit.slope,
            ci.map_or("none".into(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"))
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

/// Fraction of the contraction limit `1/(2λΣ)` used as `η0`.
const EXPANSION_ETA_FRACTION: f64 = 0.9;

fn criterion_8() -> Outcome {
    let alpha = 0.75;
    let mut worst_band = 0.0f64;
    let mut bands = Vec::new();
    for i in 0..10u64 {
        let mrp = generate_random_mrp(&RandomMrpSpec {
            n_states: 50,
            branching: 3,
            dim: 2,
            gamma: 0.3,
            seed: SEED + 100 + i,
            min_lambda0: 1e-3,
        })
        .unwrap();
        let eta0 = EXPANSION_ETA_FRACTION * mrp.max_eta0();
        let (gamma, _) = gamma_tilde(&mrp, default_gamma_tol(&mrp)).unwrap();
        let lam = lambda_star(mrp.a_mat(), &gamma).unwrap();
        let x = lyapunov_x(mrp.a_mat(), &lam, eta0).unwrap();
        let g_norm = op_norm(&gamma);
        let ratios: Vec<f64> = (10..=20)
            .map(|k| {
                let t = 1u64 << k;
                let tf = t as f64;
                let lt = lambda_t_streaming(mrp.a_mat(), &gamma, &StepSchedule::new(eta0, alpha, t));
                let resid = &lt - &lam - &x * tf.powf(alpha - 1.0);
                op_norm(&resid) / (tf.powf(2.0 * alpha - 2.0) * g_norm)
            })
            .collect();
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let band = hi / lo;
        worst_band = worst_band.max(band);
        bands.push(format!("{band:.2}"));
    }
    Outcome::new(
        worst_band <= 4.0,
        format!("10 models, T = 2^10..2^20; max/min ratio per model [{}] (band ≤ 4)", bands.join(", ")),
    )
}

// ---------------------------------------------------------------- criterion 9

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "csv").then(|| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        })
        .collect();
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let configs = [
        {
            let mut c = ExperimentConfig::new(
                ExperimentKind::TdRate,
                ModelSource::File(fixture_path("two_state.json")),
                vec![1_000, 3_000, 10_000, 30_000],
                200,
                SEED,
            );
            c.n_bootstrap = 50;
            c
        },
        {
            let mut c = ExperimentConfig::new(
                ExperimentKind::TdBerryEsseen,
                ModelSource::File(fixture_path("two_state.json")),
                vec![1_000, 3_000, 10_000, 30_000],
                200,
                SEED,
            );
            c.n_bootstrap = 50;
            c
        },
        {
            let mut c = ExperimentConfig::new(
                ExperimentKind::Bernstein,
                ModelSource::Random(serde_json::from_slice(&std::fs::read(fixture_path("random_50.json")).unwrap()).unwrap()),
                vec![1_000, 10_000],
                200,
                SEED,
            );
            c.deltas = vec![0.1, 0.05];
            c
        },
    ];
    let mut files = 0;
    let mut mismatched = Vec::new();
    for cfg in configs {
        let runs: Vec<Vec<(String, Vec<u8>)>> = [1usize, 2]
            .iter()
            .map(|&w| {
                let dir = tempfile::tempdir().unwrap();
                let mut c = cfg.clone();
                c.workers = Some(w);
                c.out = Some(dir.path().to_path_buf());
                run_experiment(&c).unwrap();
                csv_bytes(dir.path())
            })
            .collect();
        files += runs[0].len();
        if runs[0] != runs[1] || runs[0].is_empty() {
            mismatched.push(cfg.kind.as_str());
        }
    }
    Outcome::new(
        mismatched.is_empty(),
        format!("td-rate, td-berry-esseen and bernstein sweeps at 1 vs 2 workers; {files} CSV files compared; mismatches: {mismatched:?}"),
    )
}

// ---------------------------------------------------------------- driver

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, budget: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut outcome = f();
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = budget {
            if secs >= limit {
                outcome.pass = false;
                outcome.detail.push_str(&format!("; runtime {secs:.1}s over {limit}s"));
            }
        }
        let line = format!(
            "{} criterion {id} {name}: {} [{secs:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        println!("{line}");
        results.push((id, name, outcome, secs));
    };

    record(1, "algebraic identities", Some(10.0), &mut criterion_1);
    record(2, "lemma facts on random models", Some(60.0), &mut criterion_2);
    record(3, "matrix Hoeffding dominance", Some(300.0), &mut criterion_3);
    record(4, "Bernstein calibration", None, &mut criterion_4);

    let mrp = two_state();
    let eta0 = mrp.max_eta0();
    let (gamma, lam) = limiting_covariance(&mrp).unwrap();
    let threshold = lambda_t_threshold(&mrp, eta0, 0.75, &gamma);
    let start = Instant::now();
    let sweep = simulate_td(&mrp, eta0, 0.75, &TD_GRID, 2000, SEED).unwrap();
    let sim_secs = start.elapsed().as_secs_f64();
    record(5, "TD rate", None, &mut || criterion_5(&sweep, &lam, sim_secs));
    record(6, "CLT coverage", None, &mut || criterion_6(&sweep, &lam, threshold));
    record(7, "Berry-Esseen trend", None, &mut || criterion_7(&sweep, &lam));

    record(8, "finite-horizon covariance expansion", None, &mut criterion_8);
    record(9, "determinism across worker counts", None, &mut criterion_9);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (criteria {failed:?})")
        }
    );
    if !failed.is_empty() && std::env::var("MCUQ_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
