//! Experiment dispatch and report emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use super::mtg::{
    bernstein_experiment, hoeffding_experiment, martingale_generator, mtg_berry_esseen_experiment,
    random_matrix_functions,
};
use super::td::{
    coverage_table, discrepancy_summary, limiting_covariance, rate_summary, simulate_td, DiscrepancyParams,
    DiscrepancyRow, TdSweep,
};
use crate::covariance::{default_gamma_tol, gamma_tilde, lambda_star, lambda_t_threshold};
use crate::error::{Error, Result};
use crate::martingale::{BoundPoint, MartingaleSpec, Verdict};
use crate::mrp::MrpModel;

pub const DEFAULT_OUT_DIR: &str = "mcuq-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    /// A bound with fully explicit constants was violated.
    pub strict_violation: bool,
    pub summary: serde_json::Value,
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Rows are prefixed with the master seed and config hash.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self, seed: u64, hash: &str) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["seed".to_string(), "config_hash".to_string()];
        header.extend(self.header.iter().cloned());
        w.write_record(&header)?;
        let seed = seed.to_string();
        for row in &self.rows {
            let mut rec = vec![seed.clone(), hash.to_string()];
            rec.extend(row.iter().cloned());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Dominates => "dominates",
        Verdict::Violated => "violated",
    }
}

fn bound_cells(p: &BoundPoint) -> Vec<String> {
    vec![
        num(p.grid),
        num(p.closed_form),
        num(p.empirical),
        num(p.ci_lo),
        num(p.ci_hi),
        verdict_str(p.verdict).to_string(),
    ]
}

fn discrepancy_table(rows: &[DiscrepancyRow]) -> Table {
    let mut t = Table::new(&["T", "estimator_kind", "value", "ci_lo", "ci_hi"]);
    for r in rows {
        t.push(vec![
            r.t.to_string(),
            r.estimator_kind.as_str().to_string(),
            num(r.value),
            num(r.ci_lo),
            num(r.ci_hi),
        ]);
    }
    t
}

struct Emitter<'a> {
    dir: PathBuf,
    seed: u64,
    hash: &'a str,
    files: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, &table.to_csv(self.seed, self.hash)?)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.dir.join(name);
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        self.files.push(path);
        Ok(())
    }
}

fn td_params(cfg: &ExperimentConfig, mrp: &MrpModel) -> (f64, f64) {
    (cfg.td.eta0.unwrap_or_else(|| mrp.default_eta0()), cfg.td.alpha)
}

fn discrepancy_params(cfg: &ExperimentConfig) -> DiscrepancyParams {
    DiscrepancyParams {
        n_directions: cfg.n_directions,
        direction_batches: cfg.direction_batches,
        n_boot: cfg.n_bootstrap,
        sliced: true,
    }
}

fn sweep_for(cfg: &ExperimentConfig, mrp: &MrpModel) -> Result<TdSweep> {
    let (eta0, alpha) = td_params(cfg, mrp);
    simulate_td(mrp, eta0, alpha, &cfg.t_grid, cfg.replications, cfg.seed)
}

fn run_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Run the configured experiment and write its CSV and JSON reports to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_pool(cfg.workers, || dispatch(cfg))?.map_err(|e| e.with_context(cfg.kind.as_str()))
}

fn dispatch(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let hash = cfg.hash();
    let mrp = cfg.model.build().map_err(|e| e.with_context("model"))?;
    let mut em = Emitter {
        dir: out_dir(cfg),
        seed: cfg.seed,
        hash: &hash,
        files: Vec::new(),
    };
    let kind = cfg.kind;
    let mut strict_violation = false;
    let summary = match kind {
        ExperimentKind::TdRate => {
            let (gamma, _) = gamma_tilde(&mrp, default_gamma_tol(&mrp))?;
            let lam = lambda_star(mrp.a_mat(), &gamma)?;
            let sweep = sweep_for(cfg, &mrp)?;
            let rate = rate_summary(&sweep, &lam, cfg.n_bootstrap)?;
            let mut t = Table::new(&["T", "median_error", "reference", "ratio"]);
            for r in &rate.rows {
                t.push(vec![r.t.to_string(), num(r.median_error), num(r.reference), num(r.ratio)]);
            }
            em.csv("td-rate.csv", &t)?;
            em.csv("td-rate-replications.csv", &replication_table(&sweep))?;
            json!({ "eta0": sweep.eta0, "alpha": sweep.alpha, "trace_lambda_star": lam.trace(), "rows": rate.rows, "fit": rate.fit })
        }
        ExperimentKind::TdCoverage => {
            let (gamma, lam) = limiting_covariance(&mrp)?;
            let (eta0, alpha) = td_params(cfg, &mrp);
            let threshold = lambda_t_threshold(&mrp, eta0, alpha, &gamma);
            let sweep = sweep_for(cfg, &mrp)?;
            let rows = coverage_table(&sweep, &lam, &cfg.nominal, threshold)?;
            let mut t = Table::new(&[
                "T",
                "nominal",
                "covered",
                "replications",
                "coverage",
                "ci_lo",
                "ci_hi",
                "below_threshold",
            ]);
            for r in &rows {
                t.push(vec![
                    r.t.to_string(),
                    num(r.nominal),
                    r.covered.to_string(),
                    r.replications.to_string(),
                    num(r.coverage),
                    num(r.ci_lo),
                    num(r.ci_hi),
                    r.below_threshold.to_string(),
                ]);
            }
            em.csv("td-coverage.csv", &t)?;
            json!({ "eta0": eta0, "alpha": alpha, "threshold_T": threshold, "rows": rows })
        }
        ExperimentKind::TdBerryEsseen => {
            let (_, lam) = limiting_covariance(&mrp)?;
            let sweep = sweep_for(cfg, &mrp)?;
            let s = discrepancy_summary(&sweep.t_grid, &sweep.scaled, &lam, discrepancy_params(cfg), cfg.seed)?;
            em.csv("td-berry-esseen.csv", &discrepancy_table(&s.rows))?;
            json!({ "eta0": sweep.eta0, "alpha": sweep.alpha, "rows": s.rows, "fit": s.fit })
        }
        ExperimentKind::Bernstein => {
            let chain = mrp.chain();
            let g = martingale_generator(chain, cfg.g.as_deref(), cfg.martingale_dim, cfg.seed)?;
            let spec = MartingaleSpec::build(chain, g)?;
            let e = bernstein_experiment(&spec, chain, &cfg.t_grid, &cfg.deltas, cfg.replications, cfg.seed)?;
            let mut t = Table::new(&[
                "n",
                "grid_point",
                "closed_form",
                "empirical",
                "ci_lo",
                "ci_hi",
                "verdict",
                "rhs",
                "calibration",
            ]);
            for (report, rhs) in e.reports.iter().zip(&e.rhs) {
                for (p, r) in report.points.iter().zip(rhs) {
                    let mut row = vec![report.n.to_string()];
                    row.extend(bound_cells(p));
                    row.push(num(*r));
                    row.push(num(report.calibration.unwrap_or(f64::NAN)));
                    t.push(row);
                }
            }
            em.csv("bernstein.csv", &t)?;
            json!({ "reports": e.reports, "rhs": e.rhs, "calibration_spread": e.calibration_spread })
        }
        ExperimentKind::Hoeffding => {
            let chain = mrp.chain();
            let funcs = random_matrix_functions(chain, cfg.matrix_dim, cfg.n_matrix_functions, cfg.seed)?;
            let e = hoeffding_experiment(&funcs, chain, &cfg.t_grid, &cfg.epsilons, cfg.replications, cfg.seed)?;
            strict_violation = e.any_violation();
            let mut t = Table::new(&[
                "function",
                "n",
                "grid_point",
                "closed_form",
                "empirical",
                "ci_lo",
                "ci_hi",
                "verdict",
            ]);
            for (report, k) in e.reports.iter().zip(&e.function_index) {
                for p in &report.points {
                    let mut row = vec![k.to_string(), report.n.to_string()];
                    row.extend(bound_cells(p));
                    t.push(row);
                }
            }
            em.csv("hoeffding.csv", &t)?;
            json!({ "reports": e.reports, "function_index": e.function_index, "any_violation": strict_violation })
        }
        ExperimentKind::MtgBerryEsseen => {
            let chain = mrp.chain();
            let g = martingale_generator(chain, cfg.g.as_deref(), cfg.martingale_dim, cfg.seed)?;
            let spec = MartingaleSpec::build(chain, g)?;
            let e = mtg_berry_esseen_experiment(&spec, chain, &cfg.t_grid, cfg.replications, discrepancy_params(cfg), cfg.seed)?;
            em.csv("mtg-berry-esseen.csv", &discrepancy_table(&e.discrepancy.rows))?;
            json!({ "rows": e.discrepancy.rows, "fit": e.discrepancy.fit, "rhs_unit_constants": e.rhs })
        }
    };
    finish(em, kind, cfg.seed, &hash, strict_violation, summary)
}

fn finish(
    mut em: Emitter<'_>,
    kind: ExperimentKind,
    seed: u64,
    hash: &str,
    strict_violation: bool,
    summary: serde_json::Value,
) -> Result<ExperimentReport> {
    let json_name = format!("{}.json", kind.as_str());
    let body = json!({
        "schema": SCHEMA_VERSION,
        "kind": kind,
        "seed": seed,
        "config_hash": hash,
        "strict_violation": strict_violation,
        "summary": summary,
    });
    em.json(&json_name, &body)?;
    Ok(ExperimentReport {
        schema: SCHEMA_VERSION,
        kind,
        seed,
        config_hash: hash.to_string(),
        files: em.files,
        strict_violation,
        summary,
    })
}

/// One row per replication: `stream_id, T, error_bar`, then the error at each checkpoint.
fn replication_table(sweep: &TdSweep) -> Table {
    let horizon = *sweep.t_grid.last().expect("nonempty grid");
    let mut header = vec!["stream_id".to_string(), "T".to_string(), "error_bar".to_string()];
    header.extend(sweep.t_grid.iter().map(|t| format!("error_at_{t}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for r in 0..sweep.replications() {
        let mut row = vec![r.to_string(), horizon.to_string(), num(sweep.errors[sweep.t_grid.len() - 1][r])];
        row.extend(sweep.errors.iter().map(|e| num(e[r])));
        table.push(row);
    }
    table
}

/// Plain replicated TD runs (any TD kind): per-replication CSV and a JSON summary.
pub fn run_td(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if !cfg.kind.is_td() {
        return Err(Error::Config(format!("td run needs a TD experiment kind, got {}", cfg.kind.as_str())));
    }
    run_pool(cfg.workers, || {
        let hash = cfg.hash();
        let mrp = cfg.model.build().map_err(|e| e.with_context("model"))?;
        let sweep = sweep_for(cfg, &mrp)?;
        let mut em = Emitter {
            dir: out_dir(cfg),
            seed: cfg.seed,
            hash: &hash,
            files: Vec::new(),
        };
        em.csv("td-run.csv", &replication_table(&sweep))?;
        let summary = json!({
            "eta0": sweep.eta0,
            "alpha": sweep.alpha,
            "theta_star": mrp.theta_star().as_slice(),
            "replications": sweep.replications(),
        });
        let path = em.dir.join("td-run.json");
        let body = json!({ "schema": SCHEMA_VERSION, "seed": cfg.seed, "config_hash": hash, "summary": summary });
        write_atomic(&path, &serde_json::to_vec_pretty(&body)?)?;
        em.files.push(path);
        Ok(ExperimentReport {
            schema: SCHEMA_VERSION,
            kind: cfg.kind,
            seed: cfg.seed,
            config_hash: hash.clone(),
            files: em.files,
            strict_violation: false,
            summary,
        })
    })?
    .map_err(|e: Error| e.with_context("td run"))
}
