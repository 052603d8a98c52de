use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcuq::covariance::CovarianceSet;
use mcuq::harness::{
    analyze_chain, run_experiment, run_td, write_atomic, ChainSpec, ExperimentConfig, ExperimentKind, ExperimentReport,
    ModelSpec,
};
use mcuq::Error;

#[derive(Parser)]
#[command(name = "mcuq", version, about = "Markov-chain TD uncertainty experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Markov chain analytics.
    Chain {
        #[command(subcommand)]
        action: ChainAction,
    },
    /// TD runs.
    Td {
        #[command(subcommand)]
        action: TdAction,
    },
    /// Run any experiment config.
    Sweep { config: PathBuf },
    /// Martingale bound checks (bernstein, hoeffding, mtg-berry-esseen).
    VerifyBounds { config: PathBuf },
    /// Confidence-ellipsoid coverage of averaged TD.
    Coverage { config: PathBuf },
    /// Exact covariance matrices for a model.
    Covariance {
        model: PathBuf,
        #[arg(long)]
        eta0: Option<f64>,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        /// Horizons at which to report the finite-T covariance.
        #[arg(long, value_delimiter = ',', default_value = "1024,65536")]
        horizons: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum ChainAction {
    Analyze { spec: PathBuf },
}

#[derive(Subcommand)]
enum TdAction {
    Run { config: PathBuf },
}

fn load_config(path: &Path, g: &Global) -> mcuq::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    if g.out.is_some() {
        cfg.out = g.out.clone();
    }
    Ok(cfg)
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>, name: &str) -> mcuq::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = out {
        write_atomic(&dir.join(name), format!("{text}\n").as_bytes())?;
    }
    Ok(())
}

fn print_report(report: &ExperimentReport) -> mcuq::Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run(cli: Cli) -> mcuq::Result<bool> {
    let g = &cli.global;
    match cli.command {
        Command::Chain {
            action: ChainAction::Analyze { spec },
        } => {
            let chain = ChainSpec::load(&spec)?.build()?;
            let analysis = analyze_chain(&chain)?;
            emit_json(&serde_json::to_value(analysis)?, g.out.as_deref(), "chain-analysis.json")?;
            Ok(false)
        }
        Command::Td {
            action: TdAction::Run { config },
        } => {
            let report = run_td(&load_config(&config, g)?)?;
            print_report(&report)?;
            Ok(false)
        }
        Command::Sweep { config } => {
            let report = run_experiment(&load_config(&config, g)?)?;
            print_report(&report)?;
            Ok(report.strict_violation)
        }
        Command::VerifyBounds { config } => {
            let cfg = load_config(&config, g)?;
            if !matches!(
                cfg.kind,
                ExperimentKind::Bernstein | ExperimentKind::Hoeffding | ExperimentKind::MtgBerryEsseen
            ) {
                return Err(Error::Config(format!(
                    "verify-bounds needs a martingale experiment, got {}",
                    cfg.kind.as_str()
                )));
            }
            let report = run_experiment(&cfg)?;
            print_report(&report)?;
            Ok(report.strict_violation)
        }
        Command::Coverage { config } => {
            let mut cfg = load_config(&config, g)?;
            cfg.kind = ExperimentKind::TdCoverage;
            let report = run_experiment(&cfg)?;
            print_report(&report)?;
            Ok(false)
        }
        Command::Covariance {
            model,
            eta0,
            alpha,
            horizons,
        } => {
            let mrp = ModelSpec::load(&model)?.build()?;
            let eta0 = eta0.unwrap_or_else(|| mrp.default_eta0());
            let set = CovarianceSet::compute(&mrp, eta0, alpha, &horizons)?;
            emit_json(&set.to_json(), g.out.as_deref(), "covariance.json")?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("mcuq: a bound with explicit constants was violated");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("mcuq: {e}");
            ExitCode::from(1)
        }
    }
}
