use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfcov::config::{
    load_config, BenchConfig, EstimateConfig, MetricConfig, PilotConfig, PlanConfig,
};
use mfcov::error::CliError;
use mfcov::io::{summary_path, to_json_string, write_output};

/// Multi-fidelity covariance estimation: pilot studies, optimal sample
/// allocation, estimation, budget-sweep benchmarks, and metric learning.
#[derive(Parser)]
#[command(name = "mfcov", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path (stdout when omitted; benchmarks also write a
    /// `*_summary.csv` sibling when a path is given).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's root_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate generalized variances and correlations from a pilot study.
    Pilot(CommonArgs),
    /// Compute the optimal sample allocation for a budget.
    Plan(CommonArgs),
    /// Compute one covariance estimate with diagnostics.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Cross-check the LEMF estimate against its barycenter form.
        #[arg(long)]
        verify_frechet: bool,
    },
    /// Budget-sweep benchmark of the estimators (CSV output).
    Bench(CommonArgs),
    /// Metric-learning pipeline comparison (CSV output).
    Metric(CommonArgs),
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pilot(args) => {
            let mut cfg: PilotConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.root_seed = seed;
            }
            let out = mfcov::cmd_pilot(&cfg)?;
            let text = to_json_string(&out)?;
            write_output(args.out.or(cfg.output).as_deref(), &text)
        }
        Command::Plan(args) => {
            let cfg: PlanConfig = load_config(&args.config)?;
            let out = mfcov::cmd_plan(&cfg)?;
            let text = to_json_string(&out)?;
            write_output(args.out.or(cfg.output).as_deref(), &text)
        }
        Command::Estimate {
            common,
            verify_frechet,
        } => {
            let mut cfg: EstimateConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.root_seed = Some(seed);
            }
            let out = mfcov::cmd_estimate(&cfg, verify_frechet)?;
            let text = to_json_string(&out)?;
            write_output(common.out.or(cfg.output).as_deref(), &text)
        }
        Command::Bench(args) => {
            let mut cfg: BenchConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.root_seed = seed;
            }
            let out = mfcov::cmd_bench(&cfg)?;
            match args.out.or(cfg.output.clone()) {
                Some(path) => {
                    write_output(Some(&path), &out.rows_csv)?;
                    write_output(Some(&summary_path(&path)), &out.summary_csv)
                }
                None => write_output(None, &out.rows_csv),
            }
        }
        Command::Metric(args) => {
            let mut cfg: MetricConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.root_seed = seed;
            }
            let out = mfcov::cmd_metric(&cfg)?;
            match args.out.or(cfg.output.clone()) {
                Some(path) => {
                    write_output(Some(&path), &out.rows_csv)?;
                    write_output(Some(&summary_path(&path)), &out.summary_csv)
                }
                None => write_output(None, &out.rows_csv),
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
