//! `impactloc`: simulate → extract → train → localise → evaluate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod manifest;

#[derive(Parser, Debug)]
#[command(
    name = "impactloc",
    version,
    about = "TDOA impact localisation with multitask Gaussian processes"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// flat JSON config with dotted keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// ss, fs or none
    #[arg(long, global = true)]
    pub input_std: Option<String>,
    #[arg(long, global = true)]
    pub output_std: Option<String>,
    /// e.g. rbf,cos,comp
    #[arg(long, global = true)]
    pub kernels: Option<String>,
    /// fuse kernel predictions by model averaging
    #[arg(long, global = true)]
    pub fuse: bool,
    /// 1-based sensor numbers, e.g. 1,2,3,4
    #[arg(long, global = true)]
    pub sensors: Option<String>,
    /// ri35, ri15, ri9 or ext9
    #[arg(long, global = true)]
    pub subset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic impact campaign (and optionally waveforms)
    Simulate {
        /// also write per-sensor waveforms
        #[arg(long)]
        signals: bool,
        /// dataset file stem (default: lower-cased condition)
        #[arg(long)]
        name: Option<String>,
    },
    /// Pick arrivals from waveform directories and append TDOA records
    Extract {
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// threshold as a fraction of the envelope peak
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fit one GP model per kernel on a reference dataset
    Train {
        #[arg(long)]
        reference: PathBuf,
    },
    /// Predict impact locations for a target dataset
    Localise {
        /// model files or a directory holding model_*.json
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        targets: PathBuf,
    },
    /// Score predictions against true locations
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a full train/localise/evaluate experiment and write the report
    Report {
        /// reference dataset (default: synthetic reference campaign)
        #[arg(long, requires = "targets")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        targets: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = commands::effective_config(&cli.common)?;
    std::fs::create_dir_all(&cli.common.out_dir)?;
    let out = &cli.common.out_dir;
    match cli.command {
        Command::Simulate { signals, name } => {
            commands::simulate(cfg, out, signals, name.as_deref())
        }
        Command::Extract {
            signals,
            output,
            threshold,
        } => commands::extract(cfg, out, &signals, &output, threshold),
        Command::Train { reference } => commands::train(cfg, out, &reference),
        Command::Localise { models, targets } => commands::localise(cfg, out, &models, &targets),
        Command::Evaluate { predictions, truth } => {
            commands::evaluate(cfg, out, &predictions, &truth)
        }
        Command::Report { reference, targets } => {
            commands::report(cfg, out, reference.as_deref(), targets.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "error": e.to_string(), "causes": causes }));
            ExitCode::FAILURE
        }
    }
}
