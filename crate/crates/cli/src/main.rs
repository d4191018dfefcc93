use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use adas_core::experiment::{
    probe_snapshots, run_experiment, theory_check, RunConfig, TheoryCheckConfig,
};
use adas_core::AdasError;
use clap::{Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "adas", version, about = "Knowledge-gain scheduled SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the micro CNN and write metrics.csv / summary.txt.
    Train {
        /// Flat key = value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-epoch AT4 weight snapshots.
        #[arg(long)]
        snapshots: bool,
        /// Config overrides as `--key value` pairs, e.g. `--beta 0.85`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Compute block metrics from a directory of AT4 snapshots.
    Probe {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomised check of the monotone-gain step-size bound.
    TheoryCheck {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        rows: usize,
        #[arg(long, default_value_t = 8)]
        cols: usize,
        /// Use B = 0 in every trial.
        #[arg(long)]
        zero_update: bool,
    },
}

fn overrides_to_pairs(args: &[String]) -> Result<Vec<(String, String)>, AdasError> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            return Err(AdasError::config(flag.as_str(), "overrides must look like `--key value`"));
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| AdasError::config(key, "missing value"))?;
                (key.to_string(), value.clone())
            }
        };
        pairs.push((key, value));
    }
    Ok(pairs)
}

fn train(config: Option<PathBuf>, snapshots: bool, overrides: &[String]) -> Result<(), AdasError> {
    let mut cfg = match config {
        Some(path) => RunConfig::from_file(&path)?,
        None => RunConfig::default(),
    };
    for (key, value) in overrides_to_pairs(overrides)? {
        cfg.set(&key, &value)?;
    }
    cfg.snapshots |= snapshots;
    let summary = run_experiment(&cfg)?;
    println!(
        "epochs {} final_loss {} final_accuracy {} ({:.1}s)",
        summary.records.len(),
        summary.final_loss,
        summary.final_accuracy,
        summary.wall_seconds
    );
    println!("wrote {}", summary.metrics_path.display());
    Ok(())
}

fn probe(dir: PathBuf, out: PathBuf) -> Result<(), AdasError> {
    let report = probe_snapshots(&dir)?;
    fs::write(&out, report.to_csv())?;
    println!("rows {} warnings {}", report.rows.len(), report.warnings.len());
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, snapshots, overrides } => train(config, snapshots, &overrides),
        Command::Probe { dir, out } => probe(dir, out),
        Command::TheoryCheck { trials, seed, rows, cols, zero_update } => {
            theory_check(&TheoryCheckConfig { trials, seed, rows, cols, zero_update }).map(|r| println!("{r}"))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { EXIT_DATA } else { EXIT_USAGE })
        }
    }
}
