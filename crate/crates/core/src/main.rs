use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use boco::arma::{self, ArmaStream};
use boco::harness::{self, ExperimentConfig, Framework, SummaryStats};
use boco::rng::{self, StreamTag};
use boco::{BocoError, Result};

#[derive(Parser)]
#[command(name = "boco", version, about = "Bayesian online contextual optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one framework over several trials and write stage, curve and summary CSVs.
    Run {
        #[arg(long, value_parser = parse_framework)]
        framework: Option<Framework>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `key = value` experiment file; flags on the command line win.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run trials one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Write the data stream of trial 0 as CSV.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Recompute summary and curve files from the stage CSVs in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_framework(s: &str) -> std::result::Result<Framework, String> {
    Framework::parse(s).ok_or_else(|| format!("expected one of bma, bgs, pto, dfl; got {s:?}"))
}

fn print_summary(stats: &[SummaryStats]) {
    println!("framework  trials     T   r_T (std)          r_half (std)       feas_T (std)     feas_half (std)");
    for s in stats {
        println!(
            "{:<9} {:>7} {:>5}   {:>7.3} ({:>6.3})   {:>7.3} ({:>6.3})   {:>5.3} ({:>5.3})   {:>5.3} ({:>5.3})",
            s.framework.tag(),
            s.trials,
            s.horizon,
            s.reward_full.mean,
            s.reward_full.std,
            s.reward_half.mean,
            s.reward_half.std,
            s.feas_full.mean,
            s.feas_full.std,
            s.feas_half.mean,
            s.feas_half.std
        );
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = path {
        cfg.apply_file(p)?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { framework, trials, horizon, seed, config, out, serial } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(f) = framework {
                cfg.framework = f;
            }
            if let Some(v) = trials {
                cfg.trials = v;
            }
            if let Some(v) = horizon {
                cfg.horizon = v;
            }
            if let Some(v) = seed {
                cfg.base_seed = v;
            }
            if let Some(v) = out {
                cfg.out = v;
            }
            if serial {
                cfg.parallel = false;
            }
            let stats = harness::run_experiment(&cfg)?;
            print_summary(std::slice::from_ref(&stats));
        }
        Command::Generate { seed, horizon, out, config } => {
            let cfg = load_config(config.as_ref())?;
            let mut stream = ArmaStream::new(cfg.arma, rng::stream_seed(seed, 0, StreamTag::Data))?;
            let data = (0..horizon).map(|_| stream.next_datum()).collect::<Result<Vec<_>>>()?;
            let file = File::create(&out).map_err(|e| io_err(&out, e))?;
            arma::write_stream_csv(&data, BufWriter::new(file)).map_err(|e| io_err(&out, e))?;
        }
        Command::Report { input } => {
            let stats = harness::report(&input)?;
            print_summary(&stats);
        }
    }
    Ok(())
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> BocoError {
    BocoError::Io { path: path.to_path_buf(), source: e }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BocoError::Argument(_) | BocoError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
