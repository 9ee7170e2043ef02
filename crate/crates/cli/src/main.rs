use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emarl_core::harness::{run_suite, sweep_inner, sweep_summary, Suite};
use emarl_core::{run, Error, ExperimentConfig, InnerLoop};

#[derive(Parser)]
#[command(
    name = "emarl",
    version,
    about = "Networked off-policy actor-critic simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV log and checkpoint.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; the checkpoint goes next to it with a `.ckpt` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one oracle check suite: etd, gradient, consensus or unbiased.
    Check {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the same seeds under several inner-loop modes.
    SweepInner {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: exact, local, or a number of averaging rounds.
        #[arg(long, default_value = "exact,3,1,local")]
        modes: String,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for an error raised while running experiments.
fn run_exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Ok(v) = std::env::var("EMARL_LOG_EVERY") {
        cfg.log_every = v.trim().parse().map_err(|_| Error::ConfigInvalid {
            assumption: "config",
            reason: format!("EMARL_LOG_EVERY must be a positive integer, got '{v}'"),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = load_config(config, seed)?;
    let csv = out
        .or_else(|| cfg.output.csv.clone())
        .unwrap_or_else(|| PathBuf::from("run.csv"));
    let ckpt = cfg
        .output
        .checkpoint
        .clone()
        .unwrap_or_else(|| csv.with_extension("ckpt"));
    let log = run(&cfg)?;
    write_file(&csv, &log.to_csv())?;
    write_file(&ckpt, &log.checkpoint)?;
    if let Some(j) = log.final_objective() {
        println!("final J_mu {j:.6}");
    }
    println!("wrote {} and {}", csv.display(), ckpt.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| Error::ConfigInvalid {
                assumption: "config",
                reason: format!("bad {what} '{s}'"),
            })
        })
        .collect()
}

fn cmd_sweep(config: &Path, modes: &str, seeds: Option<&str>, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config, None)?;
    let modes: Vec<InnerLoop> = parse_list(modes, "inner-loop mode")?;
    let seeds: Vec<u64> = match seeds {
        Some(s) => parse_list(s, "seed")?,
        None => vec![cfg.seed],
    };
    let entries = sweep_inner(&cfg, &seeds, &modes)?;
    for e in &entries {
        let path = out.join(format!("seed{}_{}.csv", e.seed, e.mode));
        write_file(&path, &e.log.to_csv())?;
    }
    let summary = sweep_summary(&entries);
    write_file(&out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => match cmd_run(&config, seed, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(run_exit_code(&e))
            }
        },
        Command::SweepInner {
            config,
            modes,
            seeds,
            out,
        } => match cmd_sweep(&config, &modes, seeds.as_deref(), &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(run_exit_code(&e))
            }
        },
        Command::Check { suite, seed } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            match run_suite(suite, seed) {
                Ok(results) => {
                    for r in &results {
                        println!("{}", r.line());
                    }
                    if results.iter().all(|r| r.pass) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
