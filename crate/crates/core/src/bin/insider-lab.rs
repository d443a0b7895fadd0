use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use insider_lab::harness::{emit, run_sweep, thread_pool, verify_all, ExperimentConfig, OutputFormat};
use insider_lab::measures::calibrate_emm;
use insider_lab::replicate::{replication_experiment_with, ReplicationSetup};
use insider_lab::walks::{make_step_distribution, StepSpec};
use insider_lab::{LabError, Result};

/// Insider utility maximization on random-walk lattices.
#[derive(Parser)]
#[command(name = "insider-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every invariant suite and print a JSON summary.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Calibrate the martingale measure for one step distribution.
    Emm {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
    },
    /// Public and insider values at a single n.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Convergence sweep written as CSV or JSON.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Delta-hedging experiment for every n in the config.
    Replicate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Verify { config } => {
            let summary = verify_all(&ExperimentConfig::load(&config)?)?;
            print_json(&summary);
            Ok(if summary.all_pass { 0 } else { 2 })
        }
        Command::Emm { dist, n } => {
            if n == 0 {
                return Err(LabError::InvalidArgument("n must be at least 1".into()));
            }
            let d = make_step_distribution(&StepSpec::from_name(&dist)?)?;
            let p = calibrate_emm(&d, n)?;
            print_json(&json!({
                "dist": dist,
                "n": n,
                "h": p.h,
                "a": p.a,
                "b": p.b,
                "density_residual": p.density_residual(&d),
                "martingale_residual": p.martingale_residual(&d),
            }));
            Ok(0)
        }
        Command::Solve { config, n } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.n = vec![n];
            let result = run_sweep(&cfg)?;
            print_json(&result.rows);
            Ok(if result.rows.iter().all(|r| r.is_ok()) { 0 } else { 2 })
        }
        Command::Sweep { config, out, format } => {
            let format: OutputFormat = format.parse()?;
            let result = run_sweep(&ExperimentConfig::load(&config)?)?;
            emit(&result, format, &out)?;
            let failed = result.rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!("{} rows written to {}, {failed} failed", result.rows.len(), out.display());
            Ok(0)
        }
        Command::Replicate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let resolved = cfg.resolve()?;
            let pool = thread_pool(cfg.thread_count())?;
            let results = pool.install(|| {
                cfg.n
                    .iter()
                    .map(|&n| {
                        replication_experiment_with(
                            &resolved.claim,
                            &ReplicationSetup {
                                dist: resolved.dist.clone(),
                                n,
                                t: cfg.t,
                                eps: cfg.eps,
                                trials: cfg.trials,
                                seed: cfg.seed,
                                measure: cfg.path_measure,
                            },
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            print_json(&results);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
