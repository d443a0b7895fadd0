//! Runs a convergence sweep and writes it as CSV, then checks the round trip.
//!
//! Usage: `cargo run --example sweep_to_csv -- [config.json] [out.csv]`

use std::path::PathBuf;

use insider_lab::harness::{emit, load, run_sweep, verify_all, ExperimentConfig, OutputFormat};

fn main() -> insider_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = match args.next() {
        Some(p) => ExperimentConfig::load(&PathBuf::from(p))?,
        None => ExperimentConfig::from_json(include_str!("configs/convergence.json"))?,
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("insider_sweep.csv"));

    let small = ExperimentConfig {
        n: config.n.iter().copied().filter(|&n| n <= 12).collect(),
        ..config.clone()
    };
    if !small.n.is_empty() {
        let summary = verify_all(&small)?;
        println!("verification on n ≤ 12: all pass = {}", summary.all_pass);
    }

    let result = run_sweep(&config)?;
    emit(&result, OutputFormat::Csv, &out)?;
    let back = load(&out, OutputFormat::Csv)?;
    assert_eq!(back, result);
    print!("{}", std::fs::read_to_string(&out).map_err(|source| insider_lab::LabError::Io { path: out.clone(), source })?);
    println!("wrote {}", out.display());
    Ok(())
}
