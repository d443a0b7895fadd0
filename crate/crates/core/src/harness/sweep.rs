use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedConfig};
use crate::error::{LabError, Result};
use crate::limits::{bsm_insider_value, bsm_public_value, ContinuousSignal};
use crate::measures::{calibrate_emm, EmmParams};
use crate::optimize::{insider_value_with, public_value};
use crate::signals::{conditional_density_table_at, ConditionalDensityTable};
use crate::walks::{build_lattice, LatticeEconomy};

pub const PUBLIC: &str = "public";
pub const INSIDER: &str = "insider";
pub const STATUS_OK: &str = "ok";

/// One `(n, x, variant)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub t: f64,
    pub x: f64,
    pub variant: String,
    pub value: Option<f64>,
    /// Continuous-time value, empty when no limit is available.
    pub limit: Option<f64>,
    pub abs_error: Option<f64>,
    pub status: String,
    pub wall_ms: Option<f64>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// `|value − limit|` when both are present.
    pub fn recompute_error(&self) -> Option<f64> {
        Some((self.value? - self.limit?).abs())
    }

    fn sort_key(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.x.total_cmp(&other.x))
            .then(self.variant.cmp(&other.variant))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn sort(&mut self) {
        self.rows.sort_by(SweepRow::sort_key);
    }

    pub fn find(&self, n: usize, x: f64, variant: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.n == n && r.x == x && r.variant == variant)
    }
}

/// Builds a rayon pool; `0` means one worker per core.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Runs the sweep with the thread count from the environment or config.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with_threads(config, None)
}

/// Runs the sweep on an explicit number of workers when given.
pub fn run_sweep_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    let resolved = config.resolve()?;
    let pool = thread_pool(threads.unwrap_or_else(|| config.thread_count()))?;
    Ok(pool.install(|| sweep_resolved(&resolved)))
}

struct Prepared {
    econ: LatticeEconomy,
    params: EmmParams,
    table: Result<ConditionalDensityTable>,
}

fn prepare(cfg: &ResolvedConfig, n: usize) -> Result<Prepared> {
    let econ = build_lattice(&cfg.dist, n, cfg.raw.t)?;
    let params = calibrate_emm(&cfg.dist, n)?;
    let table = if econ.m_of_t == 0 {
        Err(LabError::InvalidArgument(format!(
            "n = {n} leaves no trading date before t = {}",
            cfg.raw.t
        )))
    } else {
        conditional_density_table_at(&econ, &cfg.signal, &[econ.m_of_t])
    };
    Ok(Prepared { econ, params, table })
}

fn limit_for(cfg: &ResolvedConfig, x: f64, variant: &str) -> Option<f64> {
    let t = cfg.raw.t;
    if variant == PUBLIC {
        bsm_public_value(&cfg.model, x, t).ok()
    } else {
        let signal = ContinuousSignal::from_discrete(&cfg.signal).ok()?;
        bsm_insider_value(&cfg.model, x, t, signal).ok()
    }
}

fn sweep_resolved(cfg: &ResolvedConfig) -> SweepResult {
    let raw = &cfg.raw;
    let variants = [INSIDER, PUBLIC];
    let limits: Vec<(f64, &str, Option<f64>)> = raw
        .x
        .par_iter()
        .flat_map_iter(|&x| variants.iter().map(move |&v| (x, v)))
        .map(|(x, v)| (x, v, limit_for(cfg, x, v)))
        .collect();

    let mut rows = Vec::new();
    for &n in &raw.n {
        let start = Instant::now();
        let prepared = prepare(cfg, n);
        let setup_ms = start.elapsed().as_secs_f64() * 1e3;
        let cells: Vec<SweepRow> = limits
            .par_iter()
            .map(|&(x, variant, limit)| {
                let begin = Instant::now();
                let value = prepared.as_ref().map_err(clone_err).and_then(|p| {
                    if variant == PUBLIC {
                        public_value(&p.econ, &p.params, &cfg.model, x).map(|s| s.utility)
                    } else {
                        let table = p.table.as_ref().map_err(clone_err)?;
                        insider_value_with(&p.econ, &p.params, table, &cfg.model, x).map(|s| s.value)
                    }
                });
                let wall = raw
                    .record_wall_time
                    .then(|| setup_ms + begin.elapsed().as_secs_f64() * 1e3);
                match value {
                    Ok(v) if v.is_finite() => SweepRow {
                        n,
                        t: raw.t,
                        x,
                        variant: variant.into(),
                        value: Some(v),
                        limit,
                        abs_error: limit.map(|l| (v - l).abs()),
                        status: STATUS_OK.into(),
                        wall_ms: wall,
                    },
                    other => SweepRow {
                        n,
                        t: raw.t,
                        x,
                        variant: variant.into(),
                        value: None,
                        limit: None,
                        abs_error: None,
                        status: match other {
                            Err(e) => e.kind().into(),
                            Ok(_) => "non_finite".into(),
                        },
                        wall_ms: wall,
                    },
                }
            })
            .collect();
        rows.extend(cells);
    }
    let mut result = SweepResult { rows };
    result.sort();
    result
}

/// Errors are not `Clone`; failed preparations are re-reported by kind and
/// message.
fn clone_err(e: &LabError) -> LabError {
    match e {
        LabError::MalformedDistribution(m) => LabError::MalformedDistribution(m.clone()),
        LabError::InvalidArgument(m) => LabError::InvalidArgument(m.clone()),
        LabError::Unsupported(m) => LabError::Unsupported(m.clone()),
        LabError::CapExceeded { what, needed, cap } => LabError::CapExceeded {
            what,
            needed: *needed,
            cap: *cap,
        },
        LabError::BudgetUnreachable(m) => LabError::BudgetUnreachable(m.clone()),
        LabError::VerificationFailed(m) => LabError::VerificationFailed(m.clone()),
        LabError::GridBoundary(m) => LabError::GridBoundary(m.clone()),
        LabError::Config(m) => LabError::Config(m.clone()),
        other => LabError::NoConvergence(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let r = run_sweep_with_threads(&config(r#"{"n": [2, 4, 8, 16, 32]}"#), Some(2)).unwrap();
        assert_eq!(r.rows.len(), 10);
        for (i, n) in [2, 4, 8, 16, 32].iter().enumerate() {
            assert_eq!(r.rows[2 * i].n, *n);
            assert_eq!(r.rows[2 * i].variant, INSIDER);
            assert_eq!(r.rows[2 * i + 1].variant, PUBLIC);
        }
        assert!(r.rows.iter().all(|row| row.is_ok() && row.wall_ms.is_none()));
    }

    #[test]
    fn log_scale_covariance() {
        let r = run_sweep_with_threads(&config(r#"{"n": [8], "x": [0.5, 1.0, 2.0]}"#), Some(1)).unwrap();
        for v in [PUBLIC, INSIDER] {
            let base = r.find(8, 1.0, v).unwrap().value.unwrap();
            for x in [0.5, 2.0] {
                let d = r.find(8, x, v).unwrap().value.unwrap() - base;
                assert!((d - f64::ln(x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn future_ratio_columns_agree() {
        let r = run_sweep_with_threads(
            &config(r#"{"n": [4, 8, 16], "signal": "future_ratio", "utility": "power", "gamma": 2.0}"#),
            Some(2),
        )
        .unwrap();
        for n in [4, 8, 16] {
            let a = r.find(n, 1.0, INSIDER).unwrap().value.unwrap();
            let b = r.find(n, 1.0, PUBLIC).unwrap().value.unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn failing_cell_is_isolated() {
        // n = 1 with t = 1/2 has no trading date; the sweep carries on.
        let r = run_sweep_with_threads(&config(r#"{"n": [1, 4]}"#), Some(1)).unwrap();
        let bad = r.find(1, 1.0, INSIDER).unwrap();
        assert_eq!(bad.status, "invalid_argument");
        assert!(bad.value.is_none() && bad.limit.is_none() && bad.abs_error.is_none());
        assert!(r.find(4, 1.0, INSIDER).unwrap().is_ok());
    }

    #[test]
    fn wall_time_only_when_requested() {
        let r = run_sweep_with_threads(&config(r#"{"n": [4], "record_wall_time": true}"#), Some(1)).unwrap();
        assert!(r.rows.iter().all(|row| row.wall_ms.is_some()));
    }
}
