//! Experiment plumbing: JSON configs, convergence sweeps, invariant
//! verification and CSV/JSON persistence.

pub mod config;
pub mod io;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, ResolvedConfig, THREADS_ENV};
pub use io::{emit, load, to_csv, to_json, OutputFormat, CSV_HEADER};
pub use sweep::{run_sweep, run_sweep_with_threads, thread_pool, SweepResult, SweepRow};
pub use verify::{verify_all, SuiteResult, VerificationSummary};
