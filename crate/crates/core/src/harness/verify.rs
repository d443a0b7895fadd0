use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedConfig};
use crate::error::{LabError, Result};
use crate::measures::{
    calibrate_emm, insider_kernel, kernel_ratio_bound, public_kernel, verify_preservation, EmmParams, RatioGrid,
};
use crate::optimize::{
    brute_force_oracle, conditional_cells, conjugate_gap, default_dual_grid, dual_value_cells, information_gain,
    insider_value_with, kernel_cells, solve_cells,
};
use crate::signals::{check_equivalence, conditional_density_table, ConditionalDensityTable};
use crate::utility::UtilityModel;
use crate::walks::{build_lattice, LatticeEconomy};

/// Largest `n` for which the enumeration suites run.
pub const MAX_VERIFY_N: usize = 12;
pub const EMM_TOL: f64 = 1e-12;
pub const LOG_IDENTITY_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-8;
pub const GAP_TOL: f64 = 1e-6;

/// Outcome of one invariant suite at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub n: usize,
    pub passed: bool,
    /// Reported but excluded from the overall verdict.
    pub informational: bool,
    pub skipped: bool,
    pub max_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub dist: String,
    pub signal: String,
    pub utility: String,
    pub suites: Vec<SuiteResult>,
    pub all_pass: bool,
}

impl VerificationSummary {
    pub fn suite(&self, name: &str, n: usize) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name && s.n == n)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteResult> {
        self.suites.iter().filter(|s| !s.passed && !s.informational && !s.skipped)
    }
}

fn suite(name: &str, n: usize, dev: f64, tol: f64, detail: String) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        n,
        passed: dev <= tol,
        informational: false,
        skipped: false,
        max_deviation: Some(dev),
        tolerance: Some(tol),
        detail,
    }
}

fn errored(name: &str, n: usize, e: &LabError) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        n,
        passed: false,
        informational: false,
        skipped: false,
        max_deviation: None,
        tolerance: None,
        detail: e.to_string(),
    }
}

fn skipped(name: &str, n: usize, why: String) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        n,
        passed: true,
        informational: false,
        skipped: true,
        max_deviation: None,
        tolerance: None,
        detail: why,
    }
}

fn wrap(name: &str, n: usize, r: Result<SuiteResult>) -> SuiteResult {
    r.unwrap_or_else(|e| errored(name, n, &e))
}

/// Runs every invariant suite for each `n ≤ 12` in the config. Failures are
/// reported as data; only an invalid config is an error.
pub fn verify_all(config: &ExperimentConfig) -> Result<VerificationSummary> {
    let cfg = config.resolve()?;
    let mut suites = Vec::new();
    for &n in &cfg.raw.n {
        if n > MAX_VERIFY_N {
            suites.push(skipped("enumeration", n, format!("n = {n} exceeds {MAX_VERIFY_N}")));
            continue;
        }
        suites.extend(verify_n(&cfg, n));
    }
    let all_pass = suites.iter().all(|s| s.passed || s.informational || s.skipped);
    Ok(VerificationSummary {
        dist: cfg.raw.dist.clone(),
        signal: cfg.signal.label().into(),
        utility: cfg.model.label(),
        suites,
        all_pass,
    })
}

fn verify_n(cfg: &ResolvedConfig, n: usize) -> Vec<SuiteResult> {
    let econ = match build_lattice(&cfg.dist, n, cfg.raw.t) {
        Ok(e) => e,
        Err(e) => return vec![errored("lattice", n, &e)],
    };
    let params = match calibrate_emm(&cfg.dist, n) {
        Ok(p) => p,
        Err(e) => return vec![errored("emm", n, &e)],
    };
    let mut out = vec![{
        let dev = params.density_residual(&cfg.dist).abs().max(params.martingale_residual(&cfg.dist).abs());
        suite("emm", n, dev, EMM_TOL, format!("a = {}, b = {}", params.a, params.b))
    }];
    if econ.m_of_t == 0 {
        out.push(skipped("insider", n, "no trading date before t".into()));
        return out;
    }
    let table = match conditional_density_table(&econ, &cfg.signal) {
        Ok(t) => t,
        Err(e) => {
            out.push(errored("density_table", n, &e));
            return out;
        }
    };
    out.push(wrap("preservation", n, preservation(&econ, &table, cfg.raw.tolerance, n)));
    out.push(equivalence(&table, n));
    out.push(wrap("log_identity", n, log_identity(&econ, &params, &table, &cfg.raw.x, n)));
    out.push(wrap("oracle", n, oracle(&econ, &params, &table, &cfg.model, &cfg.raw.x, n)));
    out.push(wrap("conjugate_gap", n, gaps(&econ, &params, &table, &cfg.model, &cfg.raw.x, n)));
    out.push(kernel_ratio(&econ, &params, &table, n));
    out
}

fn preservation(econ: &LatticeEconomy, table: &ConditionalDensityTable, tol: f64, n: usize) -> Result<SuiteResult> {
    let (mut restricted, mut strict) = (0.0f64, 0.0f64);
    let mut all = true;
    for m in 1..=econ.m_of_t {
        let r = verify_preservation(econ, table, m)?;
        restricted = restricted
            .max(r.martingale.restricted)
            .max(r.unit_conditional.restricted)
            .max(r.factorization.restricted)
            .max(r.table_consistency);
        strict = strict.max(r.martingale.strict).max(r.unit_conditional.strict).max(r.factorization.strict);
        all &= r.passes();
    }
    let mut s = suite(
        "preservation",
        n,
        restricted,
        tol,
        format!("restricted to η > 0; unrestricted deviation {strict:e}"),
    );
    s.passed &= all;
    Ok(s)
}

/// Strict positivity of the joint law. Reported only: the terminal and
/// running-maximum signals both leave `η = 0` cells on finite lattices.
fn equivalence(table: &ConditionalDensityTable, n: usize) -> SuiteResult {
    let r = check_equivalence(table);
    SuiteResult {
        name: "equivalence".into(),
        n,
        passed: r.holds(),
        informational: true,
        skipped: false,
        max_deviation: Some(r.violation_count as f64),
        tolerance: Some(0.0),
        detail: format!("{} (cell, signal) pairs with η = 0", r.violation_count),
    }
}

fn log_identity(
    econ: &LatticeEconomy,
    params: &EmmParams,
    table: &ConditionalDensityTable,
    xs: &[f64],
    n: usize,
) -> Result<SuiteResult> {
    let m = econ.m_of_t;
    let gain = information_gain(table, m)?;
    let mut dev = 0.0f64;
    for &x in xs {
        let v = insider_value_with(econ, params, table, &UtilityModel::log(), x)?.value;
        let expect = x.ln() + m as f64 / n as f64 * params.b + gain;
        dev = dev.max((v - expect).abs());
    }
    Ok(suite("log_identity", n, dev, LOG_IDENTITY_TOL, format!("E[ln η] = {gain}")))
}

fn oracle(
    econ: &LatticeEconomy,
    params: &EmmParams,
    table: &ConditionalDensityTable,
    model: &UtilityModel,
    xs: &[f64],
    n: usize,
) -> Result<SuiteResult> {
    let public = public_kernel(econ, params, econ.m_of_t)?;
    let cells = kernel_cells(&public);
    let mut dev = 0.0f64;
    for &x in xs {
        let dual = solve_cells(&cells, model, x)?.utility;
        dev = dev.max((dual - brute_force_oracle(&cells, model, x)?.utility).abs());
        let ins = insider_value_with(econ, params, table, model, x)?;
        let mut brute = 0.0;
        for s in ins.per_signal.iter().filter(|s| s.multiplier.is_some()) {
            let c = conditional_cells(&public, table, s.signal)?;
            let o = brute_force_oracle(&c, model, x)?.utility;
            dev = dev.max((s.value - o).abs());
            brute += s.prob * o;
        }
        dev = dev.max((ins.value - brute).abs());
    }
    Ok(suite("oracle", n, dev, ORACLE_TOL, "dual formula vs projected Newton".into()))
}

fn gaps(
    econ: &LatticeEconomy,
    params: &EmmParams,
    table: &ConditionalDensityTable,
    model: &UtilityModel,
    xs: &[f64],
    n: usize,
) -> Result<SuiteResult> {
    let public = public_kernel(econ, params, econ.m_of_t)?;
    let joint = insider_kernel(&public, table)?;
    let grid = default_dual_grid();
    let mut dev = 0.0f64;
    for cells in [kernel_cells(&public), kernel_cells(&joint)] {
        for &x in xs {
            let u = solve_cells(&cells, model, x)?.utility;
            let g = conjugate_gap(u, |y| dual_value_cells(&cells, model, y), x, &grid)?;
            dev = dev.max(g.gap);
        }
    }
    Ok(suite("conjugate_gap", n, dev, GAP_TOL, "public and joint insider kernels".into()))
}

/// Discrete-to-continuous kernel ratio. Reported only: cells with `η_n = 0`
/// inside the comparison box are expected at small `n`.
fn kernel_ratio(econ: &LatticeEconomy, params: &EmmParams, table: &ConditionalDensityTable, n: usize) -> SuiteResult {
    if econ.m_of_t == econ.n {
        return skipped("kernel_ratio", n, "the continuous insider kernel needs t < 1".into());
    }
    match kernel_ratio_bound(econ, params, table, &RatioGrid::default()) {
        Ok(r) => SuiteResult {
            name: "kernel_ratio".into(),
            n,
            passed: r.bounded(),
            informational: true,
            skipped: false,
            max_deviation: Some(r.c),
            tolerance: None,
            detail: format!("{} cells compared, {} with η_n = 0", r.cells_compared, r.offending.len()),
        },
        Err(LabError::Unsupported(why)) => skipped("kernel_ratio", n, why),
        Err(e) => errored("kernel_ratio", n, &e),
    }
}
