//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use insider_lab::harness::{run_sweep_with_threads, to_csv, ExperimentConfig, SweepResult};
use insider_lab::limits::{bsm_insider_value, information_term, information_term_exact, ContinuousSignal, QuadratureRule};
use insider_lab::measures::{
    calibrate_emm, insider_kernel, kernel_ratio_bound, public_kernel, verify_preservation, RatioGrid,
    PRESERVATION_TOL,
};
use insider_lab::optimize::{
    brute_force_oracle, conditional_cells, conjugate_gap, default_dual_grid, dual_value_cells, information_gain,
    insider_value_with, kernel_cells, public_value, solve_cells,
};
use insider_lab::replicate::{replication_experiment, ClaimSpec};
use insider_lab::signals::{conditional_density_table, conditional_density_table_at, SignalFunctional};
use insider_lab::utility::UtilityModel;
use insider_lab::walks::{build_lattice, make_step_distribution, StepDistribution, StepSpec};

type Outcome = Result<String, String>;

const T: f64 = 0.5;
const SWEEP_N: [usize; 5] = [8, 32, 128, 512, 2048];

fn rad() -> StepDistribution {
    make_step_distribution(&StepSpec::Rademacher).unwrap()
}

fn signals() -> [SignalFunctional; 2] {
    [SignalFunctional::TerminalValue, SignalFunctional::FutureRatio { anchor_t: T }]
}

fn models() -> [UtilityModel; 3] {
    [
        UtilityModel::log(),
        UtilityModel::power(0.5).unwrap(),
        UtilityModel::power(2.0).unwrap(),
    ]
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn preservation() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 4, 8, 12] {
        let econ = build_lattice(&rad(), n, T).map_err(e)?;
        for sig in signals() {
            let table = conditional_density_table(&econ, &sig).map_err(e)?;
            for m in 1..=econ.m_of_t {
                let r = verify_preservation(&econ, &table, m).map_err(e)?;
                worst = worst
                    .max(r.martingale.restricted)
                    .max(r.unit_conditional.restricted)
                    .max(r.factorization.restricted)
                    .max(r.table_consistency);
            }
        }
    }
    check(worst <= PRESERVATION_TOL, format!("max deviation {worst:.3e}"))
}

fn emm() -> Outcome {
    let d = rad();
    let (mut a_dev, mut b_ok) = (0.0f64, true);
    for n in 1..=4096 {
        let p = calibrate_emm(&d, n).map_err(e)?;
        a_dev = a_dev.max((p.a - 0.5).abs());
        b_ok &= (p.b - 0.125).abs() <= 0.5 / n as f64;
    }
    let b1 = calibrate_emm(&d, 1).map_err(e)?.b;
    let b1_err = (b1 - (((1.0 + 1f64.exp()) / 2.0).ln() - 0.5)).abs();

    // Least squares a_n − 1/2 ≈ c/√n + d/n without intercept; c is the slope
    // of (a_n − 1/2)√n against the leading order.
    let skew = make_step_distribution(&StepSpec::default_skewed()).map_err(e)?;
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 6..=12 {
        let n = 1usize << k;
        let y = calibrate_emm(&skew, n).map_err(e)?.a - 0.5;
        let (f1, f2) = (1.0 / (n as f64).sqrt(), 1.0 / n as f64);
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        r1 += f1 * y;
        r2 += f2 * y;
    }
    let slope = (r1 * s22 - r2 * s12) / (s11 * s22 - s12 * s12);
    let target = skew.third_moment() / 24.0;
    let rel = (slope / target - 1.0).abs();
    check(
        a_dev <= 1e-12 && b1_err <= 1e-9 && b_ok && rel <= 0.10,
        format!(
            "max |a_n − 1/2| = {a_dev:.2e}, b_1 error {b1_err:.2e}, b_n bound {}, skew slope {slope:.6} vs {target:.6} ({:.2}%)",
            if b_ok { "ok" } else { "violated" },
            100.0 * rel
        ),
    )
}

fn log_identity() -> Outcome {
    let model = UtilityModel::log();
    let mut worst = 0.0f64;
    for n in 2..=12 {
        let econ = build_lattice(&rad(), n, T).map_err(e)?;
        let params = calibrate_emm(&rad(), n).map_err(e)?;
        let m = econ.m_of_t;
        for sig in signals() {
            let table = conditional_density_table_at(&econ, &sig, &[m]).map_err(e)?;
            let gain = information_gain(&table, m).map_err(e)?;
            for x in [0.5, 1.0, 2.0] {
                let v = insider_value_with(&econ, &params, &table, &model, x).map_err(e)?.value;
                worst = worst.max((v - (x.ln() + m as f64 / n as f64 * params.b + gain)).abs());
            }
        }
    }
    check(worst <= 1e-10, format!("max deviation {worst:.3e}"))
}

fn oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells_checked = 0;
    for n in 1..=8 {
        let econ = build_lattice(&rad(), n, T).map_err(e)?;
        let params = calibrate_emm(&rad(), n).map_err(e)?;
        let m = econ.m_of_t;
        let public = public_kernel(&econ, &params, m).map_err(e)?;
        let pc = kernel_cells(&public);
        for model in models() {
            for x in [0.5, 1.0, 2.0] {
                let d = solve_cells(&pc, &model, x).map_err(e)?.utility;
                worst = worst.max((d - brute_force_oracle(&pc, &model, x).map_err(e)?.utility).abs());
                cells_checked += 1;
                if m == 0 {
                    continue;
                }
                for sig in signals() {
                    let table = conditional_density_table_at(&econ, &sig, &[m]).map_err(e)?;
                    let ins = insider_value_with(&econ, &params, &table, &model, x).map_err(e)?;
                    let mut brute = 0.0;
                    for s in ins.per_signal.iter().filter(|s| s.multiplier.is_some()) {
                        let c = conditional_cells(&public, &table, s.signal).map_err(e)?;
                        brute += s.prob * brute_force_oracle(&c, &model, x).map_err(e)?.utility;
                    }
                    worst = worst.max((ins.value - brute).abs());
                    cells_checked += 1;
                }
            }
        }
    }
    check(worst <= 1e-8, format!("{cells_checked} cells, max |dual − oracle| = {worst:.3e}"))
}

fn sweep(text: &str) -> Result<SweepResult, String> {
    let cfg = ExperimentConfig::from_json(text).map_err(e)?;
    run_sweep_with_threads(&cfg, None).map_err(e)
}

fn convergence() -> Outcome {
    let log = sweep(r#"{"n": [8, 32, 128, 512, 2048], "t": 0.5, "x": [1.0]}"#)?;
    let errs: Vec<f64> = SWEEP_N
        .iter()
        .map(|&n| log.find(n, 1.0, "insider").and_then(|r| r.abs_error).unwrap_or(f64::NAN))
        .collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let last = errs[4];
    let limit = 1.0 / 16.0 + 0.5 * 2f64.ln();
    let lim_ok = (log.find(8, 1.0, "insider").and_then(|r| r.limit).unwrap_or(f64::NAN) - limit).abs() < 1e-12;

    let power = sweep(r#"{"n": [2048], "t": 0.5, "x": [1.0], "utility": "power", "gamma": 2.0}"#)?;
    let perr = power.find(2048, 1.0, "insider").and_then(|r| r.abs_error).unwrap_or(f64::NAN);
    let plim = bsm_insider_value(&UtilityModel::power(2.0).unwrap(), 1.0, T, ContinuousSignal::TerminalBrownian)
        .map_err(e)?;
    check(
        decreasing && last <= 2e-3 && lim_ok && perr <= 5e-3,
        format!(
            "log errors {:?}, power γ=2 error {perr:.3e} vs limit {plim:.10}",
            errs.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn info_term() -> Outcome {
    let rule = QuadratureRule::default();
    let mut worst = 0.0f64;
    for t in [0.25, 0.5, 0.75] {
        worst = worst.max((information_term(t, &rule).map_err(e)? - information_term_exact(t)).abs());
    }
    check(worst <= 1e-8, format!("max deviation {worst:.3e}"))
}

fn conjugate() -> Outcome {
    let n = 64;
    let econ = build_lattice(&rad(), n, T).map_err(e)?;
    let params = calibrate_emm(&rad(), n).map_err(e)?;
    let public = public_kernel(&econ, &params, econ.m_of_t).map_err(e)?;
    let mut kernels = vec![kernel_cells(&public)];
    for sig in signals() {
        let table = conditional_density_table_at(&econ, &sig, &[econ.m_of_t]).map_err(e)?;
        kernels.push(kernel_cells(&insider_kernel(&public, &table).map_err(e)?));
    }
    let grid = default_dual_grid();
    let mut worst = 0.0f64;
    for cells in &kernels {
        for model in models() {
            for x in [0.5, 1.0, 2.0] {
                let u = solve_cells(cells, &model, x).map_err(e)?.utility;
                let g = conjugate_gap(u, |y| dual_value_cells(cells, &model, y), x, &grid).map_err(e)?;
                worst = worst.max(g.gap);
            }
        }
    }
    check(worst <= 1e-6, format!("max gap {worst:.3e}"))
}

fn replication() -> Outcome {
    let claim = ClaimSpec::CappedCall { strike: 1.0, cap: 10.0 };
    let mut results = Vec::new();
    for n in [32, 128, 512] {
        results.push(replication_experiment(&claim, n, T, 0.05, 10_000, 20240601).map_err(e)?);
    }
    let monotone = results
        .windows(2)
        .all(|w| w[1].exceedance <= w[0].exceedance + 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt());
    let last = &results[2];
    check(
        last.exceedance < 0.05 && monotone && last.audit.passes(),
        format!(
            "exceedance {:?}, audit at n=512 [{:.4}, {:.4}] with {} violations",
            results.iter().map(|r| r.exceedance).collect::<Vec<_>>(),
            last.audit.min_value,
            last.audit.max_value,
            last.audit.violations
        ),
    )
}

fn independence() -> Outcome {
    let sig = SignalFunctional::FutureRatio { anchor_t: T };
    let mut worst_eta = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut worst_c = 1.0f64;
    let model = UtilityModel::power(2.0).unwrap();
    for n in SWEEP_N {
        let econ = build_lattice(&rad(), n, T).map_err(e)?;
        let params = calibrate_emm(&rad(), n).map_err(e)?;
        let m = econ.m_of_t;
        let table = conditional_density_table_at(&econ, &sig, &[m]).map_err(e)?;
        let level = table.level(m).ok_or("missing level")?;
        for c in 0..level.len() {
            for y in 0..table.values.len() {
                worst_eta = worst_eta.max((level.eta(c, y) - 1.0).abs());
            }
        }
        for x in [0.5, 1.0, 2.0] {
            let a = insider_value_with(&econ, &params, &table, &model, x).map_err(e)?.value;
            let b = public_value(&econ, &params, &model, x).map_err(e)?.utility;
            worst_gap = worst_gap.max((a - b).abs());
        }
        let r = kernel_ratio_bound(&econ, &params, &table, &RatioGrid::default()).map_err(e)?;
        if !r.bounded() {
            return Err(format!("kernel ratio unbounded at n = {n}"));
        }
        worst_c = worst_c.max(r.c);
    }
    check(
        worst_eta <= 1e-12 && worst_gap <= 1e-12 && worst_c.is_finite(),
        format!("max |η − 1| = {worst_eta:.2e}, max |insider − public| = {worst_gap:.2e}, C ≤ {worst_c:.12}"),
    )
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::from_json(
        r#"{"n": [4, 16, 64, 256], "x": [0.5, 1.0, 2.0], "utility": "power", "gamma": 0.5, "seed": 7}"#,
    )
    .map_err(e)?;
    let mut outputs = Vec::new();
    for threads in [1, 3, 8] {
        outputs.push(to_csv(&run_sweep_with_threads(&cfg, Some(threads)).map_err(e)?).map_err(e)?);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    check(same, format!("{} bytes identical across 1, 3 and 8 threads", outputs[0].len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 10] = [
        ("martingale preservation", preservation, Some(Duration::from_secs(10))),
        ("EMM calibration", emm, Some(Duration::from_secs(5))),
        ("log-utility identity", log_identity, Some(Duration::from_secs(5))),
        ("oracle equivalence", oracle, Some(Duration::from_secs(30))),
        ("convergence to the continuous limit", convergence, Some(Duration::from_secs(60))),
        ("continuous information term", info_term, Some(Duration::from_secs(1))),
        ("conjugate duality", conjugate, Some(Duration::from_secs(10))),
        ("replication", replication, Some(Duration::from_secs(120))),
        ("independent signal", independence, Some(Duration::from_secs(5))),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let slow = budget.is_some_and(|b| took > b);
        let (status, detail) = match &outcome {
            Ok(d) if !slow => ("PASS", d.clone()),
            Ok(d) => ("FAIL", format!("{d}; runtime over budget")),
            Err(d) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {}: {status} {name} ({:.2} s): {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
