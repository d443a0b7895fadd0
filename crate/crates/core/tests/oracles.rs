//! Frozen reference values that cut across modules.

use approx::assert_abs_diff_eq;
use insider_lab::harness::{run_sweep_with_threads, ExperimentConfig};
use insider_lab::limits::{
    bsm_insider_value, bsm_insider_value_with, bsm_public_value, bsm_public_value_with, ContinuousSignal,
    QuadratureRule,
};
use insider_lab::measures::calibrate_emm;
use insider_lab::optimize::{information_gain, insider_value};
use insider_lab::replicate::{
    delta_hedge, lattice_price, pricing_function, replication_experiment, replication_experiment_with, ClaimSpec,
    PathMeasure, ReplicationSetup,
};
use insider_lab::signals::{conditional_density_table_at, SignalFunctional};
use insider_lab::utility::UtilityModel;
use insider_lab::walks::{build_lattice, make_step_distribution, StepDistribution, StepSpec};

const CALL: ClaimSpec = ClaimSpec::CappedCall { strike: 1.0, cap: 10.0 };

fn rad() -> StepDistribution {
    make_step_distribution(&StepSpec::Rademacher).unwrap()
}

#[test]
fn continuous_log_values() {
    let log = UtilityModel::log();
    let ins = bsm_insider_value(&log, 1.0, 0.5, ContinuousSignal::TerminalBrownian).unwrap();
    assert_abs_diff_eq!(ins, 0.409_073_590_279_971_3, epsilon = 1e-9);
    assert_abs_diff_eq!(bsm_public_value(&log, 2.0, 0.5).unwrap(), 2f64.ln() + 0.0625, epsilon = 1e-15);
}

#[test]
fn continuous_power_values() {
    let p2 = UtilityModel::power(2.0).unwrap();
    let ins = bsm_insider_value(&p2, 1.0, 0.5, ContinuousSignal::TerminalBrownian).unwrap();
    assert_abs_diff_eq!(ins, -0.791_375_622_035_437_5, epsilon = 1e-9);
    let public = bsm_public_value(&p2, 1.0, 0.5).unwrap();
    assert_abs_diff_eq!(public, -(-1.0f64 / 32.0).exp(), epsilon = 1e-12);
    // Power utility scales as x^{1−γ}.
    let scaled = bsm_insider_value(&p2, 2.0, 0.5, ContinuousSignal::TerminalBrownian).unwrap();
    assert_abs_diff_eq!(scaled, ins / 2.0, epsilon = 1e-12);
}

#[test]
fn quadrature_is_resolved() {
    let fine = QuadratureRule::new(400, 8.0);
    let coarse = QuadratureRule::default();
    for model in [UtilityModel::power(0.5).unwrap(), UtilityModel::power(2.0).unwrap()] {
        let a = bsm_insider_value_with(&model, 1.0, 0.5, ContinuousSignal::TerminalBrownian, &coarse).unwrap();
        let b = bsm_insider_value_with(&model, 1.0, 0.5, ContinuousSignal::TerminalBrownian, &fine).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
        assert!(a.gap < 1e-6);
        let a = bsm_public_value_with(&model, 1.0, 0.5, &coarse).unwrap();
        let b = bsm_public_value_with(&model, 1.0, 0.5, &fine).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }
}

#[test]
fn limits_increase_with_horizon() {
    let model = UtilityModel::power(2.0).unwrap();
    let mut prev_ins = f64::NEG_INFINITY;
    let mut prev_pub = f64::NEG_INFINITY;
    for k in 1..=9 {
        let t = k as f64 / 10.0;
        let ins = bsm_insider_value(&model, 1.0, t, ContinuousSignal::TerminalBrownian).unwrap();
        let public = bsm_public_value(&model, 1.0, t).unwrap();
        assert!(ins > prev_ins && public > prev_pub && ins > public, "t = {t}");
        prev_ins = ins;
        prev_pub = public;
    }
}

#[test]
fn sweep_values_frozen() {
    let cfg = ExperimentConfig::from_json(r#"{"n": [8, 32], "x": [1.0]}"#).unwrap();
    let r = run_sweep_with_threads(&cfg, Some(2)).unwrap();
    let v = |n, variant| r.find(n, 1.0, variant).unwrap().value.unwrap();
    assert_abs_diff_eq!(v(8, "insider"), 0.418_148_754_724_124_1, epsilon = 1e-10);
    assert_abs_diff_eq!(v(32, "insider"), 0.409_283_800_751_235, epsilon = 1e-10);
    assert_abs_diff_eq!(v(8, "public"), 0.062_177_166_364_191_79, epsilon = 1e-10);
}

#[test]
fn lattice_log_decomposition_matches_continuous_terms() {
    // u_n = ln x + (m/n)b_n + E[ln η]; each term tends to its continuous analog.
    let n = 512;
    let econ = build_lattice(&rad(), n, 0.5).unwrap();
    let p = calibrate_emm(&rad(), n).unwrap();
    let table = conditional_density_table_at(&econ, &SignalFunctional::TerminalValue, &[econ.m_of_t]).unwrap();
    let gain = information_gain(&table, econ.m_of_t).unwrap();
    assert!((0.5 * p.b - 0.0625).abs() < 1e-4);
    assert!((gain - 0.5 * 2f64.ln()).abs() < 1e-4);
    let v = insider_value(&econ, &SignalFunctional::TerminalValue, &UtilityModel::log(), 1.0).unwrap();
    assert_abs_diff_eq!(v.value, 0.5 * p.b + gain, epsilon = 1e-10);
}

#[test]
fn initial_investment_matches_lattice_price() {
    let m0 = pricing_function(&CALL, 0.5, 0.0, 1.0).unwrap();
    assert_abs_diff_eq!(m0, 0.276_127_364_012_781_3, epsilon = 1e-10);
    let lp = lattice_price(&rad(), &CALL, 2048, 0.5).unwrap();
    assert!((lp - m0).abs() < 1e-3, "{lp} vs {m0}");
    assert_abs_diff_eq!(delta_hedge(&CALL, 0.5, 0.0, 1.0).unwrap(), 0.636_970_775_065_119, epsilon = 1e-8);
}

#[test]
fn forward_sum_is_centered_under_martingale_measure() {
    let r = replication_experiment_with(
        &CALL,
        &ReplicationSetup {
            dist: rad(),
            n: 128,
            t: 0.5,
            eps: 0.05,
            trials: 10_000,
            seed: 3,
            measure: PathMeasure::RiskNeutral,
        },
    )
    .unwrap();
    assert!(r.mean_ito.abs() <= 3.0 * r.ito_std_error, "{} ± {}", r.mean_ito, r.ito_std_error);
}

#[test]
fn replication_counts_frozen() {
    let r = replication_experiment(&CALL, 32, 0.5, 0.05, 10_000, 20240601).unwrap();
    assert_eq!(r.exceedances, 5);
    assert!((r.half_width - 1.96 * (0.0005f64 * 0.9995 / 1e4).sqrt()).abs() < 1e-15);
}

#[test]
fn cash_or_nothing_replicates_less_well() {
    let digital = ClaimSpec::CashOrNothing { strike: 1.0, cash: 1.0 };
    let d = replication_experiment(&digital, 64, 0.5, 0.05, 2000, 9).unwrap();
    let c = replication_experiment(&CALL, 64, 0.5, 0.05, 2000, 9).unwrap();
    assert!(d.exceedance > c.exceedance);
}
