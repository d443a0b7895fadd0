//! Insider and public values converging to their continuous limits.

use insider_lab::limits::{bsm_insider_value, bsm_public_value, information_term, ContinuousSignal, QuadratureRule};
use insider_lab::measures::calibrate_emm;
use insider_lab::optimize::{insider_value_with, public_value};
use insider_lab::signals::{conditional_density_table_at, SignalFunctional};
use insider_lab::utility::UtilityModel;
use insider_lab::walks::{build_lattice, make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    let t = 0.5;
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    let rule = QuadratureRule::default();
    println!("E[ln η_t] at t = 1/2: {:.12} (−½ln(1−t) = {:.12})", information_term(t, &rule)?, 0.5 * 2f64.ln());

    for model in [UtilityModel::log(), UtilityModel::power(2.0)?] {
        let ins_lim = bsm_insider_value(&model, 1.0, t, ContinuousSignal::TerminalBrownian)?;
        let pub_lim = bsm_public_value(&model, 1.0, t)?;
        println!("\n{}: insider limit {ins_lim:.10}, public limit {pub_lim:.10}", model.label());
        for n in [8, 32, 128, 512, 2048] {
            let econ = build_lattice(&rad, n, t)?;
            let params = calibrate_emm(&rad, n)?;
            let table = conditional_density_table_at(&econ, &SignalFunctional::TerminalValue, &[econ.m_of_t])?;
            let ins = insider_value_with(&econ, &params, &table, &model, 1.0)?.value;
            let public = public_value(&econ, &params, &model, 1.0)?.utility;
            println!(
                "  n = {n:>4}: insider {ins:+.10} (err {:.2e}), public {public:+.10} (err {:.2e})",
                (ins - ins_lim).abs(),
                (public - pub_lim).abs()
            );
        }
    }
    Ok(())
}
