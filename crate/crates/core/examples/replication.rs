//! Delta hedging a capped call along lattice paths.

use insider_lab::replicate::{
    delta_hedge, lattice_price, pricing_function, replication_experiment, replication_experiment_with, ClaimSpec,
    PathMeasure, ReplicationSetup,
};
use insider_lab::walks::{make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    let claim = ClaimSpec::CappedCall { strike: 1.0, cap: 10.0 };
    let t = 0.5;
    let m0 = pricing_function(&claim, t, 0.0, 1.0)?;
    println!("M₀ = {m0:.10}, g(1, 0) = {:.10}", delta_hedge(&claim, t, 0.0, 1.0)?);
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    println!("lattice price at n = 2048: {:.10}", lattice_price(&rad, &claim, 2048, t)?);

    for n in [32, 128, 512] {
        let r = replication_experiment(&claim, n, t, 0.05, 10_000, 20240601)?;
        println!(
            "n = {n:>3}: P[|M₀ + I_n − M| > ε] = {:.4} ± {:.4}, portfolio range [{:.4}, {:.4}]",
            r.exceedance, r.half_width, r.audit.min_value, r.audit.max_value
        );
    }

    let rn = replication_experiment_with(
        &claim,
        &ReplicationSetup {
            dist: rad,
            n: 128,
            t,
            eps: 0.05,
            trials: 10_000,
            seed: 1,
            measure: PathMeasure::RiskNeutral,
        },
    )?;
    println!("under the martingale measure E[I_128] = {:.2e} ± {:.2e}", rn.mean_ito, rn.ito_std_error);
    Ok(())
}
