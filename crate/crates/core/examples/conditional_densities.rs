//! Conditional densities η of three signals and the strict-positivity report.

use insider_lab::signals::{
    check_equivalence, conditional_density_table, gaussian_eta, running_max_density_comparison,
    terminal_eta_lattice_error, SignalFunctional,
};
use insider_lab::walks::{build_lattice, make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    let econ = build_lattice(&rad, 6, 0.5)?;
    for sig in [
        SignalFunctional::TerminalValue,
        SignalFunctional::RunningMax,
        SignalFunctional::FutureRatio { anchor_t: 0.5 },
    ] {
        let table = conditional_density_table(&econ, &sig)?;
        let level = table.level(3).expect("date 3 is stored");
        let eq = check_equivalence(&table);
        println!(
            "{:>15}: {} signal values, {} cells at m = 3, {} (cell, y) pairs with η = 0",
            sig.label(),
            table.values.len(),
            level.len(),
            eq.violation_count
        );
    }

    let cmp = running_max_density_comparison(2, 1, 2, 1, 0.5)?;
    println!("running max n=2 m=1 y=2 x=1: displayed term {}, enumerated P[Y=y|x] {}", cmp.formula_term, cmp.enumerated_conditional);

    println!("continuous η at t=1/2, x=0, y=0: {:.6}", gaussian_eta(0.5, 0.0, 0.0)?);
    for n in [64, 256, 1024] {
        let econ = build_lattice(&rad, n, 0.5)?;
        let err = terminal_eta_lattice_error(&econ, n / 2, &[(0.0, 0.0), (0.5, 1.0), (-0.5, -1.0)])?;
        println!("n = {n:>4}: max |η_n − η| on the grid {err:.3e}");
    }
    Ok(())
}
