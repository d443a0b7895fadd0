//! Primal and dual value functions of a lattice market and their conjugate gap.

use insider_lab::measures::{calibrate_emm, insider_kernel, public_kernel};
use insider_lab::optimize::{conjugate_gap, default_dual_grid, dual_value_cells, kernel_cells, solve_cells};
use insider_lab::signals::{conditional_density_table_at, SignalFunctional};
use insider_lab::utility::{asymptotic_elasticity, dual_bound_constants, UtilityModel};
use insider_lab::walks::{build_lattice, make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    let n = 64;
    let econ = build_lattice(&rad, n, 0.5)?;
    let params = calibrate_emm(&rad, n)?;
    let public = public_kernel(&econ, &params, econ.m_of_t)?;
    let table = conditional_density_table_at(&econ, &SignalFunctional::TerminalValue, &[econ.m_of_t])?;
    let joint = insider_kernel(&public, &table)?;

    for model in [UtilityModel::log(), UtilityModel::power(0.5)?, UtilityModel::power(2.0)?] {
        let (l, alpha) = dual_bound_constants(&model)?;
        println!("{}: AE = {}, V(y) ≤ {l:.3}·y^-{alpha:.3}", model.label(), asymptotic_elasticity(&model));
        for (name, cells) in [("public", kernel_cells(&public)), ("insider", kernel_cells(&joint))] {
            for x in [0.5, 1.0, 2.0] {
                let sol = solve_cells(&cells, &model, x)?;
                let g = conjugate_gap(sol.utility, |y| dual_value_cells(&cells, &model, y), x, &default_dual_grid())?;
                println!(
                    "  {name:>7} x = {x}: u = {:+.10}, y* = {:.6} (λ = {:.6}), gap {:.1e}",
                    sol.utility, g.y_star, sol.lambda, g.gap
                );
            }
        }
    }
    Ok(())
}
