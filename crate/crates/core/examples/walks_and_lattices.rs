//! Scaled random-walk lattices: states, probabilities and prices.

use insider_lab::walks::{build_lattice, enumerate_paths, make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    for spec in [StepSpec::Rademacher, StepSpec::default_skewed()] {
        let dist = make_step_distribution(&spec)?;
        println!("atoms {:?}, E[ξ³] = {:.6}", dist.atoms(), dist.third_moment());

        let econ = build_lattice(&dist, 4, 0.5)?;
        println!("n = 4, cutoff m = {}, step scale {:.4}", econ.m_of_t, econ.step_scale);
        let level = econ.level(4);
        for i in 0..level.len() {
            println!("  ω = {:+.3}  S = {:.4}  P = {:.5}", level.values[i], econ.price_at(4, i), level.probs[i]);
        }

        let paths = enumerate_paths(&econ, 3)?;
        let total: f64 = paths.iter().map(|p| p.prob).sum();
        println!("  {} paths to date 3, total mass {total:.15}\n", paths.len());
    }

    // Recombining lattices stay cheap at large n.
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    let big = build_lattice(&rad, 2048, 0.5)?;
    let mean: f64 = big.level(2048).values.iter().zip(big.level(2048).probs).map(|(v, p)| v * p).sum();
    println!("n = 2048: {} terminal states, E[ω(t)] = {mean:.2e}", big.level_len(2048));
    Ok(())
}
