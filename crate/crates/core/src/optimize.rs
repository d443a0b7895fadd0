//! Complete-market utility maximization by convex duality.
//!
//! On a finite set of cells with weights `w` and kernel `Z` the problem
//! `max Σ w U(M)` subject to `Σ w Z M = x` is solved by `M = I(λZ)` with the
//! multiplier `λ` fixed by the budget. The insider solves one such problem per
//! signal value under the conditional law `P^y` with kernel `Z^F/η^y`.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::measures::{calibrate_emm, public_kernel, EmmParams, PricingKernel};
use crate::numeric::{golden_section_min, log_grid, log_sum_exp, pairwise_sum};
use crate::signals::{conditional_density_table_at, ConditionalDensityTable, SignalFunctional};
use crate::utility::{Family, UtilityModel};
use crate::walks::LatticeEconomy;

/// A cell of a finite market: physical weight and log pricing kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCell {
    pub weight: f64,
    pub log_z: f64,
}

impl WeightedCell {
    pub fn new(weight: f64, z: f64) -> Self {
        WeightedCell { weight, log_z: z.ln() }
    }
}

/// Cells of a pricing kernel that carry positive weight.
pub fn kernel_cells(kernel: &PricingKernel) -> Vec<WeightedCell> {
    kernel
        .cells
        .iter()
        .filter_map(|c| c.log_z.map(|lz| WeightedCell { weight: c.prob, log_z: lz }))
        .filter(|c| c.weight > 0.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalClaim {
    pub lambda: f64,
    /// Optimal claim on each supplied cell, in order.
    pub claims: Vec<f64>,
    pub utility: f64,
    /// `x − Σ w Z M`.
    pub budget_slack: f64,
    /// `max |U′(M)/(λZ) − 1|`.
    pub kkt_residual: f64,
}

/// Relative budget residual at which the multiplier search stops.
pub const BUDGET_TOL: f64 = 1e-12;
const MAX_EXPANSIONS: f64 = 40.0;

/// Solves the finite complete-market problem by a monotone search on `ln λ`.
pub fn solve_cells(cells: &[WeightedCell], model: &UtilityModel, x: f64) -> Result<OptimalClaim> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(LabError::InvalidArgument(format!("wealth {x} must be positive")));
    }
    let cells: Vec<WeightedCell> = cells.iter().copied().filter(|c| c.weight > 0.0).collect();
    if cells.is_empty() {
        return Err(LabError::BudgetUnreachable("no cell carries positive weight".into()));
    }
    if cells.iter().any(|c| !c.log_z.is_finite() || !c.weight.is_finite()) {
        return Err(LabError::BudgetUnreachable("kernel must be positive and finite".into()));
    }
    let ln_x = x.ln();
    let log_w: Vec<f64> = cells.iter().map(|c| c.weight.ln()).collect();
    let mut terms = vec![0.0; cells.len()];
    // ln(Σ w Z I(λZ)) − ln x; strictly decreasing in s = ln λ.
    let mut g = |s: f64| {
        for ((t, c), lw) in terms.iter_mut().zip(&cells).zip(&log_w) {
            *t = lw + c.log_z + model.log_inv_marginal(s + c.log_z);
        }
        log_sum_exp(&terms) - ln_x
    };

    // Start where a flat claim x/ΣwZ would be optimal at the mean kernel,
    // in log space because ΣwZ can underflow for extreme signal values.
    let ln_w = log_sum_exp(&log_w);
    let ln_wz = log_sum_exp(&cells.iter().zip(&log_w).map(|(c, lw)| lw + c.log_z).collect::<Vec<_>>());
    let curvature = match model.family {
        Family::Log => 1.0,
        Family::Power { gamma } => gamma,
    };
    let s0 = -curvature * (ln_x - ln_wz) + ln_w - ln_wz;
    let s0 = if s0.is_finite() { s0 } else { 0.0 };
    let mut step = std::f64::consts::LN_10;
    let (mut lo, mut hi) = (s0, s0);
    let (mut glo, mut ghi) = (g(lo), g(hi));
    let mut spent = 0.0;
    while glo < 0.0 {
        lo -= step;
        step *= 1.5;
        glo = g(lo);
        spent += 1.0;
        if spent > MAX_EXPANSIONS {
            return Err(LabError::BudgetUnreachable(format!("no multiplier below e^{s0} meets wealth {x}")));
        }
    }
    spent = 0.0;
    step = std::f64::consts::LN_10;
    while ghi > 0.0 {
        hi += step;
        step *= 1.5;
        ghi = g(hi);
        spent += 1.0;
        if spent > MAX_EXPANSIONS {
            return Err(LabError::BudgetUnreachable(format!("no multiplier above e^{s0} meets wealth {x}")));
        }
    }

    // Illinois false position with a bisection safeguard.
    let mut s = if glo == 0.0 { lo } else { hi };
    if glo != 0.0 && ghi != 0.0 {
        let mut side = 0i8;
        for iter in 0..400 {
            let mut cand = hi - ghi * (hi - lo) / (ghi - glo);
            if !(cand > lo && cand < hi) || iter % 8 == 7 {
                cand = 0.5 * (lo + hi);
            }
            let gc = g(cand);
            s = cand;
            if gc.abs() <= BUDGET_TOL || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
            if gc > 0.0 {
                lo = cand;
                glo = gc;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = cand;
                ghi = gc;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
            if iter == 399 {
                return Err(LabError::NoConvergence(format!("multiplier search at wealth {x}")));
            }
        }
    }
    Ok(finish(&cells, model, x, s))
}

fn finish(cells: &[WeightedCell], model: &UtilityModel, x: f64, s: f64) -> OptimalClaim {
    let lambda = s.exp();
    let log_m: Vec<f64> = cells.iter().map(|c| model.log_inv_marginal(s + c.log_z)).collect();
    let claims: Vec<f64> = log_m.iter().map(|l| l.exp()).collect();
    let utils: Vec<f64> = cells
        .iter()
        .zip(&log_m)
        .map(|(c, &lm)| c.weight * model.u_of_log(lm))
        .collect();
    let spend: Vec<f64> = cells
        .iter()
        .zip(&log_m)
        .map(|(c, &lm)| (c.weight.ln() + c.log_z + lm).exp())
        .collect();
    let kkt_residual = cells
        .iter()
        .zip(&claims)
        .map(|(c, &m)| (model.u_prime(m) / (lambda * c.log_z.exp()) - 1.0).abs())
        .fold(0.0, f64::max);
    OptimalClaim {
        lambda,
        claims,
        utility: pairwise_sum(&utils),
        budget_slack: x - pairwise_sum(&spend),
        kkt_residual,
    }
}

/// `u^Z(x)` for a pricing kernel; cells outside the support are dropped.
pub fn solve_complete_market(kernel: &PricingKernel, model: &UtilityModel, x: f64) -> Result<OptimalClaim> {
    solve_cells(&kernel_cells(kernel), model, x)
}

/// `v(y) = Σ w V(yZ)`.
pub fn dual_value_cells(cells: &[WeightedCell], model: &UtilityModel, y: f64) -> f64 {
    let terms: Vec<f64> = cells
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| c.weight * model.conj(y * c.log_z.exp()))
        .collect();
    pairwise_sum(&terms)
}

/// Dual value of a pricing kernel.
pub fn dual_value(kernel: &PricingKernel, model: &UtilityModel, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(LabError::InvalidArgument(format!("dual argument {y} must be positive")));
    }
    Ok(dual_value_cells(&kernel_cells(kernel), model, y))
}

/// Public value `u_n^{F_n}(x)` at the trading cutoff.
pub fn public_value(econ: &LatticeEconomy, params: &EmmParams, model: &UtilityModel, x: f64) -> Result<OptimalClaim> {
    solve_complete_market(&public_kernel(econ, params, econ.m_of_t)?, model, x)
}

/// The conditional problem for one signal value.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSolve {
    pub signal: usize,
    pub prob: f64,
    /// `Λ(y)`; `None` when `P[Y = y]` underflows and the value is skipped.
    pub multiplier: Option<f64>,
    pub value: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsiderSolution {
    pub m: usize,
    pub value: f64,
    pub per_signal: Vec<SignalSolve>,
    /// Signal values skipped because `P[Y = y]` underflows to zero.
    pub skipped: usize,
}

/// Insider value at the trading cutoff, building the table and parameters.
pub fn insider_value(
    econ: &LatticeEconomy,
    signal: &SignalFunctional,
    model: &UtilityModel,
    x: f64,
) -> Result<InsiderSolution> {
    let m = econ.m_of_t;
    if m == 0 {
        return Err(LabError::InvalidArgument("the trading cutoff must be at least one step".into()));
    }
    let params = calibrate_emm(econ.step_distribution(), econ.n)?;
    let table = conditional_density_table_at(econ, signal, &[m])?;
    insider_value_with(econ, &params, &table, model, x)
}

/// Conditional cells `(P^y weight, Z^F/η^y)` for signal index `y`.
pub fn conditional_cells(public: &PricingKernel, table: &ConditionalDensityTable, y: usize) -> Result<Vec<WeightedCell>> {
    let level = table
        .level(public.m)
        .ok_or_else(|| LabError::InvalidArgument(format!("density table has no date {}", public.m)))?;
    // Normalize in log space: for rare signal values every joint weight can
    // underflow even though the conditional law is well defined.
    let logged: Vec<(f64, f64)> = level
        .cells
        .iter()
        .enumerate()
        .filter_map(|(c, cell)| {
            let le = level.log_eta(c, y);
            (le > f64::NEG_INFINITY).then(|| (level.cell_log_prob[c] + le, public.public_log_z(cell.state) - le))
        })
        .collect();
    let norm = log_sum_exp(&logged.iter().map(|c| c.0).collect::<Vec<_>>());
    let cells = logged
        .into_iter()
        .map(|(lw, log_z)| WeightedCell {
            weight: (lw - norm).exp(),
            log_z,
        })
        .filter(|c| c.weight > 0.0)
        .collect();
    Ok(cells)
}

/// Insider value from precomputed parameters and density table: one problem
/// per signal value at wealth `x`, aggregated over the signal law.
pub fn insider_value_with(
    econ: &LatticeEconomy,
    params: &EmmParams,
    table: &ConditionalDensityTable,
    model: &UtilityModel,
    x: f64,
) -> Result<InsiderSolution> {
    let m = econ.m_of_t;
    let public = public_kernel(econ, params, m)?;
    let per_signal: Vec<SignalSolve> = table
        .values
        .par_iter()
        .enumerate()
        .map(|(y, v)| -> Result<SignalSolve> {
            if v.prob == 0.0 {
                return Ok(SignalSolve {
                    signal: y,
                    prob: 0.0,
                    multiplier: None,
                    value: 0.0,
                    support: 0,
                });
            }
            let cells = conditional_cells(&public, table, y)?;
            if cells.is_empty() {
                return Err(LabError::BudgetUnreachable(format!(
                    "signal value {} leaves no state with positive mass",
                    v.natural
                )));
            }
            let sol = solve_cells(&cells, model, x)?;
            Ok(SignalSolve {
                signal: y,
                prob: v.prob,
                multiplier: Some(sol.lambda),
                value: sol.utility,
                support: cells.len(),
            })
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<f64> = per_signal
        .iter()
        .filter(|s| s.multiplier.is_some())
        .map(|s| s.prob * s.value)
        .collect();
    let skipped = per_signal.iter().filter(|s| s.multiplier.is_none()).count();
    Ok(InsiderSolution {
        m,
        value: pairwise_sum(&weighted),
        per_signal,
        skipped,
    })
}

/// `E[ln η_m^Y]` under the joint law, the log-utility information gain.
pub fn information_gain(table: &ConditionalDensityTable, m: usize) -> Result<f64> {
    let level = table
        .level(m)
        .ok_or_else(|| LabError::InvalidArgument(format!("density table has no date {m}")))?;
    let mut terms = Vec::with_capacity(level.len() * table.values.len());
    for c in 0..level.len() {
        for (y, v) in table.values.iter().enumerate() {
            let le = level.log_eta(c, y);
            if le > f64::NEG_INFINITY {
                terms.push((level.cell_log_prob[c] + v.log_prob + le).exp() * le);
            }
        }
    }
    Ok(pairwise_sum(&terms))
}

pub const ORACLE_MAX_CELLS: usize = 10_000;
pub const ORACLE_KKT_TOL: f64 = 1e-10;
const ORACLE_MAX_ITER: usize = 500;

/// Independent check of [`solve_cells`]: projected Newton ascent on the
/// concave program using only `U`, `U′` and `U″`.
pub fn brute_force_oracle(cells: &[WeightedCell], model: &UtilityModel, x: f64) -> Result<OptimalClaim> {
    let cells: Vec<WeightedCell> = cells.iter().copied().filter(|c| c.weight > 0.0).collect();
    if cells.is_empty() {
        return Err(LabError::BudgetUnreachable("no cell carries positive weight".into()));
    }
    if cells.len() > ORACLE_MAX_CELLS {
        return Err(LabError::CapExceeded {
            what: "oracle cells",
            needed: cells.len() as u128,
            cap: ORACLE_MAX_CELLS as u128,
        });
    }
    let w: Vec<f64> = cells.iter().map(|c| c.weight).collect();
    let z: Vec<f64> = cells.iter().map(|c| c.log_z.exp()).collect();
    let a: Vec<f64> = w.iter().zip(&z).map(|(w, z)| w * z).collect();
    let objective = |m: &[f64]| -> f64 { m.iter().zip(&w).map(|(&mi, wi)| wi * model.u(mi)).sum() };
    let mut m = vec![x / a.iter().sum::<f64>(); cells.len()];
    let mut nu = 0.0;
    for iter in 0..=ORACLE_MAX_ITER {
        let g: Vec<f64> = m.iter().zip(&w).map(|(&mi, wi)| wi * model.u_prime(mi)).collect();
        let h: Vec<f64> = m.iter().zip(&w).map(|(&mi, wi)| wi * model.u_second(mi)).collect();
        let num: f64 = (0..m.len()).map(|i| a[i] * g[i] / h[i]).sum();
        let den: f64 = (0..m.len()).map(|i| a[i] * a[i] / h[i]).sum();
        nu = num / den;
        let kkt = (0..m.len())
            .map(|i| (g[i] / (nu * a[i]) - 1.0).abs())
            .fold(0.0, f64::max);
        if kkt <= ORACLE_KKT_TOL {
            break;
        }
        if iter == ORACLE_MAX_ITER {
            return Err(LabError::NoConvergence(format!(
                "oracle stopped with KKT residual {kkt:e}"
            )));
        }
        let d: Vec<f64> = (0..m.len()).map(|i| -(g[i] - nu * a[i]) / h[i]).collect();
        // Stay strictly inside the positive orthant, then backtrack.
        let mut step: f64 = 1.0;
        for (mi, di) in m.iter().zip(&d) {
            if *di < 0.0 {
                step = step.min(0.99 * -mi / di);
            }
        }
        let f0 = objective(&m);
        let slope: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        let mut trial: Vec<f64>;
        loop {
            trial = m.iter().zip(&d).map(|(mi, di)| mi + step * di).collect();
            if objective(&trial) >= f0 + 1e-4 * step * slope || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        m = trial;
    }
    let spend: Vec<f64> = m.iter().zip(&a).map(|(mi, ai)| mi * ai).collect();
    let utils: Vec<f64> = m.iter().zip(&w).map(|(&mi, wi)| wi * model.u(mi)).collect();
    let kkt_residual = (0..m.len())
        .map(|i| (model.u_prime(m[i]) / (nu * z[i]) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(OptimalClaim {
        lambda: nu,
        utility: pairwise_sum(&utils),
        budget_slack: x - pairwise_sum(&spend),
        claims: m,
        kkt_residual,
    })
}

/// Result of the conjugate-duality check at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateGap {
    pub gap: f64,
    /// Minimizer of `v(y) + xy`.
    pub y_star: f64,
    pub dual_bound: f64,
}

/// `|u(x) − min_y (v(y) + xy)|`, with the minimum located on `grid` and
/// refined by golden-section search in `ln y`.
pub fn conjugate_gap<V: Fn(f64) -> f64>(u_x: f64, v: V, x: f64, grid: &[f64]) -> Result<ConjugateGap> {
    if grid.len() < 3 {
        return Err(LabError::InvalidArgument("dual grid needs at least three points".into()));
    }
    let h = |y: f64| v(y) + x * y;
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &y)| (i, h(y)))
        .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
    if best == 0 || best == grid.len() - 1 {
        return Err(LabError::GridBoundary(format!(
            "v(y) + {x}·y is smallest at y = {:e}; widen the grid",
            grid[best]
        )));
    }
    let (ly, fy) = golden_section_min(|l| h(l.exp()), grid[best - 1].ln(), grid[best + 1].ln(), 1e-12);
    Ok(ConjugateGap {
        gap: (u_x - fy).abs(),
        y_star: ly.exp(),
        dual_bound: fy,
    })
}

/// Default dual grid for [`conjugate_gap`].
pub fn default_dual_grid() -> Vec<f64> {
    log_grid(1e-8, 1e8, 10)
}

/// Sampled primal and dual value functions of one market.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunctions {
    pub primal: Vec<(f64, f64)>,
    pub dual: Vec<(f64, f64)>,
    /// `(x, gap)` for every primal sample.
    pub gaps: Vec<(f64, f64)>,
}

pub fn value_functions(cells: &[WeightedCell], model: &UtilityModel, xs: &[f64], ys: &[f64]) -> Result<ValueFunctions> {
    let primal = xs
        .iter()
        .map(|&x| Ok((x, solve_cells(cells, model, x)?.utility)))
        .collect::<Result<Vec<_>>>()?;
    let dual = ys.iter().map(|&y| (y, dual_value_cells(cells, model, y))).collect();
    let grid = default_dual_grid();
    let gaps = primal
        .iter()
        .map(|&(x, u)| Ok((x, conjugate_gap(u, |y| dual_value_cells(cells, model, y), x, &grid)?.gap)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueFunctions { primal, dual, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::insider_kernel;
    use crate::signals::conditional_density_table;
    use crate::walks::{build_lattice, make_step_distribution, StepSpec};

    fn rad_econ(n: usize, t: f64) -> (LatticeEconomy, EmmParams) {
        let d = make_step_distribution(&StepSpec::Rademacher).unwrap();
        (build_lattice(&d, n, t).unwrap(), calibrate_emm(&d, n).unwrap())
    }

    #[test]
    fn log_one_step_public() {
        let (e, p) = rad_econ(1, 1.0);
        let sol = public_value(&e, &p, &UtilityModel::log(), 1.0).unwrap();
        let b1 = ((1.0 + 1f64.exp()) / 2.0).ln() - 0.5;
        assert!((sol.utility - b1).abs() < 1e-14);
        assert!((sol.lambda - 1.0).abs() < 1e-12);
        assert!(sol.budget_slack.abs() < 1e-12 && sol.kkt_residual < 1e-12);
    }

    #[test]
    fn power_one_step_matches_closed_form_and_oracle() {
        let (e, p) = rad_econ(1, 1.0);
        let k = public_kernel(&e, &p, 1).unwrap();
        let model = UtilityModel::power(2.0).unwrap();
        let sol = solve_complete_market(&k, &model, 1.0).unwrap();
        // λ = (E[Z^{1/2}])², u = −E[Z^{1/2}]².
        let ez: f64 = k.cells.iter().map(|c| c.prob * c.z().unwrap().sqrt()).sum();
        assert!((sol.lambda - ez * ez).abs() < 1e-12);
        assert!((sol.utility + ez * ez).abs() < 1e-12);
        let orc = brute_force_oracle(&kernel_cells(&k), &model, 1.0).unwrap();
        assert!((orc.utility - sol.utility).abs() < 1e-8);
    }

    #[test]
    fn dual_values() {
        let (e, p) = rad_econ(1, 1.0);
        let k = public_kernel(&e, &p, 1).unwrap();
        let v = dual_value(&k, &UtilityModel::log(), 1.0).unwrap();
        assert!((v - (p.b - 1.0)).abs() < 1e-15);
        assert!((v + 0.879885).abs() < 1e-6);
        // γ = 1/2: V(y) = 1/y, so v(y) = E[1/Z]/y ≤ L y^{-α} E[Z^{-α}] with (1, 1).
        let model = UtilityModel::power(0.5).unwrap();
        for y in [0.1, 1.0, 7.0] {
            let v = dual_value(&k, &model, y).unwrap();
            let bound: f64 = k.cells.iter().map(|c| c.prob / (y * c.z().unwrap())).sum();
            assert!(v <= bound * (1.0 + 1e-14));
        }
    }

    #[test]
    fn single_cell_market() {
        let cells = [WeightedCell::new(1.0, 1.0)];
        for model in [UtilityModel::log(), UtilityModel::power(2.0).unwrap()] {
            let s = solve_cells(&cells, &model, 3.0).unwrap();
            assert!((s.claims[0] - 3.0).abs() < 1e-12);
            assert!((s.utility - model.u(3.0)).abs() < 1e-12);
            let o = brute_force_oracle(&cells, &model, 3.0).unwrap();
            assert!((o.utility - model.u(3.0)).abs() < 1e-14);
            let g = conjugate_gap(s.utility, |y| dual_value_cells(&cells, &model, y), 3.0, &default_dual_grid()).unwrap();
            assert!(g.gap < 1e-6);
        }
    }

    #[test]
    fn insider_two_steps_log() {
        let (e, p) = rad_econ(2, 0.5);
        let tab = conditional_density_table(&e, &SignalFunctional::TerminalValue).unwrap();
        let sol = insider_value_with(&e, &p, &tab, &UtilityModel::log(), 1.0).unwrap();
        let gain = information_gain(&tab, 1).unwrap();
        assert!((gain - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((p.b - 0.122479).abs() < 1e-6);
        assert!((sol.value - (p.b / 2.0 + gain)).abs() < 1e-12);
        assert!((sol.value - 0.4078).abs() < 1e-4);
    }

    #[test]
    fn oracle_three_steps_power() {
        let (e, p) = rad_econ(3, 1.0);
        let k = public_kernel(&e, &p, 3).unwrap();
        let model = UtilityModel::power(2.0).unwrap();
        let s = solve_complete_market(&k, &model, 1.0).unwrap();
        let o = brute_force_oracle(&kernel_cells(&k), &model, 1.0).unwrap();
        assert!((s.utility - o.utility).abs() < 1e-8);
        assert!(o.kkt_residual < 1e-9);
    }

    #[test]
    fn future_ratio_insider_equals_public() {
        let (e, p) = rad_econ(10, 0.5);
        let model = UtilityModel::power(0.5).unwrap();
        let ins = insider_value(&e, &SignalFunctional::FutureRatio { anchor_t: 0.5 }, &model, 2.0).unwrap();
        let pubv = public_value(&e, &p, &model, 2.0).unwrap();
        assert!((ins.value - pubv.utility).abs() < 1e-12);
    }

    #[test]
    fn joint_insider_kernel_gap() {
        let (e, p) = rad_econ(8, 0.5);
        let tab = conditional_density_table(&e, &SignalFunctional::TerminalValue).unwrap();
        let k = insider_kernel(&public_kernel(&e, &p, 4).unwrap(), &tab).unwrap();
        let model = UtilityModel::power(2.0).unwrap();
        let cells = kernel_cells(&k);
        let s = solve_cells(&cells, &model, 2.0).unwrap();
        let g = conjugate_gap(s.utility, |y| dual_value_cells(&cells, &model, y), 2.0, &default_dual_grid()).unwrap();
        assert!(g.gap < 1e-9, "{g:?}");
    }

    #[test]
    fn gap_rejects_boundary_minimum() {
        let cells = [WeightedCell::new(1.0, 1.0)];
        let model = UtilityModel::log();
        let r = conjugate_gap(0.0, |y| dual_value_cells(&cells, &model, y), 1.0, &[1e-3, 1e-2, 1e-1]);
        assert!(matches!(r, Err(LabError::GridBoundary(_))));
    }
}
