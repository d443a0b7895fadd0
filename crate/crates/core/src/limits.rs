//! Continuous-time reference values in the Black-Scholes-Merton model with
//! unit volatility, where `Z^F_t = exp(−W_t/2 − t/8)` and the insider knows
//! `W_1`.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::numeric::log_grid;
use crate::optimize::{conjugate_gap, dual_value_cells, solve_cells, WeightedCell};
use crate::signals::{log_gaussian_eta, SignalFunctional};
use crate::utility::{Family, UtilityModel};

/// Gauss-Legendre nodes on `[−R, R]` with weights multiplied by the
/// standard normal density, so `Σ w f(z) ≈ E[f(Z)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub radius: f64,
}

pub const DEFAULT_NODES: usize = 200;
pub const DEFAULT_RADIUS: f64 = 8.0;

impl QuadratureRule {
    pub fn new(count: usize, radius: f64) -> Self {
        let (x, w) = gauss_legendre(count);
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let nodes: Vec<f64> = x.iter().map(|&t| radius * t).collect();
        let weights = nodes.iter().zip(&w).map(|(&z, &wi)| radius * wi * phi(z)).collect();
        QuadratureRule { nodes, weights, radius }
    }

    /// `E[f(Z)]` for standard normal `Z`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::new(DEFAULT_NODES, DEFAULT_RADIUS)
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[−1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and its derivative.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A continuous value with its dual certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitValue {
    pub value: f64,
    /// `min_y (v(y) + xy)`, aggregated per signal value for the insider.
    pub dual_value: f64,
    pub gap: f64,
}

/// Signals with a continuous counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousSignal {
    /// The insider knows `W_1`.
    TerminalBrownian,
    /// The insider knows `S_1/S_t`, independent of `F_t`.
    FutureRatio,
}

impl ContinuousSignal {
    pub fn from_discrete(signal: &SignalFunctional) -> Result<Self> {
        match signal {
            SignalFunctional::TerminalValue => Ok(ContinuousSignal::TerminalBrownian),
            SignalFunctional::FutureRatio { .. } => Ok(ContinuousSignal::FutureRatio),
            SignalFunctional::RunningMax => Err(LabError::Unsupported(
                "no continuous limit is implemented for the running maximum".into(),
            )),
        }
    }
}

/// Tolerance for the quadrature information term against its closed form.
pub const INFORMATION_TOL: f64 = 1e-8;

/// `E[ln η_t^{W_1}(W_t)]` by double quadrature over `(W_t, W_1)`.
pub fn information_term(t: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(LabError::InvalidArgument(format!("information term needs 0 < t < 1, got {t}")));
    }
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    let mut total = 0.0;
    for (&z1, &w1) in rule.nodes.iter().zip(&rule.weights) {
        let x = st * z1;
        let inner = rule.expect(|z2| log_gaussian_eta(t, x, x + sr * z2).unwrap());
        total += w1 * inner;
    }
    Ok(total)
}

/// Closed form `−½ ln(1 − t)` of the information term.
pub fn information_term_exact(t: f64) -> f64 {
    -0.5 * (1.0 - t).ln()
}

fn check_time(t: f64, upper_inclusive: bool) -> Result<()> {
    let ok = t > 0.0 && if upper_inclusive { t <= 1.0 } else { t < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("horizon t = {t} out of range")))
    }
}

/// Solves one quadrature market and certifies it with the conjugate gap.
fn solve_market(cells: &[WeightedCell], model: &UtilityModel, x: f64) -> Result<LimitValue> {
    let sol = solve_cells(cells, model, x)?;
    // Extreme signal values push the multiplier far from 1, so the dual grid
    // spans eight decades around it rather than a fixed range.
    let grid = log_grid(sol.lambda * 1e-4, sol.lambda * 1e4, 10);
    let g = conjugate_gap(sol.utility, |y| dual_value_cells(cells, model, y), x, &grid)?;
    Ok(LimitValue {
        value: sol.utility,
        dual_value: g.dual_bound,
        gap: g.gap,
    })
}

/// Public cells: `W_t = √t·z` with kernel `exp(−W_t/2 − t/8)`.
fn public_cells(t: f64, rule: &QuadratureRule) -> Vec<WeightedCell> {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&z, &w)| WeightedCell {
            weight: w,
            log_z: -t.sqrt() * z / 2.0 - t / 8.0,
        })
        .collect()
}

/// `u^F(x)` at horizon `t`.
pub fn bsm_public_value(model: &UtilityModel, x: f64, t: f64) -> Result<f64> {
    Ok(bsm_public_value_with(model, x, t, &QuadratureRule::default())?.value)
}

pub fn bsm_public_value_with(model: &UtilityModel, x: f64, t: f64, rule: &QuadratureRule) -> Result<LimitValue> {
    check_time(t, true)?;
    match model.family {
        Family::Log => {
            let v = x.ln() + t / 8.0 + model.shift;
            Ok(LimitValue {
                value: v,
                dual_value: v,
                gap: 0.0,
            })
        }
        Family::Power { .. } => solve_market(&public_cells(t, rule), model, x),
    }
}

/// `u^G(x)` at horizon `t` for the given signal.
pub fn bsm_insider_value(model: &UtilityModel, x: f64, t: f64, signal: ContinuousSignal) -> Result<f64> {
    Ok(bsm_insider_value_with(model, x, t, signal, &QuadratureRule::default())?.value)
}

pub fn bsm_insider_value_with(
    model: &UtilityModel,
    x: f64,
    t: f64,
    signal: ContinuousSignal,
    rule: &QuadratureRule,
) -> Result<LimitValue> {
    if signal == ContinuousSignal::FutureRatio {
        return bsm_public_value_with(model, x, t, rule);
    }
    check_time(t, false)?;
    match model.family {
        Family::Log => {
            let info = information_term(t, rule)?;
            let exact = information_term_exact(t);
            if (info - exact).abs() > INFORMATION_TOL {
                return Err(LabError::VerificationFailed(format!(
                    "information term {info} differs from {exact} at t = {t}"
                )));
            }
            let v = x.ln() + t / 8.0 + info + model.shift;
            Ok(LimitValue {
                value: v,
                dual_value: v,
                gap: 0.0,
            })
        }
        Family::Power { .. } => {
            // Given W_1 = y, W_t ~ N(t·y, t(1−t)); solve each conditional market.
            let sd = (t * (1.0 - t)).sqrt();
            let (mut value, mut dual) = (0.0, 0.0);
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                let cells: Vec<WeightedCell> = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&z, &w)| {
                        let xw = t * y + sd * z;
                        WeightedCell {
                            weight: w,
                            log_z: -xw / 2.0 - t / 8.0 - log_gaussian_eta(t, xw, y).unwrap(),
                        }
                    })
                    .collect();
                let lv = solve_market(&cells, model, x)?;
                value += wy * lv.value;
                dual += wy * lv.dual_value;
            }
            Ok(LimitValue {
                value,
                dual_value: dual,
                gap: (value - dual).abs(),
            })
        }
    }
}
