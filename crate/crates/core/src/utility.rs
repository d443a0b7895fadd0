//! Log and power utilities with their marginals, inverse marginals and
//! convex conjugates `V(y) = sup_x (U(x) − xy)`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::log_grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Log,
    /// `U(x) = x^{1−γ}/(1−γ)` with `γ > 0`, `γ ≠ 1`.
    Power { gamma: f64 },
}

/// A utility function, optionally shifted by a constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub family: Family,
    #[serde(default)]
    pub shift: f64,
}

/// Which function to evaluate through [`UtilityModel::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    U,
    UPrime,
    I,
    V,
    VPrime,
}

impl UtilityModel {
    pub fn log() -> Self {
        UtilityModel {
            family: Family::Log,
            shift: 0.0,
        }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || gamma == 1.0 {
            return Err(LabError::InvalidArgument(format!(
                "power utility needs gamma > 0 and gamma != 1, got {gamma}"
            )));
        }
        Ok(UtilityModel {
            family: Family::Power { gamma },
            shift: 0.0,
        })
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    /// Short label used in sweep output, e.g. `log` or `power2`.
    pub fn label(&self) -> String {
        match self.family {
            Family::Log => "log".into(),
            Family::Power { gamma } => format!("power{gamma}"),
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        self.shift
            + match self.family {
                Family::Log => x.ln(),
                Family::Power { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
            }
    }

    pub fn u_prime(&self, x: f64) -> f64 {
        match self.family {
            Family::Log => 1.0 / x,
            Family::Power { gamma } => x.powf(-gamma),
        }
    }

    pub fn u_second(&self, x: f64) -> f64 {
        match self.family {
            Family::Log => -1.0 / (x * x),
            Family::Power { gamma } => -gamma * x.powf(-gamma - 1.0),
        }
    }

    /// Inverse marginal `I = (U′)⁻¹`.
    pub fn inv_marginal(&self, y: f64) -> f64 {
        match self.family {
            Family::Log => 1.0 / y,
            Family::Power { gamma } => y.powf(-1.0 / gamma),
        }
    }

    /// `ln I(e^{ln_y})`, for budget sums evaluated in log space.
    pub fn log_inv_marginal(&self, ln_y: f64) -> f64 {
        match self.family {
            Family::Log => -ln_y,
            Family::Power { gamma } => -ln_y / gamma,
        }
    }

    /// `U(e^{ln_x})` without forming `e^{ln_x}` first.
    pub fn u_of_log(&self, ln_x: f64) -> f64 {
        self.shift
            + match self.family {
                Family::Log => ln_x,
                Family::Power { gamma } => ((1.0 - gamma) * ln_x).exp() / (1.0 - gamma),
            }
    }

    /// Conjugate `V(y) = U(I(y)) − y·I(y)`.
    pub fn conj(&self, y: f64) -> f64 {
        self.shift
            + match self.family {
                Family::Log => -y.ln() - 1.0,
                Family::Power { gamma } => gamma / (1.0 - gamma) * y.powf((gamma - 1.0) / gamma),
            }
    }

    /// `V′(y) = −I(y)`.
    pub fn conj_prime(&self, y: f64) -> f64 {
        -self.inv_marginal(y)
    }

    /// Checked evaluation of any of the five functions.
    pub fn evaluate(&self, which: Which, arg: f64) -> Result<f64> {
        if !(arg > 0.0) || !arg.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "utility argument must be positive and finite, got {arg}"
            )));
        }
        Ok(match which {
            Which::U => self.u(arg),
            Which::UPrime => self.u_prime(arg),
            Which::I => self.inv_marginal(arg),
            Which::V => self.conj(arg),
            Which::VPrime => self.conj_prime(arg),
        })
    }
}

/// Closed-form asymptotic elasticity `limsup_{x→∞} xU′(x)/U(x)`.
///
/// Eventually negative utilities report 0.
pub fn asymptotic_elasticity(model: &UtilityModel) -> f64 {
    match model.family {
        Family::Log => 0.0,
        Family::Power { gamma } => (1.0 - gamma).max(0.0),
    }
}

/// Points `ln x` at which the elasticity ratio is sampled.
pub const AE_LOG_GRID: [f64; 3] = [1e2, 1e4, 1e6];

/// Elasticity ratio `xU′(x)/U(x)` sampled at `x = e^L` for each `L` in
/// [`AE_LOG_GRID`]. Evaluated in log coordinates so nothing overflows.
pub fn elasticity_profile(model: &UtilityModel) -> Vec<f64> {
    AE_LOG_GRID
        .iter()
        .map(|&l| {
            let c = model.shift;
            let r = match model.family {
                Family::Log => 1.0 / (l + c),
                Family::Power { gamma } => {
                    1.0 / (1.0 / (1.0 - gamma) + c * (-(1.0 - gamma) * l).exp())
                }
            };
            if r.is_nan() {
                0.0
            } else {
                r.max(0.0)
            }
        })
        .collect()
}

/// Numerical elasticity: the profile value at the far end of the grid.
pub fn asymptotic_elasticity_numeric(model: &UtilityModel) -> f64 {
    *elasticity_profile(model).last().unwrap()
}

/// Grid on which dual bounds are verified.
pub fn dual_bound_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 20)
}

/// Constants `(L, α)` with `V(y) ≤ L·y^{−α}`, verified on [`dual_bound_grid`].
pub fn dual_bound_constants(model: &UtilityModel) -> Result<(f64, f64)> {
    if asymptotic_elasticity(model) >= 1.0 {
        return Err(LabError::InvalidArgument(
            "asymptotic elasticity must be below 1".into(),
        ));
    }
    let c = model.shift;
    let (l, alpha) = match model.family {
        Family::Power { gamma } if gamma < 1.0 => (gamma / (1.0 - gamma), (1.0 - gamma) / gamma),
        Family::Power { .. } if c <= 0.0 => (1.0, 1.0),
        // sup_y y(−ln y − 1 + c) is attained at y = e^{c−2}.
        Family::Log => ((c - 2.0).exp(), 1.0),
        Family::Power { .. } => {
            let sup = dual_bound_grid()
                .iter()
                .map(|&y| model.conj(y) * y)
                .fold(f64::NEG_INFINITY, f64::max);
            (sup.max(f64::MIN_POSITIVE), 1.0)
        }
    };
    for y in dual_bound_grid() {
        let v = model.conj(y);
        let bound = l * y.powf(-alpha);
        if v > bound * (1.0 + 1e-12) + 1e-14 {
            return Err(LabError::VerificationFailed(format!(
                "V({y:e}) = {v} exceeds {l}·y^-{alpha} = {bound}; the shift {c} is invalid"
            )));
        }
    }
    Ok((l, alpha))
}
