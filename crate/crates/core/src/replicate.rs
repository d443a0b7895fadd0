//! Delta hedging of terminal-price claims along lattice paths.
//!
//! The hedge uses the continuous risk-neutral price `f(s, u)` (log-price
//! drift `−1/2`, unit volatility) and its delta `g = ∂f/∂s`. Along an
//! `n`-step lattice path on `[0, t]` the forward sum
//! `I_n = Σ g(S_k, u_k)(S_{k+1} − S_k)` is compared with the payoff.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::limits::gauss_legendre;
use crate::measures::{calibrate_step, public_kernel, EmmParams};
use crate::numeric::pairwise_sum;
use crate::signals::log_gaussian_eta;
use crate::walks::{build_lattice_scaled, LatticeEconomy, StepDistribution, DEFAULT_STATE_CAP};

/// Bounded terminal-price payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimSpec {
    /// `min(max(s − K, 0), B)`.
    CappedCall { strike: f64, cap: f64 },
    /// `cash` when `s ≥ strike`, else 0.
    CashOrNothing { strike: f64, cash: f64 },
    Constant { value: f64 },
    /// `s` clamped to `[floor, ceiling]`.
    Collar { floor: f64, ceiling: f64 },
}

impl ClaimSpec {
    pub fn payoff(&self, s: f64) -> f64 {
        match *self {
            ClaimSpec::CappedCall { strike, cap } => (s - strike).max(0.0).min(cap),
            ClaimSpec::CashOrNothing { strike, cash } => {
                if s >= strike {
                    cash
                } else {
                    0.0
                }
            }
            ClaimSpec::Constant { value } => value,
            ClaimSpec::Collar { floor, ceiling } => s.clamp(floor, ceiling),
        }
    }

    /// `(M_low, M_high)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ClaimSpec::CappedCall { cap, .. } => (0.0, cap),
            ClaimSpec::CashOrNothing { cash, .. } => (0.0, cash),
            ClaimSpec::Constant { value } => (value, value),
            ClaimSpec::Collar { floor, ceiling } => (floor, ceiling),
        }
    }

    /// Prices where the payoff is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            ClaimSpec::CappedCall { strike, cap } => vec![strike, strike + cap],
            ClaimSpec::CashOrNothing { strike, .. } => vec![strike],
            ClaimSpec::Constant { .. } => Vec::new(),
            ClaimSpec::Collar { floor, ceiling } => vec![floor, ceiling],
        }
    }

    /// Parameter checks plus a bounds audit on a price grid.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ClaimSpec::CappedCall { strike, cap } => strike >= 0.0 && cap > 0.0 && cap.is_finite(),
            ClaimSpec::CashOrNothing { strike, cash } => strike > 0.0 && cash >= 0.0 && cash.is_finite(),
            ClaimSpec::Constant { value } => value.is_finite(),
            ClaimSpec::Collar { floor, ceiling } => floor > 0.0 && ceiling >= floor && ceiling.is_finite(),
        };
        if !ok {
            return Err(LabError::InvalidArgument(format!("invalid claim parameters {self:?}")));
        }
        let (lo, hi) = self.bounds();
        for s in crate::numeric::log_grid(1e-6, 1e6, 10) {
            let v = self.payoff(s);
            if !(lo..=hi).contains(&v) {
                return Err(LabError::InvalidArgument(format!(
                    "payoff {v} at s = {s} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

const SEGMENT_NODES: usize = 64;
const SEGMENT_RADIUS: f64 = 10.0;

fn segment_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(SEGMENT_NODES))
}

/// `E[f(mean + sd·Z)]` for standard normal `Z`, with Gauss-Legendre panels
/// split at the given breakpoints in the argument of `f`.
fn normal_expect_split<F: Fn(f64) -> f64>(mean: f64, sd: f64, breaks: &[f64], f: F) -> f64 {
    let (x, w) = segment_rule();
    let mut cuts = vec![-SEGMENT_RADIUS];
    let mut inner: Vec<f64> = breaks
        .iter()
        .map(|&b| (b - mean) / sd)
        .filter(|z| z.abs() < SEGMENT_RADIUS)
        .collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(SEGMENT_RADIUS);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        if half <= 0.0 {
            continue;
        }
        for (&xi, &wi) in x.iter().zip(w) {
            let z = mid + half * xi;
            total += half * wi * norm * (-0.5 * z * z).exp() * f(mean + sd * z);
        }
    }
    total
}

fn check_times(t: f64, u: f64, s: f64) -> Result<()> {
    if !(t > 0.0 && (0.0..=t).contains(&u) && s > 0.0 && s.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "pricing needs 0 <= u <= t, t > 0 and s > 0; got t = {t}, u = {u}, s = {s}"
        )));
    }
    Ok(())
}

fn price_unchecked(claim: &ClaimSpec, t: f64, u: f64, s: f64) -> f64 {
    let tau = t - u;
    if tau <= 0.0 {
        return claim.payoff(s);
    }
    let breaks: Vec<f64> = claim.kinks().into_iter().filter(|&k| k > 0.0).map(f64::ln).collect();
    normal_expect_split(s.ln() - tau / 2.0, tau.sqrt(), &breaks, |l| claim.payoff(l.exp()))
}

/// Risk-neutral price `f(s, u) = E[M(S_t) | S_u = s]`.
pub fn pricing_function(claim: &ClaimSpec, t: f64, u: f64, s: f64) -> Result<f64> {
    check_times(t, u, s)?;
    Ok(price_unchecked(claim, t, u, s))
}

fn central(claim: &ClaimSpec, t: f64, u: f64, s: f64, h: f64) -> f64 {
    (price_unchecked(claim, t, u, s + h) - price_unchecked(claim, t, u, s - h)) / (2.0 * h)
}

fn delta_with_step(claim: &ClaimSpec, t: f64, u: f64, s: f64, h: f64) -> f64 {
    let h = h.min(0.5 * s);
    (4.0 * central(claim, t, u, s, h / 2.0) - central(claim, t, u, s, h)) / 3.0
}

/// Finite-difference step used by [`delta_hedge`].
pub fn delta_step(s: f64) -> f64 {
    (1e-5 * s).max(1e-5)
}

/// Hedge ratio `g(s, u) = ∂f/∂s` by Richardson-extrapolated central differences.
pub fn delta_hedge(claim: &ClaimSpec, t: f64, u: f64, s: f64) -> Result<f64> {
    check_times(t, u, s)?;
    Ok(delta_with_step(claim, t, u, s, delta_step(s)))
}

/// [`delta_hedge`] with a caller-chosen base step, for step-halving checks.
pub fn delta_hedge_step(claim: &ClaimSpec, t: f64, u: f64, s: f64, h: f64) -> Result<f64> {
    check_times(t, u, s)?;
    if !(h > 0.0) {
        return Err(LabError::InvalidArgument(format!("step {h} must be positive")));
    }
    Ok(delta_with_step(claim, t, u, s, h))
}

/// Price seen by an insider who knows `W_1 = y`, computed under the
/// insider pricing kernel `Z^G = Z^F/η` along the Brownian bridge from
/// `(u, ln s)` to `(1, y)`. Independence of the signal under that kernel makes
/// this agree with [`pricing_function`].
pub fn insider_pricing_function(claim: &ClaimSpec, t: f64, u: f64, s: f64, y: f64) -> Result<f64> {
    check_times(t, u, s)?;
    if t >= 1.0 {
        return Err(LabError::InvalidArgument(format!("insider pricing needs t < 1, got {t}")));
    }
    let w = s.ln();
    let tau = t - u;
    if tau <= 0.0 {
        return Ok(claim.payoff(s));
    }
    let mean = w + tau / (1.0 - u) * (y - w);
    let sd = (tau * (1.0 - t) / (1.0 - u)).sqrt();
    let eta_u = log_gaussian_eta(u, w, y)?;
    let breaks: Vec<f64> = claim.kinks().into_iter().filter(|&k| k > 0.0).map(f64::ln).collect();
    let ratio = |x: f64| {
        (-(x - w) / 2.0 - tau / 8.0 + eta_u - log_gaussian_eta(t, x, y).unwrap()).exp()
    };
    let num = normal_expect_split(mean, sd, &breaks, |x| ratio(x) * claim.payoff(x.exp()));
    let den = normal_expect_split(mean, sd, &breaks, ratio);
    Ok(num / den)
}

/// Law used to draw lattice steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMeasure {
    /// The step law itself. The martingale-preserving measure agrees with it
    /// on the public filtration.
    #[default]
    Physical,
    /// The calibrated lattice martingale measure.
    RiskNeutral,
}

/// A hedging lattice with its precomputed deltas.
#[derive(Debug, Clone)]
pub struct HedgeLattice {
    pub econ: LatticeEconomy,
    pub params: EmmParams,
    pub claim: ClaimSpec,
    /// `deltas[k][i]` is `g` at state `i` of date `k < n`.
    pub deltas: Vec<Vec<f64>>,
}

/// Builds an `n`-step lattice on `[0, t]` and tabulates the hedge ratios.
pub fn hedge_lattice(dist: &StepDistribution, claim: &ClaimSpec, n: usize, t: f64) -> Result<HedgeLattice> {
    claim.validate()?;
    let econ = build_lattice_scaled(dist, n, t, DEFAULT_STATE_CAP)?;
    let params = calibrate_step(dist, n, econ.step_scale)?;
    let deltas = (0..n)
        .into_par_iter()
        .map(|k| {
            let u = t * k as f64 / n as f64;
            (0..econ.level_len(k))
                .map(|i| delta_with_step(claim, t, u, econ.price_at(k, i), delta_step(econ.price_at(k, i))))
                .collect()
        })
        .collect();
    Ok(HedgeLattice {
        econ,
        params,
        claim: *claim,
        deltas,
    })
}

impl HedgeLattice {
    /// Lattice price `E_{P̃^n}[M(S_t)]` under the calibrated measure.
    pub fn lattice_price(&self) -> Result<f64> {
        price_on(&self.econ, &self.params, &self.claim)
    }

    /// Per-step atom probabilities under the chosen measure.
    pub fn step_probs(&self, measure: PathMeasure) -> Vec<f64> {
        let atoms = self.econ.step_distribution().atoms();
        match measure {
            PathMeasure::Physical => atoms.iter().map(|a| a.1).collect(),
            PathMeasure::RiskNeutral => atoms
                .iter()
                .map(|&(v, p)| p * (-self.params.step_drift * v - self.params.step_const).exp())
                .collect(),
        }
    }

    /// Forward sum along the state path `states[0..=n]`, also returning the
    /// running portfolio range `M₀ + I_k`.
    pub fn forward_sum(&self, states: &[usize], m0: f64) -> (f64, f64, f64) {
        let mut ito = 0.0;
        let (mut lo, mut hi) = (m0, m0);
        for k in 0..states.len() - 1 {
            let ds = self.econ.price_at(k + 1, states[k + 1]) - self.econ.price_at(k, states[k]);
            ito += self.deltas[k][states[k]] * ds;
            lo = lo.min(m0 + ito);
            hi = hi.max(m0 + ito);
        }
        (ito, lo, hi)
    }
}

fn price_on(econ: &LatticeEconomy, params: &EmmParams, claim: &ClaimSpec) -> Result<f64> {
    let n = econ.n;
    let k = public_kernel(econ, params, n)?;
    let terms: Vec<f64> = k
        .cells
        .iter()
        .map(|c| c.prob * c.z().unwrap_or(0.0) * claim.payoff(econ.price_at(n, c.state)))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Lattice price of the claim on `n` steps over `[0, t]`, without the
/// delta table.
pub fn lattice_price(dist: &StepDistribution, claim: &ClaimSpec, n: usize, t: f64) -> Result<f64> {
    claim.validate()?;
    let econ = build_lattice_scaled(dist, n, t, DEFAULT_STATE_CAP)?;
    let params = calibrate_step(dist, n, econ.step_scale)?;
    price_on(&econ, &params, claim)
}

/// Forward sum for an explicit price path at equally spaced dates on `[0, t]`.
pub fn forward_ito_sum(claim: &ClaimSpec, prices: &[f64], t: f64) -> Result<f64> {
    if prices.len() < 2 {
        return Err(LabError::InvalidArgument("a path needs at least two prices".into()));
    }
    let n = prices.len() - 1;
    let mut ito = 0.0;
    for k in 0..n {
        let u = t * k as f64 / n as f64;
        ito += delta_hedge(claim, t, u, prices[k])? * (prices[k + 1] - prices[k]);
    }
    Ok(ito)
}

/// Path-wise check that `M₀ + I_k` stays in `[M_low − ε, M_high + ε]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeAudit {
    pub min_value: f64,
    pub max_value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Paths that left the band at some date.
    pub violations: usize,
}

impl RangeAudit {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub n: usize,
    pub t: f64,
    pub eps: f64,
    pub trials: usize,
    pub measure: PathMeasure,
    pub exceedances: usize,
    /// Estimated `P[|M₀ + I_n − M| > ε]`.
    pub exceedance: f64,
    pub std_error: f64,
    /// 95% normal-approximation half-width.
    pub half_width: f64,
    /// Initial investment `f(1, 0)`.
    pub m0: f64,
    pub mean_ito: f64,
    pub ito_std_error: f64,
    pub audit: RangeAudit,
}

pub const MIN_TRIALS: usize = 1000;

/// Experiment settings beyond the claim.
#[derive(Debug, Clone)]
pub struct ReplicationSetup {
    pub dist: StepDistribution,
    pub n: usize,
    pub t: f64,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub measure: PathMeasure,
}

/// Rademacher steps under the physical law.
pub fn replication_experiment(
    claim: &ClaimSpec,
    n: usize,
    t: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<ReplicationResult> {
    let dist = crate::walks::make_step_distribution(&crate::walks::StepSpec::Rademacher)?;
    replication_experiment_with(
        claim,
        &ReplicationSetup {
            dist,
            n,
            t,
            eps,
            trials,
            seed,
            measure: PathMeasure::Physical,
        },
    )
}

struct Trial {
    ito: f64,
    miss: bool,
    escaped: bool,
    lo: f64,
    hi: f64,
}

/// Runs `trials` seeded paths. Trial `k` draws from the ChaCha stream `k`
/// of `seed`, so results do not depend on the thread count.
pub fn replication_experiment_with(claim: &ClaimSpec, setup: &ReplicationSetup) -> Result<ReplicationResult> {
    if setup.trials < MIN_TRIALS {
        return Err(LabError::InvalidArgument(format!(
            "at least {MIN_TRIALS} trials are required, got {}",
            setup.trials
        )));
    }
    if !(setup.eps > 0.0) {
        return Err(LabError::InvalidArgument(format!("eps = {} must be positive", setup.eps)));
    }
    let lat = hedge_lattice(&setup.dist, claim, setup.n, setup.t)?;
    let m0 = price_unchecked(claim, setup.t, 0.0, 1.0);
    let probs = lat.step_probs(setup.measure);
    let mut cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|c| *c /= total);
    let (low, high) = claim.bounds();
    let (lower, upper) = (low - setup.eps, high + setup.eps);
    let n = setup.n;

    let trials: Vec<Trial> = (0..setup.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
            rng.set_stream(k as u64);
            let mut states = Vec::with_capacity(n + 1);
            states.push(0usize);
            for m in 0..n {
                let r: f64 = rng.random();
                let atom = cdf.iter().position(|&c| r < c).unwrap_or(cdf.len() - 1);
                states.push(lat.econ.successor(m, states[m], atom));
            }
            let (ito, lo, hi) = lat.forward_sum(&states, m0);
            let payoff = claim.payoff(lat.econ.price_at(n, states[n]));
            Trial {
                ito,
                miss: (m0 + ito - payoff).abs() > setup.eps,
                escaped: lo < lower || hi > upper,
                lo,
                hi,
            }
        })
        .collect();

    let count = trials.len() as f64;
    let exceedances = trials.iter().filter(|r| r.miss).count();
    let p = exceedances as f64 / count;
    let se = (p * (1.0 - p) / count).sqrt();
    let itos: Vec<f64> = trials.iter().map(|r| r.ito).collect();
    let mean_ito = pairwise_sum(&itos) / count;
    let sq: Vec<f64> = itos.iter().map(|v| (v - mean_ito).powi(2)).collect();
    let var = pairwise_sum(&sq) / (count - 1.0);
    Ok(ReplicationResult {
        n,
        t: setup.t,
        eps: setup.eps,
        trials: setup.trials,
        measure: setup.measure,
        exceedances,
        exceedance: p,
        std_error: se,
        half_width: 1.96 * se,
        m0,
        mean_ito,
        ito_std_error: (var / count).sqrt(),
        audit: RangeAudit {
            min_value: trials.iter().map(|r| r.lo).fold(f64::INFINITY, f64::min),
            max_value: trials.iter().map(|r| r.hi).fold(f64::NEG_INFINITY, f64::max),
            lower,
            upper,
            violations: trials.iter().filter(|r| r.escaped).count(),
        },
    })
}
