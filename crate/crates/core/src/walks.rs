//! Step distributions and the scaled random-walk economy.
//!
//! A walk with `n` steps lives on the grid `ω(k/n) = Σ_{j≤k} ξ_j / √n` and the
//! traded price is `S = e^ω`. Two-point steps give a recombining binomial
//! lattice indexed by the number of up-moves; other finite supports are
//! merged level by level on the unscaled partial sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{log_binomial_pmf, quantize};

/// Tolerance on the moment constraints of a user supplied step law.
pub const MOMENT_TOL: f64 = 1e-9;
/// Default guard on the total number of lattice states.
pub const DEFAULT_STATE_CAP: usize = 1 << 22;
/// Default guard on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: u128 = 1 << 20;

/// How a step distribution is described before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSpec {
    Rademacher,
    /// Three support points; the weights are solved from the moment constraints.
    SkewedThreePoint { low: f64, mid: f64, high: f64 },
    /// Explicit `(value, probability)` atoms.
    Explicit(Vec<(f64, f64)>),
}

impl StepSpec {
    /// The three-point law on `{-1, 0, 2}` with weights `(1/3, 1/2, 1/6)`.
    pub fn default_skewed() -> Self {
        StepSpec::SkewedThreePoint {
            low: -1.0,
            mid: 0.0,
            high: 2.0,
        }
    }

    /// Parses the names accepted on the command line and in configs.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "rademacher" => Ok(StepSpec::Rademacher),
            "skewed-three-point" | "skewed_three_point" => Ok(StepSpec::default_skewed()),
            other => Err(LabError::MalformedDistribution(format!(
                "unknown step family `{other}`"
            ))),
        }
    }
}

/// A validated step law: mean zero, unit variance, finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    atoms: Vec<(f64, f64)>,
    third_moment: f64,
}

impl StepDistribution {
    /// Atoms `(value, probability)` sorted by value.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn third_moment(&self) -> f64 {
        self.third_moment
    }

    pub fn is_two_point(&self) -> bool {
        self.atoms.len() == 2
    }

    /// `E[ξ^k]`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|(v, p)| p * v.powi(k)).sum()
    }

    /// Largest absolute atom.
    pub fn support_radius(&self) -> f64 {
        self.atoms.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }
}

/// Validates a step law and normalizes its moments exactly.
///
/// Inputs within [`MOMENT_TOL`] of the constraints are accepted and then
/// renormalized and standardized so the stored atoms satisfy them to rounding.
pub fn make_step_distribution(spec: &StepSpec) -> Result<StepDistribution> {
    let raw = match spec {
        StepSpec::Rademacher => vec![(-1.0, 0.5), (1.0, 0.5)],
        StepSpec::SkewedThreePoint { low, mid, high } => skewed_weights(*low, *mid, *high)?,
        StepSpec::Explicit(atoms) => atoms.clone(),
    };
    if raw.is_empty() {
        return Err(LabError::MalformedDistribution("no atoms".into()));
    }
    for &(v, p) in &raw {
        if !v.is_finite() {
            return Err(LabError::MalformedDistribution(format!(
                "unbounded support: atom value {v}"
            )));
        }
        if !(p.is_finite() && p > 0.0 && p <= 1.0 + MOMENT_TOL) {
            return Err(LabError::MalformedDistribution(format!(
                "probability {p} outside (0, 1]"
            )));
        }
    }
    let total: f64 = raw.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > MOMENT_TOL {
        return Err(LabError::MalformedDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let mean: f64 = raw.iter().map(|(v, p)| v * p).sum::<f64>() / total;
    if mean.abs() > MOMENT_TOL {
        return Err(LabError::MalformedDistribution(format!("mean {mean} is not 0")));
    }
    let var: f64 = raw.iter().map(|(v, p)| p * (v - mean).powi(2)).sum::<f64>() / total;
    if (var - 1.0).abs() > MOMENT_TOL {
        return Err(LabError::MalformedDistribution(format!(
            "variance {var} is not 1"
        )));
    }
    let sd = var.sqrt();

    // Merge coincident atoms after standardizing.
    let mut merged: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &(v, p) in &raw {
        let z = (v - mean) / sd;
        let e = merged.entry(quantize(z)).or_insert((z, 0.0));
        e.1 += p / total;
    }
    let atoms: Vec<(f64, f64)> = merged.into_values().collect();
    let third_moment = atoms.iter().map(|(v, p)| p * v.powi(3)).sum();
    Ok(StepDistribution {
        atoms,
        third_moment,
    })
}

fn skewed_weights(low: f64, mid: f64, high: f64) -> Result<Vec<(f64, f64)>> {
    if !(low < mid && mid < high) {
        return Err(LabError::MalformedDistribution(format!(
            "three-point values must be increasing, got ({low}, {mid}, {high})"
        )));
    }
    // Solve p1 + p2 + p3 = 1, Σ p v = 0, Σ p v² = 1 (Cramer's rule).
    let m = [[1.0, 1.0, 1.0], [low, mid, high], [low * low, mid * mid, high * high]];
    let rhs = [1.0, 0.0, 1.0];
    let det = det3(&m);
    let mut p = [0.0; 3];
    for (col, slot) in p.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *slot = det3(&mc) / det;
    }
    if p.iter().any(|&w| w <= 0.0) {
        return Err(LabError::MalformedDistribution(format!(
            "no positive weights give mean 0 and variance 1 on ({low}, {mid}, {high})"
        )));
    }
    Ok(vec![(low, p[0]), (mid, p[1]), (high, p[2])])
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// States and probabilities of the walk at one lattice date.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Unscaled partial sums `Σ ξ_j`, ascending.
    pub sums: Vec<f64>,
    /// Scaled states `ω = sum · step_scale`.
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }
}

#[derive(Debug, Clone)]
struct ExplicitLevel {
    sums: Vec<f64>,
    log_probs: Vec<f64>,
    /// `succ[i][j]` is the index at the next date after atom `j` from state `i`.
    succ: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Index `k` counts up-moves; unscaled sum `k·up + (m−k)·down`.
    TwoPoint { p_up: f64, up: f64, down: f64 },
    Explicit { levels: Vec<ExplicitLevel> },
}

/// The n-step scaled walk economy.
#[derive(Debug, Clone)]
pub struct LatticeEconomy {
    pub n: usize,
    pub horizon_t: f64,
    /// Trading cutoff `⌊n·t⌋`.
    pub m_of_t: usize,
    /// Multiplier from unscaled partial sums to `ω`.
    pub step_scale: f64,
    dist: StepDistribution,
    layout: Layout,
}

/// Builds the economy with `n` dates on `[0, 1]` and trading cutoff `⌊n·t⌋`.
pub fn build_lattice(dist: &StepDistribution, n: usize, t: f64) -> Result<LatticeEconomy> {
    build_lattice_capped(dist, n, t, DEFAULT_STATE_CAP)
}

/// Lattice date `⌊n·t⌋`, absorbing representation error so that `10·0.3`
/// counts as 3.
pub fn cutoff(n: usize, t: f64) -> usize {
    (((n as f64) * t + 1e-9).floor() as usize).min(n)
}

/// [`build_lattice`] with an explicit bound on the total number of states.
pub fn build_lattice_capped(
    dist: &StepDistribution,
    n: usize,
    t: f64,
    state_cap: usize,
) -> Result<LatticeEconomy> {
    if n == 0 {
        return Err(LabError::InvalidArgument("n must be at least 1".into()));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(LabError::InvalidArgument(format!("horizon t = {t} outside (0, 1]")));
    }
    let m_of_t = cutoff(n, t);
    let mut econ = build(dist, n, 1.0 / (n as f64).sqrt(), state_cap)?;
    econ.horizon_t = t;
    econ.m_of_t = m_of_t;
    Ok(econ)
}

/// An economy with `steps` dates spread over `[0, horizon]`, so each step is
/// scaled by `√(horizon/steps)` and every date is tradeable.
pub fn build_lattice_scaled(
    dist: &StepDistribution,
    steps: usize,
    horizon: f64,
    state_cap: usize,
) -> Result<LatticeEconomy> {
    if steps == 0 {
        return Err(LabError::InvalidArgument("steps must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(LabError::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let mut econ = build(dist, steps, (horizon / steps as f64).sqrt(), state_cap)?;
    econ.horizon_t = horizon;
    econ.m_of_t = steps;
    Ok(econ)
}

fn build(dist: &StepDistribution, n: usize, scale: f64, state_cap: usize) -> Result<LatticeEconomy> {
    let layout = if dist.is_two_point() {
        let needed = (n as u128 + 1) * (n as u128 + 2) / 2;
        if needed > state_cap as u128 {
            return Err(LabError::CapExceeded {
                what: "lattice states",
                needed,
                cap: state_cap as u128,
            });
        }
        let (down, p_down) = dist.atoms[0];
        let (up, p_up) = dist.atoms[1];
        debug_assert!((p_up + p_down - 1.0).abs() < 1e-12);
        Layout::TwoPoint { p_up, up, down }
    } else {
        Layout::Explicit {
            levels: explicit_levels(dist, n, state_cap)?,
        }
    };
    Ok(LatticeEconomy {
        n,
        horizon_t: 1.0,
        m_of_t: n,
        step_scale: scale,
        dist: dist.clone(),
        layout,
    })
}

fn explicit_levels(dist: &StepDistribution, n: usize, cap: usize) -> Result<Vec<ExplicitLevel>> {
    let log_atom: Vec<f64> = dist.atoms.iter().map(|a| a.1.ln()).collect();
    let mut levels = vec![ExplicitLevel {
        sums: vec![0.0],
        log_probs: vec![0.0],
        succ: Vec::new(),
    }];
    let mut total = 1usize;
    for _ in 0..n {
        let cur = levels.last_mut().unwrap();
        let mut next: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
        for (&s, &lp) in cur.sums.iter().zip(&cur.log_probs) {
            for (j, &(v, _)) in dist.atoms.iter().enumerate() {
                let ns = s + v;
                let e = next.entry(quantize(ns)).or_insert((ns, Vec::new()));
                e.1.push(lp + log_atom[j]);
            }
        }
        total += next.len();
        if total > cap {
            return Err(LabError::CapExceeded {
                what: "lattice states",
                needed: total as u128,
                cap: cap as u128,
            });
        }
        let keys: Vec<i64> = next.keys().copied().collect();
        cur.succ = cur
            .sums
            .iter()
            .map(|&s| {
                dist.atoms
                    .iter()
                    .map(|&(v, _)| keys.binary_search(&quantize(s + v)).expect("successor present"))
                    .collect()
            })
            .collect();
        let (sums, log_probs) = next
            .into_values()
            .map(|(s, terms)| (s, crate::numeric::log_sum_exp(&terms)))
            .unzip();
        levels.push(ExplicitLevel {
            sums,
            log_probs,
            succ: Vec::new(),
        });
    }
    Ok(levels)
}

impl LatticeEconomy {
    pub fn step_distribution(&self) -> &StepDistribution {
        &self.dist
    }

    /// True for two-point steps, where states are indexed by up-move count.
    pub fn is_recombining(&self) -> bool {
        matches!(self.layout, Layout::TwoPoint { .. })
    }

    /// Up-probability, up-atom and down-atom of a two-point lattice.
    pub fn two_point(&self) -> Option<(f64, f64, f64)> {
        match self.layout {
            Layout::TwoPoint { p_up, up, down } => Some((p_up, up, down)),
            Layout::Explicit { .. } => None,
        }
    }

    /// Number of states at date `m`.
    pub fn level_len(&self, m: usize) -> usize {
        match &self.layout {
            Layout::TwoPoint { .. } => m + 1,
            Layout::Explicit { levels } => levels[m].sums.len(),
        }
    }

    /// Unscaled partial sum of state `i` at date `m`.
    pub fn sum_at(&self, m: usize, i: usize) -> f64 {
        match &self.layout {
            Layout::TwoPoint { up, down, .. } => i as f64 * up + (m - i) as f64 * down,
            Layout::Explicit { levels } => levels[m].sums[i],
        }
    }

    /// Scaled state `ω` of state `i` at date `m`.
    pub fn value_at(&self, m: usize, i: usize) -> f64 {
        self.sum_at(m, i) * self.step_scale
    }

    /// Price `e^ω` of state `i` at date `m`.
    pub fn price_at(&self, m: usize, i: usize) -> f64 {
        self.value_at(m, i).exp()
    }

    /// Log-probabilities of the states at date `m`.
    pub fn log_probs(&self, m: usize) -> Vec<f64> {
        match &self.layout {
            Layout::TwoPoint { p_up, .. } => log_binomial_pmf(m, *p_up),
            Layout::Explicit { levels } => levels[m].log_probs.clone(),
        }
    }

    /// States and probabilities at date `m`.
    pub fn level(&self, m: usize) -> Level {
        assert!(m <= self.n, "date {m} beyond n = {}", self.n);
        let sums: Vec<f64> = (0..self.level_len(m)).map(|i| self.sum_at(m, i)).collect();
        let values = sums.iter().map(|s| s * self.step_scale).collect();
        let probs = self.log_probs(m).into_iter().map(f64::exp).collect();
        Level { sums, values, probs }
    }

    /// Index at date `m + 1` reached from state `i` by step atom `atom`.
    pub fn successor(&self, m: usize, i: usize, atom: usize) -> usize {
        match &self.layout {
            Layout::TwoPoint { .. } => i + atom,
            Layout::Explicit { levels } => levels[m].succ[i][atom],
        }
    }
}

/// One enumerated path: the step atoms taken, the state index at every date
/// and the path probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub atoms: Vec<usize>,
    pub nodes: Vec<usize>,
    pub prob: f64,
}

/// Every path up to date `up_to`, in lexicographic order of atom indices.
pub fn enumerate_paths(econ: &LatticeEconomy, up_to: usize) -> Result<Vec<Path>> {
    enumerate_paths_capped(econ, up_to, DEFAULT_PATH_CAP)
}

pub fn enumerate_paths_capped(econ: &LatticeEconomy, up_to: usize, cap: u128) -> Result<Vec<Path>> {
    if up_to > econ.n {
        return Err(LabError::InvalidArgument(format!(
            "up_to = {up_to} exceeds n = {}",
            econ.n
        )));
    }
    let k = econ.dist.atoms.len() as u128;
    let needed = k.checked_pow(up_to as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(LabError::CapExceeded {
            what: "paths",
            needed,
            cap,
        });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut atoms = Vec::with_capacity(up_to);
    let mut nodes = vec![0usize];
    walk(econ, up_to, &mut atoms, &mut nodes, 1.0, &mut out);
    Ok(out)
}

fn walk(
    econ: &LatticeEconomy,
    up_to: usize,
    atoms: &mut Vec<usize>,
    nodes: &mut Vec<usize>,
    prob: f64,
    out: &mut Vec<Path>,
) {
    let m = atoms.len();
    if m == up_to {
        out.push(Path {
            atoms: atoms.clone(),
            nodes: nodes.clone(),
            prob,
        });
        return;
    }
    let here = *nodes.last().unwrap();
    for (j, &(_, p)) in econ.dist.atoms.iter().enumerate() {
        atoms.push(j);
        nodes.push(econ.successor(m, here, j));
        walk(econ, up_to, atoms, nodes, prob * p, out);
        atoms.pop();
        nodes.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rad() -> StepDistribution {
        make_step_distribution(&StepSpec::Rademacher).unwrap()
    }

    #[test]
    fn rademacher_atoms() {
        let d = rad();
        assert_eq!(d.atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);
        assert_eq!(d.third_moment(), 0.0);
    }

    #[test]
    fn explicit_skewed_two_point() {
        let d = make_step_distribution(&StepSpec::Explicit(vec![(2.0, 0.2), (-0.5, 0.8)])).unwrap();
        assert!(d.moment(1).abs() < 1e-12);
        assert!((d.moment(2) - 1.0).abs() < 1e-12);
        assert!((d.third_moment() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonzero_mean() {
        let err = make_step_distribution(&StepSpec::Explicit(vec![(1.0, 0.6), (-1.0, 0.4)]));
        assert!(matches!(err, Err(LabError::MalformedDistribution(_))));
    }

    #[test]
    fn rejects_infinite_atom() {
        let err = make_step_distribution(&StepSpec::Explicit(vec![(f64::INFINITY, 0.5), (-1.0, 0.5)]));
        assert!(matches!(err, Err(LabError::MalformedDistribution(_))));
    }

    #[test]
    fn default_skewed_weights() {
        let d = make_step_distribution(&StepSpec::default_skewed()).unwrap();
        let p: Vec<f64> = d.atoms().iter().map(|a| a.1).collect();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.third_moment() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_step_lattice() {
        let e = build_lattice(&rad(), 2, 1.0).unwrap();
        let l1 = e.level(1);
        let r = 0.5f64.sqrt();
        assert!((l1.values[0] + r).abs() < 1e-15 && (l1.values[1] - r).abs() < 1e-15);
        let l2 = e.level(2);
        let s2 = 2f64.sqrt();
        assert!((l2.values[0] + s2).abs() < 1e-15 && l2.values[1] == 0.0);
        assert!((l2.values[2] - s2).abs() < 1e-15);
        for (p, q) in l2.probs.iter().zip([0.25, 0.5, 0.25]) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_prices() {
        let e = build_lattice(&rad(), 1, 1.0).unwrap();
        assert!((e.price_at(1, 1) - 1f64.exp()).abs() < 1e-15);
        assert!((e.price_at(1, 0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn trading_cutoff() {
        assert_eq!(build_lattice(&rad(), 4, 0.5).unwrap().m_of_t, 2);
        assert_eq!(build_lattice(&rad(), 10, 0.3).unwrap().m_of_t, 3);
    }

    #[test]
    fn path_counts() {
        let e = build_lattice(&rad(), 2, 1.0).unwrap();
        let paths = enumerate_paths(&e, 2).unwrap();
        assert_eq!(paths.len(), 4);
        assert!(paths.iter().all(|p| p.prob == 0.25));

        let e3 = build_lattice(&rad(), 3, 1.0).unwrap();
        let total: f64 = enumerate_paths(&e3, 3).unwrap().iter().map(|p| p.prob).sum();
        assert!((total - 1.0).abs() < 1e-15);

        let sk = make_step_distribution(&StepSpec::default_skewed()).unwrap();
        let es = build_lattice(&sk, 2, 1.0).unwrap();
        let paths = enumerate_paths(&es, 2).unwrap();
        assert_eq!(paths.len(), 9);
        for p in &paths {
            let expect = sk.atoms()[p.atoms[0]].1 * sk.atoms()[p.atoms[1]].1;
            assert!((p.prob - expect).abs() < 1e-16);
        }
    }

    #[test]
    fn path_cap_enforced() {
        let e = build_lattice(&rad(), 24, 1.0).unwrap();
        assert!(matches!(enumerate_paths(&e, 21), Err(LabError::CapExceeded { .. })));
    }

    #[test]
    fn explicit_levels_recombine_on_integer_support() {
        let sk = make_step_distribution(&StepSpec::default_skewed()).unwrap();
        let e = build_lattice(&sk, 5, 1.0).unwrap();
        // Support {-1, 0, 2}: every integer in [-5, 10] except 9.
        assert_eq!(e.level_len(5), 15);
        let total: f64 = e.level(5).probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn state_cap_enforced() {
        let r = build_lattice_capped(&rad(), 100, 1.0, 50);
        assert!(matches!(r, Err(LabError::CapExceeded { .. })));
    }
}
