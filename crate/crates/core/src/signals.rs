//! Insider signals and their conditional density process
//! `η_m^y = P[Y = y | F_m] / P[Y = y]`.
//!
//! The table is indexed by information cells: the walk state at date `m`
//! plus whatever part of the past the conditional law of `Y` still depends
//! on. For the terminal value that is nothing; for the running maximum it is
//! the maximum so far; for the future ratio past its anchor it is the
//! increment since the anchor.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{log_binomial_pmf, quantize};
use crate::walks::{cutoff, enumerate_paths, LatticeEconomy};

/// Guard on `cells × signal values` for the running-maximum recursion.
pub const RUNNING_MAX_ENTRY_CAP: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalFunctional {
    /// `Y = S_n`, recorded as the unscaled terminal partial sum.
    TerminalValue,
    /// `Y = max_{k≤n}` of the unscaled walk, including the origin.
    RunningMax,
    /// `Y = S_1 / S_{anchor}`.
    FutureRatio { anchor_t: f64 },
}

impl SignalFunctional {
    pub fn label(&self) -> &'static str {
        match self {
            SignalFunctional::TerminalValue => "terminal_value",
            SignalFunctional::RunningMax => "running_max",
            SignalFunctional::FutureRatio { .. } => "future_ratio",
        }
    }
}

/// One atom of the signal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalValue {
    /// Integer key of `coord`.
    pub key: i64,
    /// Unscaled walk coordinate: terminal sum, maximum, or increment since
    /// the anchor.
    pub coord: f64,
    /// Value of `Y` itself (the ratio `e^{scale·coord}` for the future ratio).
    pub natural: f64,
    pub prob: f64,
    pub log_prob: f64,
}

/// Walk state index plus the key of the auxiliary path statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InfoCell {
    pub state: usize,
    pub aux: i64,
}

/// Conditional densities at one date.
#[derive(Debug, Clone)]
pub struct DensityLevel {
    pub m: usize,
    pub cells: Vec<InfoCell>,
    pub cell_log_prob: Vec<f64>,
    /// Row-major `[cell][signal]`; `-inf` marks `η = 0`.
    log_eta: Vec<f64>,
    n_signal: usize,
    index: HashMap<InfoCell, usize>,
    /// `Σ P[cell]·P[Y=y]` over pairs with `η = 0`.
    pub excluded_mass: f64,
}

impl DensityLevel {
    fn new(m: usize, cells: Vec<InfoCell>, cell_log_prob: Vec<f64>, log_eta: Vec<f64>, values: &[SignalValue]) -> Self {
        let n_signal = values.len();
        debug_assert_eq!(log_eta.len(), cells.len() * n_signal);
        let index = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut excluded_mass = 0.0;
        for (c, lp) in cell_log_prob.iter().enumerate() {
            for (y, v) in values.iter().enumerate() {
                if log_eta[c * n_signal + y] == f64::NEG_INFINITY {
                    excluded_mass += (lp + v.log_prob).exp();
                }
            }
        }
        DensityLevel {
            m,
            cells,
            cell_log_prob,
            log_eta,
            n_signal,
            index,
            excluded_mass,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_index(&self, cell: &InfoCell) -> Option<usize> {
        self.index.get(cell).copied()
    }

    pub fn log_eta(&self, cell: usize, y: usize) -> f64 {
        self.log_eta[cell * self.n_signal + y]
    }

    pub fn eta(&self, cell: usize, y: usize) -> f64 {
        self.log_eta(cell, y).exp()
    }

    pub fn cell_prob(&self, cell: usize) -> f64 {
        self.cell_log_prob[cell].exp()
    }
}

/// `η` at the requested dates for one economy and signal.
#[derive(Debug, Clone)]
pub struct ConditionalDensityTable {
    pub n: usize,
    pub step_scale: f64,
    pub signal: SignalFunctional,
    pub values: Vec<SignalValue>,
    pub levels: Vec<DensityLevel>,
}

impl ConditionalDensityTable {
    pub fn level(&self, m: usize) -> Option<&DensityLevel> {
        self.levels.iter().find(|l| l.m == m)
    }

    pub fn times(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.m).collect()
    }

    pub fn signal_index(&self, key: i64) -> Option<usize> {
        self.values.binary_search_by_key(&key, |v| v.key).ok()
    }

    /// Zero-mass report: `(m, excluded product mass)` per stored date.
    pub fn zero_mass_report(&self) -> Vec<(usize, f64)> {
        self.levels.iter().map(|l| (l.m, l.excluded_mass)).collect()
    }
}

/// Table for every date `0..=m_of_t`.
pub fn conditional_density_table(
    econ: &LatticeEconomy,
    signal: &SignalFunctional,
) -> Result<ConditionalDensityTable> {
    let times: Vec<usize> = (0..=econ.m_of_t).collect();
    conditional_density_table_at(econ, signal, &times)
}

/// Table at the given dates. Two-point lattices use binomial convolution
/// (and a max-reflection recursion for the running maximum of ±1 steps);
/// everything else falls back to path enumeration.
pub fn conditional_density_table_at(
    econ: &LatticeEconomy,
    signal: &SignalFunctional,
    times: &[usize],
) -> Result<ConditionalDensityTable> {
    validate(econ, signal, times)?;
    match (econ.two_point(), signal) {
        (Some(_), SignalFunctional::TerminalValue) => terminal_recombining(econ, times),
        (Some(_), SignalFunctional::FutureRatio { anchor_t }) => {
            future_ratio_recombining(econ, cutoff(econ.n, *anchor_t), *signal, times)
        }
        (Some((_, up, down)), SignalFunctional::RunningMax) if up == 1.0 && down == -1.0 => {
            running_max_recombining(econ, times)
        }
        _ => conditional_density_table_enumerated(econ, signal, times),
    }
}

fn validate(econ: &LatticeEconomy, signal: &SignalFunctional, times: &[usize]) -> Result<()> {
    if let Some(&m) = times.iter().find(|&&m| m > econ.n) {
        return Err(LabError::InvalidArgument(format!("date {m} beyond n = {}", econ.n)));
    }
    if let SignalFunctional::FutureRatio { anchor_t } = signal {
        if !(*anchor_t > 0.0 && *anchor_t <= 1.0) {
            return Err(LabError::InvalidArgument(format!(
                "ratio anchor {anchor_t} outside (0, 1]"
            )));
        }
    }
    Ok(())
}

fn sorted_times(times: &[usize]) -> Vec<usize> {
    let mut t = times.to_vec();
    t.sort_unstable();
    t.dedup();
    t
}

fn signal_value(coord: f64, log_prob: f64, signal: &SignalFunctional, scale: f64) -> SignalValue {
    let natural = match signal {
        SignalFunctional::FutureRatio { .. } => (coord * scale).exp(),
        _ => coord,
    };
    SignalValue {
        key: quantize(coord),
        coord,
        natural,
        prob: log_prob.exp(),
        log_prob,
    }
}

fn terminal_recombining(econ: &LatticeEconomy, times: &[usize]) -> Result<ConditionalDensityTable> {
    let (p_up, _, _) = econ.two_point().expect("two-point lattice");
    let n = econ.n;
    let law = log_binomial_pmf(n, p_up);
    let signal = SignalFunctional::TerminalValue;
    let values: Vec<SignalValue> = (0..=n)
        .map(|k| signal_value(econ.sum_at(n, k), law[k], &signal, econ.step_scale))
        .collect();
    let levels = sorted_times(times)
        .into_iter()
        .map(|m| {
            let here = log_binomial_pmf(m, p_up);
            let rest = log_binomial_pmf(n - m, p_up);
            let cells = (0..=m).map(|k| InfoCell { state: k, aux: 0 }).collect();
            let mut log_eta = Vec::with_capacity((m + 1) * (n + 1));
            for k in 0..=m {
                for (big_k, lp) in law.iter().enumerate() {
                    log_eta.push(if big_k >= k && big_k - k <= n - m {
                        rest[big_k - k] - lp
                    } else {
                        f64::NEG_INFINITY
                    });
                }
            }
            DensityLevel::new(m, cells, here, log_eta, &values)
        })
        .collect();
    Ok(ConditionalDensityTable {
        n,
        step_scale: econ.step_scale,
        signal,
        values,
        levels,
    })
}

fn future_ratio_recombining(
    econ: &LatticeEconomy,
    anchor: usize,
    signal: SignalFunctional,
    times: &[usize],
) -> Result<ConditionalDensityTable> {
    let (p_up, up, down) = econ.two_point().expect("two-point lattice");
    let n = econ.n;
    let span = n - anchor;
    let law = log_binomial_pmf(span, p_up);
    let incr = |j: usize, steps: usize| j as f64 * up + (steps - j) as f64 * down;
    let values: Vec<SignalValue> = (0..=span)
        .map(|j| signal_value(incr(j, span), law[j], &signal, econ.step_scale))
        .collect();
    let levels = sorted_times(times)
        .into_iter()
        .map(|m| {
            if m <= anchor {
                let cells = (0..=m).map(|k| InfoCell { state: k, aux: 0 }).collect();
                return DensityLevel::new(m, cells, log_binomial_pmf(m, p_up), vec![0.0; (m + 1) * (span + 1)], &values);
            }
            // Cell (k, j): k up-moves in total, j of them after the anchor.
            let before = log_binomial_pmf(anchor, p_up);
            let after = log_binomial_pmf(m - anchor, p_up);
            let rest = log_binomial_pmf(n - m, p_up);
            let mut cells = Vec::new();
            let mut cell_lp = Vec::new();
            let mut log_eta = Vec::new();
            for k in 0..=m {
                for j in 0..=(m - anchor) {
                    if j > k || k - j > anchor {
                        continue;
                    }
                    cells.push(InfoCell {
                        state: k,
                        aux: quantize(incr(j, m - anchor)),
                    });
                    cell_lp.push(before[k - j] + after[j]);
                    for (big_j, lp) in law.iter().enumerate() {
                        log_eta.push(if big_j >= j && big_j - j <= n - m {
                            rest[big_j - j] - lp
                        } else {
                            f64::NEG_INFINITY
                        });
                    }
                }
            }
            DensityLevel::new(m, cells, cell_lp, log_eta, &values)
        })
        .collect();
    Ok(ConditionalDensityTable {
        n,
        step_scale: econ.step_scale,
        signal,
        values,
        levels,
    })
}

/// `g[r][d] = P[max_{0..r} W ≥ d]` for a ±1 walk started at 0, `d ∈ 0..=r+1`.
fn max_tail_table(n: usize, p_up: f64) -> Vec<Vec<f64>> {
    let mut g = vec![vec![1.0, 0.0]];
    for r in 1..=n {
        let prev = &g[r - 1];
        let at = |d: usize| prev.get(d).copied().unwrap_or(0.0);
        let mut row = vec![0.0; r + 2];
        row[0] = 1.0;
        for d in 1..=r {
            row[d] = p_up * at(d - 1) + (1.0 - p_up) * at(d + 1);
        }
        g.push(row);
    }
    g
}

fn running_max_recombining(econ: &LatticeEconomy, times: &[usize]) -> Result<ConditionalDensityTable> {
    let (p_up, _, _) = econ.two_point().expect("two-point lattice");
    let n = econ.n;
    let times = sorted_times(times);
    let max_m = times.last().copied().unwrap_or(0);
    let entries = (max_m + 1) * (max_m + 2) / 2 * (n + 1);
    if entries > RUNNING_MAX_ENTRY_CAP {
        return Err(LabError::CapExceeded {
            what: "running-max table entries",
            needed: entries as u128,
            cap: RUNNING_MAX_ENTRY_CAP as u128,
        });
    }
    let g = max_tail_table(n, p_up);
    let tail = |r: usize, d: i64| -> f64 {
        if d <= 0 {
            1.0
        } else {
            g[r].get(d as usize).copied().unwrap_or(0.0)
        }
    };
    // P[Y = y | x, M] with r steps left.
    let cond = |r: usize, x: i64, big_m: i64, y: i64| -> f64 {
        if y < big_m {
            0.0
        } else if y == big_m {
            1.0 - tail(r, y - x + 1)
        } else {
            tail(r, y - x) - tail(r, y - x + 1)
        }
    };
    let signal = SignalFunctional::RunningMax;
    let values: Vec<SignalValue> = (0..=n as i64)
        .filter_map(|y| {
            let p = cond(n, 0, 0, y);
            (p > 0.0).then(|| signal_value(y as f64, p.ln(), &signal, econ.step_scale))
        })
        .collect();

    // Forward recursion over (x, M) probabilities.
    let mut joint: BTreeMap<(i64, i64), f64> = BTreeMap::from([((0, 0), 1.0)]);
    let mut levels = Vec::new();
    let mut next_time = times.iter().peekable();
    for m in 0..=max_m {
        if next_time.peek() == Some(&&m) {
            next_time.next();
            let r = n - m;
            let mut cells = Vec::with_capacity(joint.len());
            let mut cell_lp = Vec::with_capacity(joint.len());
            let mut log_eta = Vec::with_capacity(joint.len() * values.len());
            // Order cells by (state, max).
            let mut ordered: Vec<(&(i64, i64), &f64)> = joint.iter().collect();
            ordered.sort_by_key(|((x, big_m), _)| ((x + m as i64) / 2, *big_m));
            for (&(x, big_m), &p) in ordered {
                cells.push(InfoCell {
                    state: ((x + m as i64) / 2) as usize,
                    aux: quantize(big_m as f64),
                });
                cell_lp.push(p.ln());
                for v in &values {
                    let c = cond(r, x, big_m, v.coord as i64);
                    log_eta.push(if c > 0.0 { c.ln() - v.log_prob } else { f64::NEG_INFINITY });
                }
            }
            levels.push(DensityLevel::new(m, cells, cell_lp, log_eta, &values));
        }
        if m == max_m {
            break;
        }
        let mut next: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for (&(x, big_m), &p) in &joint {
            *next.entry((x + 1, big_m.max(x + 1))).or_insert(0.0) += p * p_up;
            *next.entry((x - 1, big_m)).or_insert(0.0) += p * (1.0 - p_up);
        }
        joint = next;
    }
    Ok(ConditionalDensityTable {
        n,
        step_scale: econ.step_scale,
        signal,
        values,
        levels,
    })
}

/// Signal coordinate of a full path of unscaled partial sums.
pub(crate) fn signal_coord(signal: &SignalFunctional, sums: &[f64], anchor: usize) -> f64 {
    match signal {
        SignalFunctional::TerminalValue => *sums.last().unwrap(),
        SignalFunctional::RunningMax => sums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        SignalFunctional::FutureRatio { .. } => sums.last().unwrap() - sums[anchor],
    }
}

/// Auxiliary key of the information cell at date `m`.
pub(crate) fn aux_key(signal: &SignalFunctional, sums: &[f64], m: usize, anchor: usize) -> i64 {
    match signal {
        SignalFunctional::TerminalValue => 0,
        SignalFunctional::RunningMax => quantize(sums[..=m].iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        SignalFunctional::FutureRatio { .. } if m <= anchor => 0,
        SignalFunctional::FutureRatio { .. } => quantize(sums[m] - sums[anchor]),
    }
}

/// Table by exhaustive path enumeration; works for any step law within the
/// path cap and serves as the reference for the recombining routes.
pub fn conditional_density_table_enumerated(
    econ: &LatticeEconomy,
    signal: &SignalFunctional,
    times: &[usize],
) -> Result<ConditionalDensityTable> {
    validate(econ, signal, times)?;
    let anchor = match signal {
        SignalFunctional::FutureRatio { anchor_t } => cutoff(econ.n, *anchor_t),
        _ => 0,
    };
    let paths = enumerate_paths(econ, econ.n)?;
    let atoms = econ.step_distribution().atoms();
    let times = sorted_times(times);

    let mut law: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    let mut cell_mass: Vec<BTreeMap<InfoCell, f64>> = vec![BTreeMap::new(); times.len()];
    let mut joint: Vec<HashMap<(InfoCell, i64), f64>> = vec![HashMap::new(); times.len()];
    let mut sums = vec![0.0; econ.n + 1];
    for path in &paths {
        for (m, &a) in path.atoms.iter().enumerate() {
            sums[m + 1] = sums[m] + atoms[a].0;
        }
        let coord = signal_coord(signal, &sums, anchor);
        let y = quantize(coord);
        law.entry(y).or_insert((coord, 0.0)).1 += path.prob;
        for (slot, &m) in times.iter().enumerate() {
            let cell = InfoCell {
                state: path.nodes[m],
                aux: aux_key(signal, &sums, m, anchor),
            };
            *cell_mass[slot].entry(cell).or_insert(0.0) += path.prob;
            *joint[slot].entry((cell, y)).or_insert(0.0) += path.prob;
        }
    }
    let values: Vec<SignalValue> = law
        .values()
        .map(|&(coord, p)| signal_value(coord, p.ln(), signal, econ.step_scale))
        .collect();
    let levels = times
        .iter()
        .enumerate()
        .map(|(slot, &m)| {
            let cells: Vec<InfoCell> = cell_mass[slot].keys().copied().collect();
            let cell_lp: Vec<f64> = cell_mass[slot].values().map(|p| p.ln()).collect();
            let mut log_eta = Vec::with_capacity(cells.len() * values.len());
            for (c, cell) in cells.iter().enumerate() {
                for v in &values {
                    log_eta.push(match joint[slot].get(&(*cell, v.key)) {
                        Some(&pj) => pj.ln() - cell_lp[c] - v.log_prob,
                        None => f64::NEG_INFINITY,
                    });
                }
            }
            DensityLevel::new(m, cells, cell_lp, log_eta, &values)
        })
        .collect();
    Ok(ConditionalDensityTable {
        n: econ.n,
        step_scale: econ.step_scale,
        signal: *signal,
        values,
        levels,
    })
}

/// A date, cell and signal value where `η = 0` although both marginals are
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub m: usize,
    pub cell: InfoCell,
    pub signal_key: i64,
    pub signal_coord: f64,
    pub product_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// Violations in (date, cell, signal) order, truncated to `listed_cap`.
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    /// Excluded product mass per stored date.
    pub excluded_mass: Vec<(usize, f64)>,
}

impl EquivalenceReport {
    /// Strict positivity holds everywhere.
    pub fn holds(&self) -> bool {
        self.violation_count == 0
    }

    pub fn total_excluded_mass(&self) -> f64 {
        self.excluded_mass.iter().map(|e| e.1).sum()
    }

    pub fn contains(&self, m: usize, state: usize, signal_key: i64) -> bool {
        self.violations
            .iter()
            .any(|v| v.m == m && v.cell.state == state && v.signal_key == signal_key)
    }
}

/// Maximum number of violations listed individually.
pub const VIOLATION_LIST_CAP: usize = 10_000;

/// Lists every cell/signal pair where strict positivity fails.
pub fn check_equivalence(table: &ConditionalDensityTable) -> EquivalenceReport {
    let mut violations = Vec::new();
    let mut count = 0;
    for level in &table.levels {
        for c in 0..level.len() {
            for (y, v) in table.values.iter().enumerate() {
                if level.log_eta(c, y) == f64::NEG_INFINITY {
                    count += 1;
                    if violations.len() < VIOLATION_LIST_CAP {
                        violations.push(Violation {
                            m: level.m,
                            cell: level.cells[c],
                            signal_key: v.key,
                            signal_coord: v.coord,
                            product_mass: (level.cell_log_prob[c] + v.log_prob).exp(),
                        });
                    }
                }
            }
        }
    }
    EquivalenceReport {
        violations,
        violation_count: count,
        excluded_mass: table.zero_mass_report(),
    }
}

/// The printed running-maximum density next to brute-force values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningMaxComparison {
    /// `C(n−m, ⌊((n−m)+(y−x)+1)/2⌋)·2^{−(n−m)}` at the given `x`.
    pub formula_term: f64,
    /// The same term summed over reachable states `x′ ≤ y` at date `m`.
    pub formula_sum: f64,
    /// `P[Y = y | S_m = x]` by enumeration.
    pub enumerated_conditional: f64,
    /// `P[Y = y | S_m = x] / P[Y = y]` by enumeration.
    pub enumerated_eta: f64,
}

fn binomial(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return 0.0;
    }
    let k = (k as u64).min(n - k as u64);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Evaluates the closed-form display for the running maximum of a symmetric
/// ±1 walk and the enumerated quantities it is meant to describe.
/// Coordinates are unscaled integers.
pub fn running_max_density_comparison(n: usize, m: usize, y: i64, x: i64, p_up: f64) -> Result<RunningMaxComparison> {
    if p_up != 0.5 {
        return Err(LabError::InvalidArgument(format!(
            "the display assumes a symmetric walk, got p = {p_up}"
        )));
    }
    if m > n || x.unsigned_abs() as usize > m || (x + m as i64) % 2 != 0 {
        return Err(LabError::InvalidArgument(format!(
            "state {x} is not reachable at date {m}"
        )));
    }
    let r = (n - m) as u64;
    let term = |xp: i64| binomial(r, (r as i64 + (y - xp) + 1).div_euclid(2)) * 0.5f64.powi(r as i32);
    let formula_term = term(x);
    let formula_sum = (-(m as i64)..=m as i64)
        .step_by(2)
        .filter(|&xp| xp <= y)
        .map(term)
        .sum();

    let paths = 1u64 << n;
    if n > 20 {
        return Err(LabError::CapExceeded {
            what: "paths",
            needed: paths as u128,
            cap: 1 << 20,
        });
    }
    let (mut p_x, mut p_xy, mut p_y) = (0.0, 0.0, 0.0);
    let w = 0.5f64.powi(n as i32);
    for bits in 0..paths {
        let (mut s, mut mx, mut s_m) = (0i64, 0i64, 0i64);
        for j in 0..n {
            s += if bits >> j & 1 == 1 { 1 } else { -1 };
            mx = mx.max(s);
            if j + 1 == m {
                s_m = s;
            }
        }
        let at_x = s_m == x;
        if at_x {
            p_x += w;
        }
        if mx == y {
            p_y += w;
            if at_x {
                p_xy += w;
            }
        }
    }
    let enumerated_conditional = if p_x > 0.0 { p_xy / p_x } else { 0.0 };
    let enumerated_eta = if p_y > 0.0 { enumerated_conditional / p_y } else { 0.0 };
    Ok(RunningMaxComparison {
        formula_term,
        formula_sum,
        enumerated_conditional,
        enumerated_eta,
    })
}

/// Continuous density of `W_1` given `W_t = x`, relative to the law of `W_1`:
/// `(1/√(1−t))·exp(−(y−x)²/(2(1−t)) + y²/2)`.
pub fn gaussian_eta(t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(log_gaussian_eta(t, x, y)?.exp())
}

pub fn log_gaussian_eta(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(LabError::InvalidArgument(format!(
            "conditional density needs 0 <= t < 1, got {t}"
        )));
    }
    let s = 1.0 - t;
    Ok(-0.5 * s.ln() - (y - x).powi(2) / (2.0 * s) + 0.5 * y * y)
}

/// Largest `|η_m − η_t^{gauss}|` over a grid of continuous `(x, y)` points
/// for the terminal signal on a symmetric two-point lattice. Each grid point
/// is moved to the nearest reachable lattice pair and compared at that
/// pair's continuous coordinates with `t = m/n`.
pub fn terminal_eta_lattice_error(econ: &LatticeEconomy, m: usize, grid: &[(f64, f64)]) -> Result<f64> {
    let (p_up, up, down) = econ
        .two_point()
        .filter(|&(_, u, d)| u == 1.0 && d == -1.0)
        .ok_or_else(|| LabError::Unsupported("lattice comparison needs ±1 steps".into()))?;
    let n = econ.n;
    if m >= n {
        return Err(LabError::InvalidArgument(format!("date {m} must be below n = {n}")));
    }
    let root_n = (n as f64).sqrt();
    let here = log_binomial_pmf(m, p_up);
    let rest = log_binomial_pmf(n - m, p_up);
    let law = log_binomial_pmf(n, p_up);
    let nearest = |target: f64, steps: usize| -> usize {
        // Sum after `steps` moves with k ups is 2k − steps.
        let k = ((target * root_n + steps as f64) / 2.0).round();
        k.clamp(0.0, steps as f64) as usize
    };
    let t = m as f64 / n as f64;
    let mut worst: f64 = 0.0;
    for &(x, y) in grid {
        let k = nearest(x, m);
        let big_k = nearest(y, n);
        let xs = k as f64 * up + (m - k) as f64 * down;
        let ys = big_k as f64 * up + (n - big_k) as f64 * down;
        let discrete = if big_k >= k && big_k - k <= n - m {
            (rest[big_k - k] - law[big_k]).exp()
        } else {
            0.0
        };
        debug_assert!(here[k].is_finite());
        let cont = gaussian_eta(t, xs / root_n, ys / root_n)?;
        worst = worst.max((discrete - cont).abs());
    }
    Ok(worst)
}
