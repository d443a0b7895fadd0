//! The exponential martingale measure of the walk, public and insider pricing
//! kernels, and the martingale-preserving measure `P̃ = (1/η)·P`.

use std::collections::HashMap;

use crate::error::{LabError, Result};
use crate::numeric::{bisect, quantize};
use crate::signals::{log_gaussian_eta, ConditionalDensityTable, InfoCell, SignalFunctional};
use crate::walks::{cutoff, enumerate_paths, LatticeEconomy, StepDistribution};

/// Calibrated kernel `Z_m = exp(−a·ω_m − β·m)`.
///
/// `b = n·β` is the constant over the full n-step horizon, so the kernel at
/// date `m` carries `b·m/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmmParams {
    pub n: usize,
    /// Step scale the parameters were calibrated for.
    pub h: f64,
    pub a: f64,
    pub b: f64,
    /// `a·h`: coefficient of the unscaled step in the log-kernel.
    pub step_drift: f64,
    /// `β = b/n`.
    pub step_const: f64,
}

impl EmmParams {
    /// `E[exp(−a h ξ − β)] − 1`.
    pub fn density_residual(&self, dist: &StepDistribution) -> f64 {
        dist.atoms()
            .iter()
            .map(|(v, p)| p * (-self.step_drift * v - self.step_const).exp_m1())
            .sum()
    }

    /// `E[exp((1−a) h ξ − β)] − 1`.
    pub fn martingale_residual(&self, dist: &StepDistribution) -> f64 {
        dist.atoms()
            .iter()
            .map(|(v, p)| p * ((self.h - self.step_drift) * v - self.step_const).exp_m1())
            .sum()
    }
}

/// Calibrates the measure for `n` steps of size `1/√n`.
pub fn calibrate_emm(dist: &StepDistribution, n: usize) -> Result<EmmParams> {
    if n == 0 {
        return Err(LabError::InvalidArgument("n must be at least 1".into()));
    }
    calibrate_step(dist, n, 1.0 / (n as f64).sqrt())
}

/// Calibrates for `n` steps of arbitrary size `h`.
pub fn calibrate_step(dist: &StepDistribution, n: usize, h: f64) -> Result<EmmParams> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LabError::InvalidArgument(format!("step scale {h} must be positive")));
    }
    let atoms = dist.atoms();
    let (a, beta) = if atoms.len() == 2 {
        two_atom(atoms, h)
    } else if atoms.len() == 1 {
        return Err(LabError::NoConvergence("a degenerate step admits no martingale measure".into()));
    } else {
        many_atoms(atoms, h)?
    };
    let params = EmmParams {
        n,
        h,
        a,
        b: beta * n as f64,
        step_drift: a * h,
        step_const: beta,
    };
    let worst = params
        .density_residual(dist)
        .abs()
        .max(params.martingale_residual(dist).abs());
    if !(worst <= 1e-12) {
        return Err(LabError::NoConvergence(format!(
            "calibration residual {worst:e} at h = {h}"
        )));
    }
    Ok(params)
}

/// Closed form: the risk-neutral up-probability fixes both kernel atoms.
fn two_atom(atoms: &[(f64, f64)], h: f64) -> (f64, f64) {
    let (vd, pd) = atoms[0];
    let (vu, pu) = atoms[1];
    let (u, d) = (h * vu, h * vd);
    let q = -d.exp_m1() / (u.exp_m1() - d.exp_m1());
    let ln_up = (q / pu).ln();
    let ln_down = ((1.0 - q) / pd).ln();
    let a = (ln_down - ln_up) / (u - d);
    (a, -ln_up - a * u)
}

/// Cumulant generating function `ln E[e^{sξ}]`, accurate for small `s`.
fn cgf(atoms: &[(f64, f64)], s: f64) -> f64 {
    atoms.iter().map(|(v, p)| p * (s * v).exp_m1()).sum::<f64>().ln_1p()
}

/// Both conditions say `β = K(−a h) = K((1−a) h)`; the difference is strictly
/// decreasing in `a`, so the system reduces to a bracketed 1-D root.
fn many_atoms(atoms: &[(f64, f64)], h: f64) -> Result<(f64, f64)> {
    let f = |a: f64| cgf(atoms, (1.0 - a) * h) - cgf(atoms, -a * h);
    let mut width = 1.0;
    let (lo, hi) = loop {
        let (lo, hi) = (0.5 - width, 0.5 + width);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_finite() && fhi.is_finite() && flo > 0.0 && fhi < 0.0 {
            break (lo, hi);
        }
        width *= 2.0;
        if width > 1e6 || !flo.is_finite() || !fhi.is_finite() {
            return Err(LabError::NoConvergence(format!(
                "no bracket for the kernel exponent at h = {h}"
            )));
        }
    };
    let a = bisect(f, lo, hi, 1e-300, 200)?;
    Ok((a, cgf(atoms, -a * h)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    Public,
    Insider,
}

/// One cell of a kernel: where it lives, its physical probability and the
/// log-kernel, or `None` when the cell is excluded from the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCell {
    pub state: usize,
    pub aux: i64,
    /// Index into the signal law for insider kernels.
    pub signal: Option<usize>,
    /// Physical probability: `P[state]` for public kernels and the joint
    /// `P[cell, Y = y]` for insider kernels.
    pub prob: f64,
    pub log_z: Option<f64>,
}

impl KernelCell {
    pub fn z(&self) -> Option<f64> {
        self.log_z.map(f64::exp)
    }
}

#[derive(Debug, Clone)]
pub struct PricingKernel {
    pub variant: KernelVariant,
    pub m: usize,
    pub params: EmmParams,
    pub cells: Vec<KernelCell>,
    public_log_z: Vec<f64>,
}

impl PricingKernel {
    /// Public log-kernel at walk state `state` of date `m`.
    pub fn public_log_z(&self, state: usize) -> f64 {
        self.public_log_z[state]
    }

    /// `(weight, Z)` over cells in the support with positive weight.
    pub fn weighted(&self) -> Vec<(f64, f64)> {
        self.cells
            .iter()
            .filter_map(|c| c.z().map(|z| (c.prob, z)))
            .filter(|&(w, _)| w > 0.0)
            .collect()
    }

    /// Cells excluded because `η = 0`.
    pub fn excluded(&self) -> impl Iterator<Item = &KernelCell> {
        self.cells.iter().filter(|c| c.log_z.is_none())
    }
}

/// `Z^F` at every state of date `m`.
pub fn public_kernel(econ: &LatticeEconomy, params: &EmmParams, m: usize) -> Result<PricingKernel> {
    if m > econ.m_of_t {
        return Err(LabError::InvalidArgument(format!(
            "date {m} beyond the trading cutoff {}",
            econ.m_of_t
        )));
    }
    if (params.h - econ.step_scale).abs() > 1e-15 * econ.step_scale.max(1.0) {
        return Err(LabError::InvalidArgument(format!(
            "parameters calibrated for step {} but the lattice uses {}",
            params.h, econ.step_scale
        )));
    }
    let lp = econ.log_probs(m);
    let public_log_z: Vec<f64> = (0..econ.level_len(m))
        .map(|i| -params.step_drift * econ.sum_at(m, i) - params.step_const * m as f64)
        .collect();
    let cells = public_log_z
        .iter()
        .zip(&lp)
        .enumerate()
        .map(|(i, (&lz, &l))| KernelCell {
            state: i,
            aux: 0,
            signal: None,
            prob: l.exp(),
            log_z: Some(lz),
        })
        .collect();
    Ok(PricingKernel {
        variant: KernelVariant::Public,
        m,
        params: *params,
        cells,
        public_log_z,
    })
}

/// `Z^G = Z^F / η` on every (cell, signal) pair, weighted by the joint law.
pub fn insider_kernel(public: &PricingKernel, table: &ConditionalDensityTable) -> Result<PricingKernel> {
    if public.variant != KernelVariant::Public {
        return Err(LabError::InvalidArgument("expected a public kernel".into()));
    }
    let level = table.level(public.m).ok_or_else(|| {
        LabError::InvalidArgument(format!("density table has no date {}", public.m))
    })?;
    if table.n != public.params.n {
        return Err(LabError::InvalidArgument(format!(
            "table for n = {} but kernel for n = {}",
            table.n, public.params.n
        )));
    }
    let mut cells = Vec::with_capacity(level.len() * table.values.len());
    for (c, cell) in level.cells.iter().enumerate() {
        let lz = public.public_log_z[cell.state];
        for (y, v) in table.values.iter().enumerate() {
            let le = level.log_eta(c, y);
            let included = le > f64::NEG_INFINITY;
            cells.push(KernelCell {
                state: cell.state,
                aux: cell.aux,
                signal: Some(y),
                prob: if included {
                    (level.cell_log_prob[c] + v.log_prob + le).exp()
                } else {
                    0.0
                },
                log_z: included.then(|| lz - le),
            });
        }
    }
    Ok(PricingKernel {
        variant: KernelVariant::Insider,
        m: public.m,
        params: public.params,
        cells,
        public_log_z: public.public_log_z.clone(),
    })
}

/// `P̃` on (cell, signal) pairs at one date.
#[derive(Debug, Clone)]
pub struct MeasureTable {
    pub m: usize,
    /// `(cell, signal index, P[cell]·P[Y=y], η > 0)`.
    pub entries: Vec<(InfoCell, usize, f64, bool)>,
    /// `Σ` of all entries; 1 up to rounding.
    pub total: f64,
    /// Product mass on pairs with `η = 0`, where `(1/η)·P` puts nothing.
    pub excluded_mass: f64,
    pub warning: Option<String>,
}

/// The product-form martingale-preserving measure at date `m`.
pub fn martingale_preserving_measure(table: &ConditionalDensityTable, m: usize) -> Result<MeasureTable> {
    let level = table
        .level(m)
        .ok_or_else(|| LabError::InvalidArgument(format!("density table has no date {m}")))?;
    let mut entries = Vec::with_capacity(level.len() * table.values.len());
    let (mut total, mut excluded) = (0.0, 0.0);
    for (c, cell) in level.cells.iter().enumerate() {
        for (y, v) in table.values.iter().enumerate() {
            let p = (level.cell_log_prob[c] + v.log_prob).exp();
            let on = level.log_eta(c, y) > f64::NEG_INFINITY;
            total += p;
            if !on {
                excluded += p;
            }
            entries.push((*cell, y, p, on));
        }
    }
    let warning = (excluded > 0.0).then(|| {
        format!("η vanishes on product mass {excluded:.6e}; P̃ is restricted to {{η > 0}}")
    });
    Ok(MeasureTable {
        m,
        entries,
        total,
        excluded_mass: excluded,
        warning,
    })
}

/// Largest deviation of one preservation identity, read literally (`strict`)
/// and corrected for mass where `η` vanishes (`restricted`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropertyCheck {
    pub strict: f64,
    pub restricted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub m: usize,
    /// `E[1/η_{m+1} | G_m] = 1/η_m`.
    pub martingale: PropertyCheck,
    /// `E[1/η_m | F_m] = 1`.
    pub unit_conditional: PropertyCheck,
    /// `P̃[π, y] = P[π]·P[Y=y]`.
    pub factorization: PropertyCheck,
    /// `|η_table − η_enumerated|` over prefixes.
    pub table_consistency: f64,
    pub excluded_mass: f64,
    pub tolerance: f64,
}

impl VerificationReport {
    pub fn martingale_holds(&self) -> bool {
        self.martingale.restricted <= self.tolerance
    }
    pub fn unit_conditional_holds(&self) -> bool {
        self.unit_conditional.restricted <= self.tolerance
    }
    pub fn factorization_holds(&self) -> bool {
        self.factorization.restricted <= self.tolerance
    }
    /// All three identities hold on `{η > 0}` and the table matches enumeration.
    pub fn passes(&self) -> bool {
        self.martingale_holds()
            && self.unit_conditional_holds()
            && self.factorization_holds()
            && self.table_consistency <= self.tolerance
    }
    /// The identities hold without any support correction.
    pub fn strict_passes(&self) -> bool {
        self.martingale.strict.max(self.unit_conditional.strict).max(self.factorization.strict) <= self.tolerance
    }
}

pub const PRESERVATION_TOL: f64 = 1e-12;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Enumeration check of the three preservation properties at date `m`.
/// Events of `F_m` are path prefixes, so the identities are checked on
/// every atom of `F_m ∨ σ(Y)`.
pub fn verify_preservation(
    econ: &LatticeEconomy,
    table: &ConditionalDensityTable,
    m: usize,
) -> Result<VerificationReport> {
    let level = table
        .level(m)
        .ok_or_else(|| LabError::InvalidArgument(format!("density table has no date {m}")))?;
    if table.n != econ.n {
        return Err(LabError::InvalidArgument("table and economy differ in n".into()));
    }
    let n = econ.n;
    let signal = table.signal;
    let anchor = match signal {
        SignalFunctional::FutureRatio { anchor_t } => cutoff(n, anchor_t),
        _ => 0,
    };
    let paths = enumerate_paths(econ, n)?;
    let atoms = econ.step_distribution().atoms();
    let k = atoms.len() as u64;
    let next = m < n;

    // Prefix codes are base-k integers of the first m (and m+1) atoms.
    let mut p_y: HashMap<i64, f64> = HashMap::new();
    let mut p_pi: HashMap<u64, f64> = HashMap::new();
    let mut p_pi_y: HashMap<(u64, i64), f64> = HashMap::new();
    let mut p_ch: HashMap<u64, f64> = HashMap::new();
    let mut p_ch_y: HashMap<(u64, i64), f64> = HashMap::new();
    let mut cell_of: HashMap<u64, InfoCell> = HashMap::new();
    let mut sums = vec![0.0; n + 1];
    for path in &paths {
        for (j, &a) in path.atoms.iter().enumerate() {
            sums[j + 1] = sums[j] + atoms[a].0;
        }
        let y = quantize(crate::signals::signal_coord(&signal, &sums, anchor));
        let code = path.atoms[..m].iter().fold(0u64, |c, &a| c * k + a as u64);
        *p_y.entry(y).or_insert(0.0) += path.prob;
        *p_pi.entry(code).or_insert(0.0) += path.prob;
        *p_pi_y.entry((code, y)).or_insert(0.0) += path.prob;
        cell_of.entry(code).or_insert(InfoCell {
            state: path.nodes[m],
            aux: crate::signals::aux_key(&signal, &sums, m, anchor),
        });
        if next {
            let ch = code * k + path.atoms[m] as u64;
            *p_ch.entry(ch).or_insert(0.0) += path.prob;
            *p_ch_y.entry((ch, y)).or_insert(0.0) += path.prob;
        }
    }

    let inv_eta = |pi: f64, py: f64, joint: f64| pi * py / joint;

    // Table against enumeration, over every prefix and signal value.
    let mut table_consistency: f64 = 0.0;
    for (&code, &pi) in &p_pi {
        let c = level
            .cell_index(&cell_of[&code])
            .ok_or_else(|| LabError::VerificationFailed(format!("cell {:?} missing from the table", cell_of[&code])))?;
        for (yi, v) in table.values.iter().enumerate() {
            let joint = p_pi_y.get(&(code, v.key)).copied().unwrap_or(0.0);
            let enumerated = joint / (pi * p_y[&v.key]);
            table_consistency = table_consistency.max(rel(level.eta(c, yi), enumerated));
        }
    }

    // (i) martingale property of 1/η in G: children with joint mass.
    let mut martingale = PropertyCheck::default();
    if next {
        let mut cond: HashMap<(u64, i64), (f64, f64)> = HashMap::new();
        for (&(ch, y), &joint) in &p_ch_y {
            let e = cond.entry((ch / k, y)).or_insert((0.0, 0.0));
            // P[child | π, y] · 1/η_{m+1}(child, y), and surviving P[child | π].
            e.0 += joint * inv_eta(p_ch[&ch], p_y[&y], joint);
            e.1 += p_ch[&ch];
        }
        for (&(code, y), &(num, surviving)) in &cond {
            let joint = p_pi_y[&(code, y)];
            let lhs = num / joint;
            let inv = inv_eta(p_pi[&code], p_y[&y], joint);
            martingale.strict = martingale.strict.max(rel(lhs, inv));
            martingale.restricted = martingale.restricted.max(rel(lhs, inv * surviving / p_pi[&code]));
        }
    }

    // (ii) unit conditional expectation given F_m.
    let mut unit = PropertyCheck::default();
    let mut support_y: HashMap<u64, (f64, f64)> = HashMap::new();
    for (&(code, y), &joint) in &p_pi_y {
        let e = support_y.entry(code).or_insert((0.0, 0.0));
        e.0 += joint / p_pi[&code] * inv_eta(p_pi[&code], p_y[&y], joint);
        e.1 += p_y[&y];
    }
    for &(lhs, mass) in support_y.values() {
        unit.strict = unit.strict.max(rel(lhs, 1.0));
        unit.restricted = unit.restricted.max(rel(lhs, mass));
    }

    // (iii) factorization of P̃ = joint / η over atoms of F_m × σ(Y).
    let mut fact = PropertyCheck::default();
    let mut excluded_mass = 0.0;
    for (&code, &pi) in &p_pi {
        for (&y, &py) in &p_y {
            let product = pi * py;
            let tilde = match p_pi_y.get(&(code, y)) {
                Some(&joint) => joint * inv_eta(pi, py, joint),
                None => {
                    excluded_mass += product;
                    0.0
                }
            };
            let supported = if tilde > 0.0 { product } else { 0.0 };
            fact.strict = fact.strict.max(rel(tilde, product));
            fact.restricted = fact.restricted.max(rel(tilde, supported));
        }
    }

    Ok(VerificationReport {
        m,
        martingale,
        unit_conditional: unit,
        factorization: fact,
        table_consistency,
        excluded_mass,
        tolerance: PRESERVATION_TOL,
    })
}

/// Continuous kernels `(Z^F, Z^G)` with `Z^F = exp(−x/2 − t/8)` and
/// `Z^G = Z^F / η_t^y`; `Z^G` is `None` at `t = 1`.
pub fn continuous_kernels(t: f64, x: f64, y: f64) -> Result<(f64, Option<f64>)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(LabError::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    let log_zf = -x / 2.0 - t / 8.0;
    let zg = if t < 1.0 {
        Some((log_zf - log_gaussian_eta(t, x, y)?).exp())
    } else {
        None
    };
    Ok((log_zf.exp(), zg))
}

/// Box of continuous coordinates on which discrete and continuous insider
/// kernels are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioGrid {
    pub x_max: f64,
    pub y_max: f64,
}

impl Default for RatioGrid {
    fn default() -> Self {
        RatioGrid { x_max: 2.0, y_max: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRatioReport {
    pub m: usize,
    /// Smallest `C` with `1/C ≤ Z^{G_n}/Z^G ≤ C` on the compared cells.
    pub c: f64,
    pub cells_compared: usize,
    /// Continuous `(x, y)` where `η_n = 0` inside the box.
    pub offending: Vec<(f64, f64)>,
}

impl KernelRatioReport {
    pub fn bounded(&self) -> bool {
        self.c.is_finite() && self.offending.is_empty()
    }
}

/// Empirical constant in `1/C ≤ Z^{G_n}/Z^G ≤ C` at the trading cutoff.
/// Lattice cells are matched to continuous coordinates through `ω` and the
/// scaled signal coordinate, at continuous time `m/n`.
pub fn kernel_ratio_bound(
    econ: &LatticeEconomy,
    params: &EmmParams,
    table: &ConditionalDensityTable,
    grid: &RatioGrid,
) -> Result<KernelRatioReport> {
    let m = econ.m_of_t;
    let public = public_kernel(econ, params, m)?;
    let level = table
        .level(m)
        .ok_or_else(|| LabError::InvalidArgument(format!("density table has no date {m}")))?;
    let t = m as f64 / econ.n as f64;
    let anchor = match table.signal {
        SignalFunctional::RunningMax => {
            return Err(LabError::Unsupported(
                "no continuous density is implemented for the running maximum".into(),
            ))
        }
        SignalFunctional::FutureRatio { anchor_t } => Some(cutoff(econ.n, anchor_t)),
        SignalFunctional::TerminalValue => None,
    };
    if matches!(anchor, Some(a) if m > a) {
        return Err(LabError::Unsupported(
            "ratio signal compared beyond its anchor".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut offending = Vec::new();
    for (c, cell) in level.cells.iter().enumerate() {
        let x = econ.value_at(m, cell.state);
        if x.abs() > grid.x_max {
            continue;
        }
        let log_zf_cont = -x / 2.0 - t / 8.0;
        for (yi, v) in table.values.iter().enumerate() {
            let (y, log_eta_cont) = match anchor {
                // Independent signal: η ≡ 1 on both sides.
                Some(_) => (0.0, 0.0),
                None => {
                    let y = v.coord * econ.step_scale;
                    (y, log_gaussian_eta(t, x, y)?)
                }
            };
            if y.abs() > grid.y_max {
                continue;
            }
            let le = level.log_eta(c, yi);
            if le == f64::NEG_INFINITY {
                offending.push((x, y));
                continue;
            }
            compared += 1;
            let log_ratio = (public.public_log_z(cell.state) - le) - (log_zf_cont - log_eta_cont);
            worst = worst.max(log_ratio.abs());
        }
    }
    Ok(KernelRatioReport {
        m,
        c: if offending.is_empty() { worst.exp() } else { f64::INFINITY },
        cells_compared: compared,
        offending,
    })
}

/// `E[e^{γω_m}]` at the trading cutoff. On `F` the martingale-preserving
/// measure agrees with the physical one, so this is the physical moment.
pub fn preserved_mgf(econ: &LatticeEconomy, gamma: f64) -> f64 {
    let m = econ.m_of_t;
    econ.log_probs(m)
        .iter()
        .enumerate()
        .map(|(i, lp)| (lp + gamma * econ.value_at(m, i)).exp())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{conditional_density_table, conditional_density_table_at};
    use crate::walks::{build_lattice, make_step_distribution, StepSpec};

    fn rad() -> StepDistribution {
        make_step_distribution(&StepSpec::Rademacher).unwrap()
    }

    #[test]
    fn rademacher_one_step() {
        let p = calibrate_emm(&rad(), 1).unwrap();
        assert!((p.a - 0.5).abs() < 1e-15);
        let b1 = ((1.0 + 1f64.exp()) / 2.0).ln() - 0.5;
        assert!((p.b - b1).abs() < 1e-15);
        assert!((p.b - 0.120115).abs() < 1e-6);
    }

    #[test]
    fn rademacher_symmetric_exponent() {
        for n in [1, 2, 4, 16, 64, 256, 1024, 4096] {
            let p = calibrate_emm(&rad(), n).unwrap();
            assert!((p.a - 0.5).abs() < 1e-12, "n = {n}");
            assert!((p.b - 0.125).abs() <= 0.5 / n as f64);
            // β = ln cosh(h/2).
            let h = 1.0 / (n as f64).sqrt();
            assert!((p.step_const - (h / 2.0).cosh().ln()).abs() < 1e-16);
        }
        let b4 = calibrate_emm(&rad(), 4).unwrap().b;
        assert!((b4 - 0.12372).abs() < 1e-5);
    }

    #[test]
    fn skewed_calibration_residuals() {
        let d = make_step_distribution(&StepSpec::default_skewed()).unwrap();
        for n in [1, 10, 100, 4096] {
            let p = calibrate_emm(&d, n).unwrap();
            assert!(p.density_residual(&d).abs() < 1e-14);
            assert!(p.martingale_residual(&d).abs() < 1e-14);
        }
    }

    #[test]
    fn public_kernel_values() {
        let e1 = build_lattice(&rad(), 1, 1.0).unwrap();
        let k = public_kernel(&e1, &calibrate_emm(&rad(), 1).unwrap(), 1).unwrap();
        let q = 1.0 / (1.0 + 1f64.exp());
        assert!((k.cells[1].z().unwrap() - 2.0 * q).abs() < 1e-15);
        assert!((k.cells[0].z().unwrap() - 2.0 * (1.0 - q)).abs() < 1e-15);
        assert!((k.cells[1].z().unwrap() - 0.537883).abs() < 1e-6);

        let e2 = build_lattice(&rad(), 2, 1.0).unwrap();
        let p2 = calibrate_emm(&rad(), 2).unwrap();
        let k = public_kernel(&e2, &p2, 1).unwrap();
        let q2 = 1.0 / ((0.5f64).sqrt().exp() + 1.0);
        assert!((q2 - 0.330239).abs() < 1e-6);
        assert!((k.cells[1].z().unwrap() - 2.0 * q2).abs() < 1e-15);
        assert!((k.cells[0].z().unwrap() - 2.0 * (1.0 - q2)).abs() < 1e-15);
        let k0 = public_kernel(&e2, &p2, 0).unwrap();
        assert_eq!(k0.cells[0].z(), Some(1.0));
    }

    #[test]
    fn insider_kernel_two_steps() {
        let e = build_lattice(&rad(), 2, 0.5).unwrap();
        let p = calibrate_emm(&rad(), 2).unwrap();
        let tab = conditional_density_table(&e, &SignalFunctional::TerminalValue).unwrap();
        let pubk = public_kernel(&e, &p, 1).unwrap();
        let ins = insider_kernel(&pubk, &tab).unwrap();
        let y2 = tab.signal_index(quantize(2.0)).unwrap();
        let up = ins.cells.iter().find(|c| c.state == 1 && c.signal == Some(y2)).unwrap();
        assert!((up.z().unwrap() - pubk.cells[1].z().unwrap() / 2.0).abs() < 1e-15);
        let down = ins.cells.iter().find(|c| c.state == 0 && c.signal == Some(y2)).unwrap();
        assert_eq!(down.log_z, None);
    }

    #[test]
    fn measure_table_two_steps() {
        let e = build_lattice(&rad(), 2, 0.5).unwrap();
        let tab = conditional_density_table(&e, &SignalFunctional::TerminalValue).unwrap();
        let mt = martingale_preserving_measure(&tab, 1).unwrap();
        let y2 = tab.signal_index(quantize(2.0)).unwrap();
        let hit = mt.entries.iter().find(|e| e.0.state == 1 && e.1 == y2).unwrap();
        assert!((hit.2 - 0.125).abs() < 1e-15);
        assert!((mt.total - 1.0).abs() < 1e-15);
        assert!(mt.warning.is_some());
    }

    #[test]
    fn preservation_two_steps() {
        let e = build_lattice(&rad(), 2, 1.0).unwrap();
        let tab = conditional_density_table(&e, &SignalFunctional::TerminalValue).unwrap();
        let rep = verify_preservation(&e, &tab, 1).unwrap();
        assert!(rep.passes(), "{rep:?}");
        assert!(!rep.strict_passes());

        let fr = conditional_density_table(&e, &SignalFunctional::FutureRatio { anchor_t: 1.0 }).unwrap();
        let rep = verify_preservation(&e, &fr, 1).unwrap();
        assert!(rep.passes() && rep.strict_passes());
    }

    #[test]
    fn continuous_kernel_values() {
        let (zf, zg) = continuous_kernels(1.0, 0.0, 0.0).unwrap();
        assert!((zf - (-0.125f64).exp()).abs() < 1e-16 && zg.is_none());
        assert!((zf - 0.882497).abs() < 1e-6);
        let (_, zg) = continuous_kernels(0.75, 0.0, 0.0).unwrap();
        assert!((zg.unwrap() - (-3.0f64 / 32.0).exp() / 2.0).abs() < 1e-16);
        assert!((zg.unwrap() - 0.455255).abs() < 1e-6);
        let (zf, zg) = continuous_kernels(0.0, 0.0, 0.7).unwrap();
        assert_eq!((zf, zg), (1.0, Some(1.0)));
    }

    #[test]
    fn kernel_ratio_cases() {
        let e = build_lattice(&rad(), 256, 0.5).unwrap();
        let p = calibrate_emm(&rad(), 256).unwrap();
        let tab = conditional_density_table_at(&e, &SignalFunctional::TerminalValue, &[e.m_of_t]).unwrap();
        let r = kernel_ratio_bound(&e, &p, &tab, &RatioGrid::default()).unwrap();
        assert!(r.bounded() && r.c.is_finite() && r.cells_compared > 100, "{r:?}");

        let fr = conditional_density_table_at(&e, &SignalFunctional::FutureRatio { anchor_t: 0.5 }, &[e.m_of_t]).unwrap();
        let r = kernel_ratio_bound(&e, &p, &fr, &RatioGrid::default()).unwrap();
        assert!(r.bounded() && r.c < 1.01);
    }
}
