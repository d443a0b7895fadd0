//! Small numerical helpers shared across modules.

use crate::error::{LabError, Result};

/// Scale used to turn real-valued walk coordinates into integer keys.
const KEY_SCALE: f64 = 1e9;

/// Integer key for a real coordinate; values closer than 1e-9 collide.
pub fn quantize(v: f64) -> i64 {
    (v * KEY_SCALE).round() as i64
}

/// Numerically stable `ln(Σ exp(x_i))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = Neumaier::default();
    xs.iter().for_each(|x| acc.add((x - max).exp()));
    max + acc.value().ln()
}

/// Log-pmf of the number of up-moves in `m` Bernoulli(`p`) trials.
///
/// Built by the ratio recurrence in log space, anchored at the mode so the
/// bulk carries full relative precision, with compensated accumulation and a
/// final log-sum-exp normalization. Extreme tails stay finite for large `m`.
pub fn log_binomial_pmf(m: usize, p: f64) -> Vec<f64> {
    if m == 0 {
        return vec![0.0];
    }
    let log_odds = p.ln() - (1.0 - p).ln();
    let mode = (((m + 1) as f64 * p).floor() as usize).min(m);
    let mut out = vec![0.0; m + 1];
    let mut acc = Neumaier::default();
    for k in mode..m {
        acc.add(((m - k) as f64 / (k + 1) as f64).ln());
        acc.add(log_odds);
        out[k + 1] = acc.value();
    }
    let mut acc = Neumaier::default();
    for k in (1..=mode).rev() {
        acc.add((k as f64 / (m - k + 1) as f64).ln());
        acc.add(-log_odds);
        out[k - 1] = acc.value();
    }
    let norm = log_sum_exp(&out);
    out.iter_mut().for_each(|v| *v -= norm);
    out
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn stable_sum(xs: &[f64]) -> f64 {
    let mut acc = Neumaier::default();
    xs.iter().for_each(|&x| acc.add(x));
    acc.value()
}

/// Pairwise summation; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Bisection for a strictly monotone function with a sign change on
/// `[lo, hi]`. Stops when the bracket collapses to adjacent floats or when
/// `|f| <= ftol`.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(LabError::NoConvergence(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm.abs() <= ftol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > xtol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    (x, fx)
}

/// Logarithmically spaced grid with `per_decade` points per factor of ten.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).ceil() as usize;
    (0..=steps)
        .map(|i| lo * 10f64.powf(decades * i as f64 / steps as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_row_matches_direct_counts() {
        let row = log_binomial_pmf(4, 0.5);
        let expect = [1.0, 4.0, 6.0, 4.0, 1.0];
        for (l, c) in row.iter().zip(expect) {
            assert!((l.exp() - c / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn binomial_tails_stay_finite() {
        use statrs::function::gamma::ln_gamma;
        let n = 4096usize;
        let row = log_binomial_pmf(n, 0.5);
        assert!((row[0] - n as f64 * 0.5f64.ln()).abs() < 1e-9);
        let probs: Vec<f64> = row.iter().map(|l| l.exp()).collect();
        assert!((stable_sum(&probs) - 1.0).abs() < 1e-14);
        for k in [0, 100, 1900, 2048, 3000] {
            let exact = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
                + n as f64 * 0.5f64.ln();
            assert!((row[k] - exact).abs() < 1e-10 * exact.abs().max(1.0), "k = {k}");
        }
    }

    #[test]
    fn bisect_finds_cube_root() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 0.0, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_section_parabola() {
        let (x, fx) = golden_section_min(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-20);
    }
}
