//! Exponential martingale measure: a_n, b_n and the skewness correction.

use insider_lab::measures::calibrate_emm;
use insider_lab::walks::{make_step_distribution, StepSpec};

fn main() -> insider_lab::Result<()> {
    let rad = make_step_distribution(&StepSpec::Rademacher)?;
    let skew = make_step_distribution(&StepSpec::default_skewed())?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>16}", "n", "a_n rad", "b_n rad", "a_n skew", "(a_n−½)√n skew");
    for k in 0..=12 {
        let n = 1usize << k;
        let r = calibrate_emm(&rad, n)?;
        let s = calibrate_emm(&skew, n)?;
        println!(
            "{n:>6} {:>12.9} {:>12.9} {:>12.9} {:>16.9}",
            r.a,
            r.b,
            s.a,
            (s.a - 0.5) * (n as f64).sqrt()
        );
    }
    println!("limits: b_n → 1/8, (a_n − ½)√n → E[ξ³]/24 = {:.9}", skew.third_moment() / 24.0);
    Ok(())
}
