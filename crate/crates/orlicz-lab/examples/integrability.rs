//! Both integrability conditions across the log-product threshold p = n.

use orlicz_lab::quadrature::{i_of, second_condition};
use orlicz_lab::{ConjugatePair, NFunction};

fn main() -> orlicz_lab::Result<()> {
    let n = 2.0;
    println!("{:>22} {:>12} {:>14} {:>12}", "family", "I", "value", "second");
    for p in [1.5, 2.0, 2.5, 3.0] {
        let pair = ConjugatePair::new(NFunction::log_product(&[1.0, p])?)?;
        let first = i_of(&pair, n)?;
        let second = second_condition(&pair, n, None)?;
        let value = first.verdict().value().map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        println!("{:>22} {:>12?} {:>14} {:>12?}", pair.phi().label(), first.conclusion(), value, second.conclusion());
    }
    let power = ConjugatePair::new(NFunction::power(2.0)?)?;
    let v = i_of(&power, n)?.verdict().value().unwrap_or(f64::NAN);
    println!("power(p=2): I = {v:.10}, analytic 4·2^(-1/4) = {:.10}", 4.0 * 2f64.powf(-0.25));
    Ok(())
}
