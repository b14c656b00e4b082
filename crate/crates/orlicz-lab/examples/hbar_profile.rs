//! Stability modulus ħ(δ) against its closed-form asymptote for the
//! recognized families, on the default δ grid.

use orlicz_lab::stability::{default_delta_grid, StabilityProfile};
use orlicz_lab::{ConjugatePair, Ledger, NFunction};

fn main() -> orlicz_lab::Result<()> {
    let n = 2.0;
    let families = [
        NFunction::exp_minus(1.0)?,
        NFunction::power(2.0)?,
        NFunction::slow_growth(1, 2.0 * n + 1.0, n)?,
        NFunction::slow_growth(2, 2.0 * n + 1.0, n)?,
    ];
    let ledger = Ledger::default();
    for phi in families {
        let pair = ConjugatePair::new(phi)?;
        let start = std::time::Instant::now();
        let prof = StabilityProfile::compute(&pair, n, &default_delta_grid(), &ledger)?;
        println!("{}  ({:.2?})", prof.family, start.elapsed());
        println!("  {:>10} {:>14} {:>12} {:>12}", "delta", "tau", "hbar", "closed");
        for p in prof.points.iter().step_by(4) {
            println!("  {:>10.1e} {:>14.6e} {:>12.5e} {:>12.5e}", p.delta, p.tau, p.hbar, p.hbar_closed.unwrap_or(f64::NAN));
        }
        println!("  max |ln(numeric/closed)| = {:.3}, tau monotone: {}", prof.max_log_ratio().unwrap_or(f64::NAN), prof.tau_monotone());
    }
    Ok(())
}
