//! Numeric Φ* against the closed forms, Young's inequality and the
//! biconjugate, for a few built-in families.

use orlicz_lab::{ConjugatePair, NFunction};

fn main() -> orlicz_lab::Result<()> {
    let families = [NFunction::power(3.0)?, NFunction::exp_minus(1.0)?, NFunction::log_product(&[1.0, 2.0, 5.0])?];
    for phi in families {
        let pair = ConjugatePair::new(phi.clone())?;
        println!("{}  (Φ* source: {:?})", phi.label(), pair.provenance().phi_star);
        println!("  {:>8} {:>16} {:>16} {:>12}", "s", "Φ*(s)", "numeric", "h(ln s)");
        for s in [1e-2, 1.0, 1e2, 1e4] {
            println!("  {:>8.0e} {:>16.9e} {:>16.9e} {:>12.5e}", s, pair.conjugate_at(s)?, pair.conjugate_numeric(s)?, pair.h_at(s.ln().max(0.0))?);
        }
        let y = pair.check_young(2.0, 3.0)?;
        println!("  Young margin at (s, t) = (2, 3): {:.6}", y.margin);
        println!("  Φ**(1.5) = {:.12}, Φ(1.5) = {:.12}", pair.biconjugate_at(1.5)?, phi.eval(1.5)?);
    }
    Ok(())
}
