//! Level-set iteration: the starting level from the integrability tail and
//! the first few halving steps.

use orlicz_lab::stability::{degiorgi_threshold, run_degiorgi_iteration};
use orlicz_lab::{ConjugatePair, NFunction};

fn main() -> orlicz_lab::Result<()> {
    let n = 2.0;
    let (k, c1) = (1.0, 1.0);
    for phi in [NFunction::power(2.0)?, NFunction::log_product(&[1.0, 3.0])?] {
        let pair = ConjugatePair::new(phi)?;
        let rep = degiorgi_threshold(&pair, n, k, c1)?;
        println!("{}: t0 = {:.6}, s0 = {:.6e}, jump <= {:.6}, vanishes by {:.6e}", pair.phi().label(), rep.t0, rep.s0, rep.jump_bound, rep.vanishing_level);
        let start = if rep.t0 > 0.0 { rep.t0 } else { 1.0 };
        for step in run_degiorgi_iteration(&pair, n, k, c1, start, 6)? {
            println!("  j={} t={:>10.3} r={:>12.5e} s={:>12.5e}", step.j, step.t, step.r, step.s);
        }
    }
    Ok(())
}
