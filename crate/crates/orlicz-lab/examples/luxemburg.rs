//! Luxemburg norms of generated densities, the Young split and the tail
//! bound for sets of small measure.

use orlicz_lab::orlicz_measure::{density_generator, luxemburg_norm, optimal_youngsplit, tail_bound_curve, DensitySpec};
use orlicz_lab::{ConjugatePair, NFunction};

fn main() -> orlicz_lab::Result<()> {
    let phi = NFunction::power(2.0)?;
    let pair = ConjugatePair::new(phi.clone())?;
    for spec in [DensitySpec::Constant, DensitySpec::PowerSpike { gamma: 0.5 }, DensitySpec::LogSpike { gamma: 2.0 }] {
        let f = density_generator(spec, 2, 128)?;
        println!("{spec:?}: ‖F‖ = {:.6}", luxemburg_norm(&phi, &f)?);
    }
    let f = density_generator(DensitySpec::PowerSpike { gamma: 0.8 }, 2, 128)?;
    let mask: Vec<bool> = f.values().iter().map(|&v| v > 2.0).collect();
    let split = optimal_youngsplit(&pair, &f, &mask)?;
    println!("Young split on {{F > 2}}: ε = {:.4}, bound {:.6} >= actual {:.6}", split.epsilon, split.bound, split.actual);
    println!("{:>8} {:>12} {:>12}", "s", "bound", "worst mass");
    for p in tail_bound_curve(&pair, &f, &[1.0, 10.0, 100.0, 1000.0], 1.0)? {
        println!("{:>8.0} {:>12.6} {:>12.6}", p.s, p.bound, p.worst_case_mass);
    }
    Ok(())
}
