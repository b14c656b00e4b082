//! Diameter-bound feasibility: symbolic for slow-growth inputs, witness
//! search otherwise.

use orlicz_lab::geometry::{diameter_feasible, Feasibility};
use orlicz_lab::NFunction;

fn main() -> orlicz_lab::Result<()> {
    let n = 2.0;
    let cases = [
        NFunction::power(2.0)?,
        NFunction::log_product(&[1.0, 2.0, 4.0, 5.0])?,
        NFunction::log_product(&[1.0, 2.0, 3.0])?,
        NFunction::log_product(&[1.0, 5.0])?,
    ];
    for phi in cases {
        let rep = diameter_feasible(&phi, n, 4)?;
        let what = match &rep.feasibility {
            Feasibility::Feasible { witness } => format!("feasible, Φ₁ = {:?}", witness.family),
            Feasibility::Infeasible { reason } => format!("infeasible: {reason}"),
            Feasibility::Unknown { reason } => format!("unknown: {reason}"),
        };
        println!("{:<26} {} ({})", phi.label(), what, if rep.symbolic { "symbolic" } else { "search" });
    }
    Ok(())
}
