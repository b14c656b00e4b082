//! E = min(E₁, E₂) against its closed form, then the volume bound v(r)
//! and its log-log slope near r = 0.

use orlicz_lab::geometry::{psi_pipeline, GeometryInputs};
use orlicz_lab::NFunction;

fn main() -> orlicz_lab::Result<()> {
    let n = 2.0;
    let inputs = GeometryInputs::new(NFunction::power(2.0)?, NFunction::log_product(&[1.0, 2.0, 2.0, 3.0])?, n)?;
    let cond = inputs.conditions()?;
    println!("conditions on Φ₁: {:?}", cond);
    let bound = psi_pipeline(inputs)?;
    println!("{:>10} {:>14} {:>14}", "t", "E numeric", "E closed");
    for row in bound.e_curve(&[1e1, 1e2, 1e4, 1e6, 1e8])? {
        println!("{:>10.0e} {:>14.6e} {:>14.6e}", row[0], row[1], row[2]);
    }
    println!("{:>10} {:>14}", "r", "v(r)");
    for (r, v) in bound.volume_curve(&[1e-1, 1e-2, 1e-4, 1e-6])? {
        println!("{r:>10.0e} {v:>14.6e}");
    }
    let slope = bound.volume_slope(1e-6)?;
    println!("slope of ln v at r = 1e-6: {slope:.4} (closed form {:.4}, 2n = {})", bound.closed_volume_slope(1e-6).unwrap_or(f64::NAN), 2.0 * n);
    Ok(())
}
