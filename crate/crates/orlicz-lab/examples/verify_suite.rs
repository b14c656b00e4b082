//! Closed-form asymptotics of the example families against the numeric
//! conjugate and h.

use orlicz_lab::asymptotics::verify_example_suite;

fn main() -> orlicz_lab::Result<()> {
    let report = verify_example_suite()?;
    for item in &report.items {
        println!("{:<6} {:<48} {:?} max |ln ratio| = {:.3e}", if item.pass { "pass" } else { "FAIL" }, item.name, item.verdict.direction, item.max_abs_log_ratio);
    }
    println!("all pass: {}", report.pass);
    Ok(())
}
