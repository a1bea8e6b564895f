//! Runs the randomized invariant suite and prints the per-invariant tallies.

use grlp::experiment::{run_property_suite, PropertySettings};

fn main() -> grlp::Result<()> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(50);
    let report = run_property_suite(&PropertySettings {
        trials,
        ..Default::default()
    })?;
    for t in &report.invariants {
        println!("{:<26} {:>4}/{trials}", t.name, t.passed);
        if let Some(f) = &t.first_failure {
            println!("    {f}");
        }
    }
    if !report.all_passed {
        std::process::exit(1);
    }
    Ok(())
}
