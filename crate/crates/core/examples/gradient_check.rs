//! Finite-difference check of every trainable tensor of a small double-precision network.

use psg_stager::train::{grad_check, GradCheckConfig};

fn main() -> psg_stager::Result<()> {
    let report = grad_check(&GradCheckConfig::default())?;
    for t in &report.tensors {
        println!("{:<28} {:>5} elements  {:.2e}", t.name, t.elements, t.relative_error);
    }
    println!(
        "{}: worst {:.2e} in {} (tolerance {:.0e})",
        if report.passed { "passed" } else { "FAILED" },
        report.max_relative_error,
        report.worst,
        report.tolerance
    );
    Ok(())
}
