//! Four patterns in one scene, each estimating the medium on its own.

use spectral_recovery::patterns::{consistency_check, solve_pattern};
use spectral_recovery::scene::{builtin_scene, render};

fn main() -> spectral_recovery::Result<()> {
    let r = render(&builtin_scene("consistency")?)?;
    let estimates = r
        .patterns
        .iter()
        .map(|p| solve_pattern(p, &r.apparent, &r.depth))
        .collect::<Result<Vec<_>, _>>()?;
    for (p, e) in r.patterns.iter().zip(&estimates) {
        println!("{:<60} c(600 nm) = {:.12}", p.describe(), e.c_hat()[20].unwrap());
    }
    let report = consistency_check(&estimates, 1e-8)?;
    println!("agree within 1e-8: {} (largest discrepancy {:.1e})", report.passed, report.max_discrepancy());
    Ok(())
}
