//! The ratio function and its inverse, including negative arguments.

use spectral_recovery::patterns::{phi, phi_inverse, phi_inverse_with, PhiOptions};

fn main() -> spectral_recovery::Result<()> {
    for (c, z1, z2) in [(0.4, 1.0, 3.0), (2.5, 0.5, 0.75), (0.7, -1.5, 2.0), (1.2, -2.0, -0.5)] {
        let ratio = phi(c, z1, z2)?;
        let back = phi_inverse_with(ratio, z1, z2, &PhiOptions::default())?;
        println!(
            "c = {c}, z = ({z1}, {z2}): phi = {ratio:.12}, inverse = {:.15} after {} iterations",
            back.c, back.iterations
        );
    }
    // 1/3 is the c -> 0 limit for (1, 3): no positive c attains it.
    match phi_inverse(1.0 / 3.0, 1.0, 3.0) {
        Ok(c) => println!("unexpected root {c}"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
