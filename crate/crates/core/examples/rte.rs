//! Integrating the line-of-sight transfer equation and watching RK4 converge
//! to the closed form.

use spectral_recovery::medium::{rte_closed_form, rte_integrate};

fn main() {
    let (l, b, c, z) = (0.8, 0.3, 0.9, 6.0);
    let exact = rte_closed_form(l, c * b, c, z);
    println!("closed form: {exact:.15}");
    let mut previous: Option<f64> = None;
    for steps in [5, 10, 20, 40, 80, 160] {
        let err = (rte_integrate(l, c * b, c, z, steps) - exact).abs();
        let order = previous.map(|p| (p / err).log2());
        println!("{steps:>4} steps: error {err:.3e}  order {}", order.map_or("-".into(), |o| format!("{o:.3}")));
        previous = Some(err);
    }
}
