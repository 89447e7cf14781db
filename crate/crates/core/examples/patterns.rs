//! Every pattern kind on random valid configurations.

use spectral_recovery::medium::invert_model;
use spectral_recovery::patterns::{solve_pattern, PatternKind};
use spectral_recovery::scene::{random_pattern_scene, render};

fn main() -> spectral_recovery::Result<()> {
    for kind in PatternKind::ALL {
        let mut worst_c = 0.0_f64;
        let mut worst_l = 0.0_f64;
        for seed in 0..25 {
            let r = render(&random_pattern_scene(kind, seed))?;
            let est = solve_pattern(&r.patterns[0], &r.apparent, &r.depth)?;
            for (c, t) in est.c_hat().iter().zip(r.truth.c().values()) {
                worst_c = worst_c.max((c.expect("estimated") - t).abs() / t);
            }
            let l = invert_model(&r.apparent, &r.depth, &est.to_medium()?, 30.0)?;
            for (a, b) in l.cube().iter().zip(r.inherent.cube()) {
                worst_l = worst_l.max((a - b).abs() / b.abs().max(1e-3));
            }
        }
        println!("{kind:<18} max relative error  c {worst_c:.1e}  L {worst_l:.1e}");
    }
    Ok(())
}
