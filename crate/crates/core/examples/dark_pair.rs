//! The two-dark-pixel pattern on the built-in scene.

use spectral_recovery::patterns::solve_pattern;
use spectral_recovery::scene::{builtin_scene, render};

fn main() -> spectral_recovery::Result<()> {
    let r = render(&builtin_scene("dark-pair")?)?;
    let p = &r.patterns[0];
    println!("{}: {}", p.describe(), r.verification[0].summary());
    let est = solve_pattern(p, &r.apparent, &r.depth)?;
    let grid = r.apparent.grid();
    for k in (0..grid.n_bands()).step_by(5) {
        let e = est.bands[k].estimate().expect("non-degenerate");
        println!(
            "{:>5} nm  c = {:.10} (true {:.10})  B = {:.10} (true {:.10})",
            grid.wavelength(k),
            e.c,
            r.truth.c().values()[k],
            e.b,
            r.truth.b().values()[k]
        );
    }
    Ok(())
}
