//! Without constraints on the scene any medium explains any image: pick a
//! different (c, B), invert, and the forward model gives the same F back.

use spectral_recovery::medium::{forward_model, invert_model_reporting, MediumParams};
use spectral_recovery::scene::{builtin_scene, render};

fn main() -> spectral_recovery::Result<()> {
    let r = render(&builtin_scene("box")?)?;
    let grid = *r.truth.grid();
    for (c, b) in [(0.1, 0.05), (0.8, 0.5), (2.0, 0.3)] {
        let other = MediumParams::uniform(grid, c, b)?;
        let (l, _) = invert_model_reporting(&r.apparent, &r.depth, &other, f64::INFINITY)?;
        let f = forward_model(&l, &r.depth, &other)?;
        let worst = f
            .cube()
            .iter()
            .zip(r.apparent.cube())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / b.abs()));
        let negative = l.cube().iter().filter(|v| **v < 0.0).count();
        println!("c = {c}, B = {b}: max relative dF = {worst:.1e}, negative L values: {negative}");
    }
    Ok(())
}
