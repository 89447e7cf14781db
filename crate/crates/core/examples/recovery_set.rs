//! Majority consensus on a tilted uniform plane: exact data, noisy data, and
//! a plane that covers too little of the image.

use spectral_recovery::recovery_set::{estimate_recovery_set, Direction, RecoverySetOptions};
use spectral_recovery::scene::{builtin_scene, render, render_with_seed, NoiseModel, NoiseSpec};

fn main() -> spectral_recovery::Result<()> {
    let opts = RecoverySetOptions::default();
    let spec = builtin_scene("slant-majority")?;
    let r = render(&spec)?;
    println!("recovery set: {} of {} pixels", r.recovery_set_size(Direction::X)?, r.apparent.pixels());

    let est = estimate_recovery_set(&r.apparent, &r.depth, Direction::X, &opts)?;
    let fit = est.fits[15].as_ref().expect("band 15 fits");
    println!(
        "exact, 550 nm: c = {:.12} (true {}), B = {:.12} (true {}), {} inliers",
        fit.c,
        r.truth.c().values()[15],
        fit.b,
        r.truth.b().values()[15],
        fit.inlier_count()
    );

    let mut noisy = spec.clone();
    noisy.noise = Some(NoiseSpec { model: NoiseModel::Relative, sigma: 1e-3, seed: 0 });
    for seed in 0..3 {
        let r = render_with_seed(&noisy, Some(seed))?;
        let est = estimate_recovery_set(&r.apparent, &r.depth, Direction::X, &opts)?;
        let c = est.estimate.c_hat()[15].expect("band 15 fits");
        println!("noise seed {seed}: c = {c:.5}");
    }

    let minority = render(&builtin_scene("minority")?)?;
    let est = estimate_recovery_set(&minority.apparent, &minority.depth, Direction::X, &opts)?;
    match &est.fits[15] {
        Ok(f) => println!("minority: unexpected fit c = {}", f.c),
        Err(e) => println!("minority: {e}"),
    }
    Ok(())
}
