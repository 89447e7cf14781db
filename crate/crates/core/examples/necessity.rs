//! Knowing the inherent radiance is enough when two pixels share a depth but
//! not a colour, and useless when radiance follows depth.

use spectral_recovery::recovery_set::{find_necessity_pair, necessity_estimate, NecessityOptions};
use spectral_recovery::scene::{builtin_scene, render};
use spectral_recovery::Error;

fn main() -> spectral_recovery::Result<()> {
    let opts = NecessityOptions::default();
    let r = render(&builtin_scene("consistency")?)?;
    let (a, b) = find_necessity_pair(&r.inherent, &r.depth, 10, &opts)?;
    println!("pair at 500 nm: ({}, {}) and ({}, {})", a.x, a.y, b.x, b.y);
    let est = necessity_estimate(&r.apparent, &r.inherent, &r.depth, &opts)?;
    println!(
        "c = {:.12} (true {}), B = {:.12} (true {})",
        est.c_hat()[10].unwrap(),
        r.truth.c().values()[10],
        est.b_hat()[10].unwrap(),
        r.truth.b().values()[10]
    );

    let flat = render(&builtin_scene("atypical")?)?;
    match necessity_estimate(&flat.apparent, &flat.inherent, &flat.depth, &opts) {
        Err(Error::AtypicalScene) => println!("atypical scene detected"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
