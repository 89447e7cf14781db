use std::fmt::Write;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::medium::{forward_model, invert_model_reporting, MediumParams, SpectralImage};
use crate::recovery_set::{necessity_estimate, NecessityOptions};
use crate::report::rel;
use crate::scene::{builtin_scene, render};

pub const DEMOS: [(&str, &str); 3] = [
    ("ill-posed-camera", "a spectral change the camera cannot see"),
    ("ill-posed-medium", "two media and two scenes giving the same image"),
    ("necessity", "the medium from known inherent radiance, and where that fails"),
];

/// Runs a demo, appending its narrative to `out`. Returns whether the
/// demonstrated property held.
pub fn run_demo(name: &str, seed: u64, out: &mut String) -> Result<bool> {
    match name {
        "ill-posed-camera" => camera(seed, out),
        "ill-posed-medium" => medium(out),
        "necessity" => necessity(out),
        _ => Err(Error::UnknownDemo(name.to_string())),
    }
}

fn verdict(out: &mut String, ok: bool) -> bool {
    writeln!(out, "result = {}", if ok { "pass" } else { "fail" }).unwrap();
    ok
}

fn camera(seed: u64, out: &mut String) -> Result<bool> {
    let scene = render(&builtin_scene("consistency")?)?;
    let f = scene.apparent.pixel_spectrum(0);
    let cam = CameraModel::gaussian_rgb(*f.grid());
    let delta = cam.null_perturbation(seed)?.scaled(0.5 * f.norm());
    let g = f.add_scaled(1.0, &delta)?;
    let (p, q) = (cam.project(&f)?, cam.project(&g)?);
    writeln!(out, "camera = 3-channel gaussian, {} bands, gram condition {:.3e}", f.len(), cam.condition_number()).unwrap();
    writeln!(out, "seed = {seed}").unwrap();
    writeln!(out, "|F| = {:.6e}", f.norm()).unwrap();
    writeln!(out, "|dF| = {:.6e}", delta.norm()).unwrap();
    let mut worst = 0.0_f64;
    for (j, (a, b)) in p.values().iter().zip(q.values()).enumerate() {
        writeln!(out, "P{j}: F -> {a:.12e}, F+dF -> {b:.12e}, |dP| = {:.3e}", (a - b).abs()).unwrap();
        worst = worst.max((a - b).abs());
    }
    writeln!(out, "max |dP| = {worst:.3e}").unwrap();
    Ok(verdict(out, delta.norm() > 0.0 && worst < 1e-10))
}

fn medium(out: &mut String) -> Result<bool> {
    let scene = render(&builtin_scene("consistency")?)?;
    let truth = &scene.truth;
    let other = MediumParams::new(truth.c().scaled(1.5), truth.b().scaled(0.7))?;
    let (alt_l, _) = invert_model_reporting(&scene.apparent, &scene.depth, &other, f64::INFINITY)?;
    let alt_f = forward_model(&alt_l, &scene.depth, &other)?;
    let worst = max_rel(&alt_f, &scene.apparent);
    let pixel = scene.apparent.pixels() / 2;
    writeln!(out, "scene = consistency, pixel {pixel}, depth {}", scene.depth.values()[pixel]).unwrap();
    for k in [0, scene.apparent.grid().n_bands() / 2, scene.apparent.grid().n_bands() - 1] {
        let lambda = scene.apparent.grid().wavelength(k);
        writeln!(
            out,
            "{lambda} nm: (c, B, L) = ({:.6}, {:.6}, {:.9}) and ({:.6}, {:.6}, {:.9}) both give F = {:.9}",
            truth.c().values()[k],
            truth.b().values()[k],
            scene.inherent.get(pixel, k),
            other.c().values()[k],
            other.b().values()[k],
            alt_l.get(pixel, k),
            scene.apparent.get(pixel, k)
        )
        .unwrap();
    }
    writeln!(out, "max relative |dF| over the image = {worst:.3e}").unwrap();
    Ok(verdict(out, worst < 1e-12))
}

fn max_rel(a: &SpectralImage, b: &SpectralImage) -> f64 {
    a.cube().iter().zip(b.cube()).fold(0.0_f64, |m, (x, y)| m.max(rel(*x, *y)))
}

fn necessity(out: &mut String) -> Result<bool> {
    let opts = NecessityOptions::default();
    let scene = render(&builtin_scene("consistency")?)?;
    let est = necessity_estimate(&scene.apparent, &scene.inherent, &scene.depth, &opts)?;
    let mut worst = 0.0_f64;
    for (k, (c, b)) in est.c_hat().iter().zip(est.b_hat()).enumerate() {
        if let (Some(c), Some(b)) = (c, b) {
            worst = worst
                .max(rel(*c, scene.truth.c().values()[k]))
                .max(rel(b, scene.truth.b().values()[k]));
        } else {
            worst = f64::INFINITY;
        }
    }
    let mid = scene.apparent.grid().n_bands() / 2;
    writeln!(out, "scene = consistency (equal-depth pixels of different materials)").unwrap();
    writeln!(
        out,
        "{} nm: c = {:.12} (true {:.12}), B = {:.12} (true {:.12})",
        scene.apparent.grid().wavelength(mid),
        est.c_hat()[mid].unwrap_or(f64::NAN),
        scene.truth.c().values()[mid],
        est.b_hat()[mid].unwrap_or(f64::NAN),
        scene.truth.b().values()[mid]
    )
    .unwrap();
    writeln!(out, "max relative error over bands = {worst:.3e}").unwrap();

    let atypical = render(&builtin_scene("atypical")?)?;
    let flagged = matches!(
        necessity_estimate(&atypical.apparent, &atypical.inherent, &atypical.depth, &opts),
        Err(Error::AtypicalScene)
    );
    writeln!(
        out,
        "scene = atypical (radiance a function of depth): {}",
        if flagged { "reported atypical-scene" } else { "returned a value" }
    )
    .unwrap();
    Ok(verdict(out, worst < 1e-10 && flagged))
}
