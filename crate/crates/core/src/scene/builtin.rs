use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patterns::PatternKind;

use super::spec::{
    DepthSpec, GridSpec, MaterialSpec, MediumSpec, PatternSpec, RegionSpec, SceneSpec, SpectrumSpec,
};

const BUILTIN: [(&str, &str); 10] = [
    ("dark-pair", include_str!("../../scenes/dark-pair.toml")),
    ("triple", include_str!("../../scenes/triple.toml")),
    ("box", include_str!("../../scenes/box.toml")),
    ("sticks", include_str!("../../scenes/sticks.toml")),
    ("two-region-deriv", include_str!("../../scenes/two-region-deriv.toml")),
    ("one-region-deriv2", include_str!("../../scenes/one-region-deriv2.toml")),
    ("slant-majority", include_str!("../../scenes/slant-majority.toml")),
    ("consistency", include_str!("../../scenes/consistency.toml")),
    ("atypical", include_str!("../../scenes/atypical.toml")),
    ("minority", include_str!("../../scenes/minority.toml")),
];

/// The built-in scenes: one per pattern kind, the majority recovery-set
/// plane, the multi-pattern consistency scene, a scene where radiance is a
/// function of depth alone, and a recovery set that is only a minority.
pub fn builtin_scenes() -> Vec<SceneSpec> {
    BUILTIN
        .iter()
        .map(|(name, text)| {
            SceneSpec::parse(text, Path::new(&format!("builtin:{name}")))
                .unwrap_or_else(|e| panic!("built-in scene {name} is malformed: {e}"))
        })
        .collect()
}

pub fn builtin_scene(name: &str) -> Result<SceneSpec> {
    builtin_scenes()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScene(name.to_string()))
}

/// Rounds to a multiple of 1/64 so depth sums and differences stay exact.
fn dyadic(v: f64) -> f64 {
    (v * 64.0).round() / 64.0
}

fn random_knots(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<[f64; 2]> {
    [400.0, 550.0, 700.0]
        .into_iter()
        .map(|l| [l, rng.random_range(lo..hi)])
        .collect()
}

/// A random reflectance that stays at least 0.06 away from every spectrum
/// in `avoid` at each knot. All spectra share the same knots and keep their
/// order, so the margin holds between knots as well.
fn random_material(rng: &mut ChaCha8Rng, avoid: &[&[[f64; 2]]]) -> Vec<[f64; 2]> {
    const MARGIN: f64 = 0.06;
    let slot = |i: usize, s: usize| {
        let mut v: Vec<f64> = avoid.iter().map(|a| a[i][1]).collect();
        v.sort_by(f64::total_cmp);
        let lo = if s == 0 { 0.05 } else { v[s - 1] + MARGIN };
        let hi = if s == v.len() { 0.95 } else { v[s] - MARGIN };
        (lo, hi)
    };
    let open: Vec<usize> = (0..=avoid.len())
        .filter(|&s| (0..3).all(|i| slot(i, s).1 - slot(i, s).0 >= 0.02))
        .collect();
    let s = open[rng.random_range(0..open.len())];
    (0..3)
        .map(|i| {
            let (lo, hi) = slot(i, s);
            // The lower half only, leaving room for a later material above.
            [avoid[0][i][0], lo + 0.5 * (hi - lo) * rng.random::<f64>()]
        })
        .collect()
}

/// A random valid scene embedding one pattern of `kind`, on the default
/// 31-band grid, noise-free.
///
/// Each pattern pixel sits at the centre of its own 3×3 block, so the
/// derivative kinds can difference within a uniform region. Materials keep
/// a margin from the backscatter and from each other at every band, and
/// `c·z` stays at or below 5.
pub fn random_pattern_scene(kind: PatternKind, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((kind as u64) << 56));
    let c = random_knots(&mut rng, 0.05, 1.0);
    let b = random_knots(&mut rng, 0.05, 0.6);
    let c_max = c.iter().fold(0.0_f64, |m, k| m.max(k[1]));
    let z_max = 5.0 / c_max;
    let z_min = 0.5_f64.min(z_max / 4.0);

    let material = random_material;
    let n = kind.pixel_count();
    let mut depth_at = |rng: &mut ChaCha8Rng| dyadic(rng.random_range(z_min..z_max));
    let distinct = |rng: &mut ChaCha8Rng, depth_at: &mut dyn FnMut(&mut ChaCha8Rng) -> f64, taken: &[f64]| loop {
        let z = depth_at(rng);
        if taken.iter().all(|t| (z - t).abs() >= 0.25) {
            return z;
        }
    };

    let (mats, assign, z): (Vec<Vec<[f64; 2]>>, Vec<usize>, Vec<f64>) = match kind {
        PatternKind::DarkPair => {
            let z1 = depth_at(&mut rng);
            let z2 = distinct(&mut rng, &mut depth_at, &[z1]);
            (vec![vec![[400.0, 0.0], [700.0, 0.0]]], vec![0, 0], vec![z1, z2])
        }
        PatternKind::Triple => {
            let m = material(&mut rng, &[&b]);
            let z1 = depth_at(&mut rng);
            let z2 = distinct(&mut rng, &mut depth_at, &[z1]);
            let z3 = distinct(&mut rng, &mut depth_at, &[z1, z2]);
            let mut zs = vec![z1, z2, z3];
            zs.sort_by(f64::total_cmp);
            (vec![m], vec![0, 0, 0], zs)
        }
        PatternKind::Box => {
            let m1 = material(&mut rng, &[&b]);
            let m2 = material(&mut rng, &[&b, &m1]);
            let za = depth_at(&mut rng);
            let zb = distinct(&mut rng, &mut depth_at, &[za]);
            (vec![m1, m2], vec![0, 0, 1, 1], vec![za, zb, za, zb])
        }
        PatternKind::Sticks => {
            let m1 = material(&mut rng, &[&b]);
            let m2 = material(&mut rng, &[&b, &m1]);
            let (z1, z3, lo, hi) = loop {
                let (z1, z3) = (depth_at(&mut rng), depth_at(&mut rng));
                let (lo, hi) = (z_min - z1.min(z3), z_max - z1.max(z3));
                if hi - lo >= 1.0 {
                    break (z1, z3, lo, hi);
                }
            };
            let d = loop {
                let d = dyadic(rng.random_range(lo..hi));
                if d.abs() >= 0.25 {
                    break d;
                }
            };
            (vec![m1, m2], vec![0, 0, 1, 1], vec![z1, z1 + d, z3, z3 + d])
        }
        PatternKind::TwoRegionDeriv => {
            let m = material(&mut rng, &[&b]);
            let z1 = depth_at(&mut rng);
            let z2 = distinct(&mut rng, &mut depth_at, &[z1]);
            (vec![m], vec![0, 0], vec![z1, z2])
        }
        PatternKind::OneRegionDeriv2 => {
            let m = material(&mut rng, &[&b]);
            (vec![m], vec![0], vec![depth_at(&mut rng)])
        }
    };

    let materials: Vec<MaterialSpec> = mats
        .into_iter()
        .enumerate()
        .map(|(i, r)| MaterialSpec {
            name: format!("m{i}"),
            reflectance: SpectrumSpec::Knots(r),
        })
        .collect();
    let mut regions = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n);
    for j in 0..n {
        let (cx, cy) = (3 * j + 1, 1);
        // Slopes small enough that the block stays above z_min / 2.
        let gx = if kind.needs_derivatives() {
            let s = rng.random_range(1..8) as f64 / 64.0;
            if rng.random_bool(0.5) { s } else { -s }
        } else {
            0.0
        };
        regions.push(RegionSpec {
            x0: 3 * j,
            y0: 0,
            x1: 3 * j + 3,
            y1: 3,
            material: materials[assign[j]].name.clone(),
            depth: DepthSpec {
                z0: z[j] - gx * cx as f64,
                gx,
                gy: 0.0,
            },
            shading: None,
        });
        pixels.push([cx, cy]);
    }
    SceneSpec {
        name: format!("random-{}-{seed}", kind.name()),
        description: format!("random {} configuration", kind.name()),
        width: 3 * n,
        height: 3,
        grid: GridSpec::default(),
        illuminant: SpectrumSpec::Flat(1.0),
        medium: MediumSpec {
            preset: None,
            c: Some(SpectrumSpec::Knots(c)),
            b: Some(SpectrumSpec::Knots(b)),
        },
        materials,
        regions,
        noise: None,
        patterns: vec![PatternSpec {
            kind: kind.name().to_string(),
            pixels,
            direction: kind.needs_derivatives().then_some([1.0, 0.0]),
            label: None,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::render;

    #[test]
    fn names_are_unique_and_resolvable() {
        let scenes = builtin_scenes();
        for (i, s) in scenes.iter().enumerate() {
            assert!(scenes[i + 1..].iter().all(|t| t.name != s.name));
            assert_eq!(builtin_scene(&s.name).unwrap(), *s);
        }
        assert!(matches!(builtin_scene("nope"), Err(Error::UnknownScene(_))));
    }

    #[test]
    fn random_scenes_render_and_verify() {
        for kind in PatternKind::ALL {
            for seed in 0..20 {
                let spec = random_pattern_scene(kind, seed);
                let r = render(&spec).unwrap_or_else(|e| panic!("{kind} seed {seed}: {e}"));
                assert!(r.verification[0].passed());
                assert_eq!(r.patterns[0].kind, kind);
            }
        }
    }

    #[test]
    fn random_scenes_are_reproducible() {
        assert_eq!(
            random_pattern_scene(PatternKind::Sticks, 3),
            random_pattern_scene(PatternKind::Sticks, 3)
        );
        assert_ne!(
            random_pattern_scene(PatternKind::Sticks, 3),
            random_pattern_scene(PatternKind::Sticks, 4)
        );
    }
}
