//! Synthetic scenes with known ground truth.
//!
//! A [`SceneSpec`] tiles the image with rectangular regions, each holding
//! one material at an affine depth. Rendering produces the inherent
//! radiance, the apparent radiance through the medium, the depth map and
//! the true medium, and checks every embedded pattern against its defining
//! constraints.

mod builtin;
mod spec;

pub use builtin::{builtin_scene, builtin_scenes, random_pattern_scene};
pub use spec::{
    DepthSpec, GridSpec, MaterialSpec, MediumSpec, NoiseModel, NoiseSpec, PatternSpec, RegionSpec,
    SceneSpec, ShadingSpec, SpectrumSpec, MAX_MATERIAL_KNOTS,
};

pub(crate) use spec::toml_error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{forward_model, DepthMap, ImageKind, MediumParams, SpectralImage};
use crate::patterns::{
    verify_pattern, PatternInstance, PixelDerivatives, VerificationReport, VerifyTolerances,
};
use crate::recovery_set::{differentiate, Direction};

/// Everything a render produces.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub name: String,
    pub inherent: SpectralImage,
    /// Apparent radiance after noise, if the scene has any.
    pub apparent: SpectralImage,
    pub depth: DepthMap,
    pub truth: MediumParams,
    /// Embedded patterns; the derivative kinds carry exact derivatives of
    /// the noise-free apparent radiance.
    pub patterns: Vec<PatternInstance>,
    pub verification: Vec<VerificationReport>,
    pub noise: Option<NoiseSpec>,
    /// Noisy values clamped to zero.
    pub clamped: usize,
}

impl Rendered {
    /// Pixels where the inherent radiance has zero derivative along
    /// `direction` in every band while depth does not. Border pixels, where
    /// the difference is one-sided, are not counted.
    pub fn recovery_set_size(&self, direction: Direction) -> Result<usize> {
        let field = differentiate(&self.inherent, &self.depth, direction, false)?;
        let n_bands = self.inherent.grid().n_bands();
        Ok((0..self.inherent.pixels())
            .filter(|&i| {
                field.is_interior(i)
                    && field.d_z[i] != 0.0
                    && (0..n_bands).all(|k| field.d_f_band(k)[i] == 0.0)
            })
            .count())
    }
}

/// Renders with the noise seed from the spec.
pub fn render(spec: &SceneSpec) -> Result<Rendered> {
    render_with_seed(spec, None)
}

/// Renders, replacing the spec's noise seed when `seed` is given.
pub fn render_with_seed(spec: &SceneSpec, seed: Option<u64>) -> Result<Rendered> {
    spec.validate()?;
    let grid = spec.grid.build()?;
    let illuminant = spec.illuminant.build(grid)?;
    let truth = spec.medium.build(grid)?;
    let reflectances = spec
        .materials
        .iter()
        .map(|m| m.reflectance.build(grid))
        .collect::<Result<Vec<_>>>()?;
    let region_material: Vec<usize> = spec
        .regions
        .iter()
        .map(|r| spec.materials.iter().position(|m| m.name == r.material).expect("validated"))
        .collect();
    let (w, h) = (spec.width, spec.height);
    let owner = spec.region_map();

    let z: Vec<f64> = (0..w * h)
        .map(|i| spec.regions[owner[i]].depth.at(i % w, i / w))
        .collect();
    let depth = DepthMap::new(w, h, z)?;
    let inherent = SpectralImage::from_fn(w, h, grid, ImageKind::Inherent, |i, k| {
        let region = &spec.regions[owner[i]];
        let shade = region.shading.map_or(1.0, |s| s.at(i % w, i / w));
        let r = reflectances[region_material[owner[i]]].values()[k];
        illuminant.values()[k] * r * shade
    })?;
    let clean = forward_model(&inherent, &depth, &truth)?;

    let mut patterns = Vec::with_capacity(spec.patterns.len());
    let mut verification = Vec::with_capacity(spec.patterns.len());
    for (index, ps) in spec.patterns.iter().enumerate() {
        let mut p = ps.build()?;
        let report = verify_pattern(&p, &inherent, &depth, &VerifyTolerances::exact())?;
        if !report.passed() {
            return Err(Error::PatternViolation {
                index,
                detail: report.summary(),
            });
        }
        if p.kind.needs_derivatives() {
            let d = exact_derivatives(spec, &owner, &p, &inherent, &depth, &truth)?;
            p = p.with_derivatives(d);
        }
        patterns.push(p);
        verification.push(report);
    }

    let noise = spec.noise.map(|mut n| {
        if let Some(s) = seed {
            n.seed = s;
        }
        n
    });
    let (apparent, clamped) = match noise {
        Some(n) => add_noise(&clean, n.model, n.sigma, n.seed),
        None => (clean, 0),
    };
    Ok(Rendered {
        name: spec.name.clone(),
        inherent,
        apparent,
        depth,
        truth,
        patterns,
        verification,
        noise,
        clamped,
    })
}

/// Directional derivatives of the noise-free apparent radiance at the
/// pattern pixels, from the affine depth of their regions. With `δL = 0`,
/// `δF = −c δz e^{−cz}(L − B)` and `δ²F = c² δz² e^{−cz}(L − B)`.
fn exact_derivatives(
    spec: &SceneSpec,
    owner: &[usize],
    pattern: &PatternInstance,
    inherent: &SpectralImage,
    depth: &DepthMap,
    truth: &MediumParams,
) -> Result<Vec<PixelDerivatives>> {
    let [dx, dy] = pattern.direction.unwrap_or([1.0, 0.0]);
    let dir = Direction::new(dx, dy)?;
    let n_bands = inherent.grid().n_bands();
    pattern
        .pixels
        .iter()
        .map(|p| {
            let i = p.index(spec.width, spec.height)?;
            let d = spec.regions[owner[i]].depth;
            let dz = dir.dx() * d.gx + dir.dy() * d.gy;
            let z = depth.values()[i];
            let (mut d_f, mut d2_f) = (Vec::with_capacity(n_bands), Vec::with_capacity(n_bands));
            for k in 0..n_bands {
                let (c, b) = (truth.c().values()[k], truth.b().values()[k]);
                let g = (-c * z).exp() * (inherent.get(i, k) - b);
                d_f.push(-c * dz * g);
                d2_f.push(c * c * dz * dz * g);
            }
            let second = pattern.kind.needs_second_derivatives();
            Ok(PixelDerivatives {
                d_f,
                d_z: dz,
                d2_f: second.then_some(d2_f),
                d2_z: second.then_some(0.0),
            })
        })
        .collect()
}

/// Adds seeded Gaussian noise and clamps negative results to zero.
///
/// Additive: `F + σξ`. Relative: `F(1 + σξ)`. Every pixel draws its band
/// values from its own stream of the seeded generator, so the result does
/// not depend on thread scheduling. Returns the noisy image and the number
/// of clamped values.
pub fn add_noise(image: &SpectralImage, model: NoiseModel, sigma: f64, seed: u64) -> (SpectralImage, usize) {
    if sigma == 0.0 {
        return (image.clone(), 0);
    }
    let n = image.pixels();
    let n_bands = image.grid().n_bands();
    let per_pixel: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut clamped = 0;
            let values = (0..n_bands)
                .map(|k| {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    let f = image.get(i, k);
                    let v = match model {
                        NoiseModel::Additive => f + sigma * xi,
                        NoiseModel::Relative => f * (1.0 + sigma * xi),
                    };
                    if v < 0.0 {
                        clamped += 1;
                        0.0
                    } else {
                        v
                    }
                })
                .collect();
            (values, clamped)
        })
        .collect();
    let mut cube = vec![0.0; n * n_bands];
    let mut clamped = 0;
    for (i, (values, c)) in per_pixel.into_iter().enumerate() {
        clamped += c;
        for (k, v) in values.into_iter().enumerate() {
            cube[k * n + i] = v;
        }
    }
    let noisy = image.with_cube(image.kind(), cube).expect("same shape");
    (noisy, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{invert_model, DEFAULT_MAX_OPTICAL_DEPTH};
    use std::path::Path;

    const DARK: &str = r#"
name = "dark"
width = 4
height = 3
grid = { lambda_min = 400.0, lambda_max = 700.0, n_bands = 4 }
medium = { preset = "coastal" }
materials = [{ name = "black", reflectance = 0.0 }]
regions = [{ x0 = 0, y0 = 0, x1 = 4, y1 = 3, material = "black", depth = { z0 = 1.0, gx = 0.5 } }]
"#;

    fn parse(text: &str) -> SceneSpec {
        SceneSpec::parse(text, Path::new("test.toml")).unwrap()
    }

    #[test]
    fn dark_scene_is_pure_backscatter() {
        let r = render(&parse(DARK)).unwrap();
        assert!(r.inherent.cube().iter().all(|v| *v == 0.0));
        for i in 0..r.apparent.pixels() {
            let z = r.depth.values()[i];
            for k in 0..4 {
                let (c, b) = (r.truth.c().values()[k], r.truth.b().values()[k]);
                let expected = -(-c * z).exp_m1() * b;
                assert!((r.apparent.get(i, k) - expected).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn noise_free_render_inverts_exactly() {
        for spec in builtin_scenes() {
            if spec.noise.is_some() {
                continue;
            }
            let r = render(&spec).unwrap();
            let l = invert_model(&r.apparent, &r.depth, &r.truth, DEFAULT_MAX_OPTICAL_DEPTH).unwrap();
            let scale = r.truth.b().max_abs().max(1.0);
            for (a, b) in l.cube().iter().zip(r.inherent.cube()) {
                assert!((a - b).abs() <= 1e-12 * scale.max(b.abs()), "{}: {a} vs {b}", spec.name);
            }
        }
    }

    #[test]
    fn gaps_and_overlaps_are_reported() {
        let gap = DARK.replace("x1 = 4, y1 = 3", "x1 = 3, y1 = 3");
        assert!(matches!(render(&parse(&gap)), Err(Error::CoverageGap { x: 3, y: 0 })));
        let overlap = DARK.replace(
            "regions = [",
            r#"regions = [{ x0 = 1, y0 = 1, x1 = 2, y1 = 2, material = "black", depth = { z0 = 1.0 } }, "#,
        );
        assert!(matches!(render(&parse(&overlap)), Err(Error::CoverageOverlap { x: 1, y: 1 })));
        let negative = DARK.replace("gx = 0.5", "gx = -0.5");
        assert!(matches!(render(&parse(&negative)), Err(Error::InvalidDepth(_))));
    }

    #[test]
    fn bad_reflectance_and_knots_are_rejected() {
        let bright = DARK.replace("reflectance = 0.0", "reflectance = 1.5");
        assert!(matches!(render(&parse(&bright)), Err(Error::InvalidScene(_))));
        let knots = DARK.replace(
            "reflectance = 0.0",
            "reflectance = [[400.0, 0.1], [450.0, 0.1], [500.0, 0.1], [550.0, 0.1], [600.0, 0.1], [650.0, 0.1], [700.0, 0.1]]",
        );
        assert!(matches!(render(&parse(&knots)), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let broken = DARK.replace("height = 3", "height = three");
        match SceneSpec::parse(&broken, Path::new("s.toml")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violated_pattern_is_rejected_at_render() {
        let text = format!("{DARK}\n[[patterns]]\nkind = \"dark-pair\"\npixels = [[0, 0], [0, 1]]\n");
        // Same column, so both pixels sit at the same depth.
        assert!(matches!(render(&parse(&text)), Err(Error::PatternViolation { index: 0, .. })));
    }

    #[test]
    fn noise_is_deterministic_and_scaled() {
        let spec = builtin_scene("slant-majority").unwrap();
        let clean = render(&spec).unwrap();
        let (a, _) = add_noise(&clean.apparent, NoiseModel::Relative, 1e-3, 5);
        let (b, _) = add_noise(&clean.apparent, NoiseModel::Relative, 1e-3, 5);
        assert_eq!(a, b);
        let (same, clamped) = add_noise(&clean.apparent, NoiseModel::Additive, 0.0, 5);
        assert_eq!(same, clean.apparent);
        assert_eq!(clamped, 0);
        for k in [0, 15, 30] {
            let (x, y) = (clean.apparent.band(k), a.band(k));
            let ms: f64 = x.iter().zip(y).map(|(p, q)| ((q - p) / p).powi(2)).sum::<f64>() / x.len() as f64;
            let rms = ms.sqrt();
            // 4096 samples: the RMS estimate has a standard error near 1.1%.
            assert!((rms - 1e-3).abs() < 5e-5, "band {k}: {rms}");
        }
    }

    #[test]
    fn every_builtin_renders_and_verifies() {
        let names: Vec<String> = builtin_scenes().iter().map(|s| s.name.clone()).collect();
        assert!(names.len() >= 8);
        for spec in builtin_scenes() {
            let r = render(&spec).unwrap_or_else(|e| panic!("{}: {e}", spec.name));
            assert!(r.verification.iter().all(|v| v.passed()));
        }
    }
}
