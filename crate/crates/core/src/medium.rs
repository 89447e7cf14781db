//! Single-scatter image formation in an attenuating medium.
//!
//! Per pixel `i` and band: `F = e^{-c z_i} L + (1 - e^{-c z_i}) B`, with
//! beam attenuation `c > 0` and backscatter at infinity `B ≥ 0` constant
//! across the image. Bands never interact, so every operation here works
//! band by band and parallelises over bands.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{SpectralGrid, Spectrum};

/// Default `c·z` above which inversion refuses to amplify by `e^{cz}`.
pub const DEFAULT_MAX_OPTICAL_DEPTH: f64 = 30.0;

/// Attenuation `c(λ)` [1/m] and backscatter at infinity `B(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumParams {
    c: Spectrum,
    b: Spectrum,
}

impl MediumParams {
    pub fn new(c: Spectrum, b: Spectrum) -> Result<Self> {
        c.grid().ensure_same(b.grid())?;
        if let Some(k) = c.values().iter().position(|v| *v <= 0.0) {
            return Err(Error::InvalidMedium(format!(
                "attenuation must be positive, band {k} has {}",
                c.values()[k]
            )));
        }
        if let Some(k) = b.values().iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidMedium(format!(
                "backscatter must be non-negative, band {k} has {}",
                b.values()[k]
            )));
        }
        Ok(Self { c, b })
    }

    /// Same `c` and `B` at every band.
    pub fn uniform(grid: SpectralGrid, c: f64, b: f64) -> Result<Self> {
        Self::new(Spectrum::constant(grid, c), Spectrum::constant(grid, b))
    }

    /// Named test-fixture media: `clear`, `coastal`, `turbid`.
    ///
    /// Attenuation rises toward the red, backscatter rises toward the blue.
    /// The magnitudes are plausible for water but are fixtures, not
    /// measurements.
    pub fn preset(name: &str, grid: SpectralGrid) -> Result<Self> {
        let (c_knots, b_knots): (&[(f64, f64)], &[(f64, f64)]) = match name {
            "clear" => (
                &[(400.0, 0.08), (500.0, 0.05), (600.0, 0.12), (700.0, 0.2)],
                &[(400.0, 0.35), (700.0, 0.05)],
            ),
            "coastal" => (
                &[(400.0, 0.45), (500.0, 0.2), (600.0, 0.5), (700.0, 1.0)],
                &[(400.0, 0.6), (700.0, 0.15)],
            ),
            "turbid" => (
                &[(400.0, 1.6), (500.0, 1.0), (600.0, 1.8), (700.0, 3.0)],
                &[(400.0, 0.9), (700.0, 0.3)],
            ),
            other => {
                return Err(Error::InvalidMedium(format!("unknown medium preset '{other}'")))
            }
        };
        Self::new(
            Spectrum::piecewise_linear(grid, c_knots)?,
            Spectrum::piecewise_linear(grid, b_knots)?,
        )
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.c.grid()
    }

    pub fn c(&self) -> &Spectrum {
        &self.c
    }

    pub fn b(&self) -> &Spectrum {
        &self.b
    }

    /// Instantaneous radiance gain `Q⁺ = c·B`.
    pub fn q_plus(&self) -> Spectrum {
        self.c.mul(&self.b).expect("c and B share a grid")
    }
}

/// Per-pixel distance to the scene point, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    z: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, z: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDepth("dimensions must be positive".into()));
        }
        if z.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: z.len(),
            });
        }
        if let Some(i) = z.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidDepth(format!(
                "depth at pixel ({}, {}) is {}, must be positive and finite",
                i % width,
                i / width,
                z[i]
            )));
        }
        Ok(Self { width, height, z })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.z[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    /// Radiance leaving the scene, before the medium.
    Inherent,
    /// Radiance reaching the camera.
    Apparent,
}

impl ImageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageKind::Inherent => "inherent",
            ImageKind::Apparent => "apparent",
        }
    }
}

/// A spectral cube stored band-sequentially: band `k` occupies
/// `cube[k * width * height..][..width * height]`, pixels row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralImage {
    width: usize,
    height: usize,
    grid: SpectralGrid,
    kind: ImageKind,
    cube: Vec<f64>,
}

impl SpectralImage {
    pub fn new(
        width: usize,
        height: usize,
        grid: SpectralGrid,
        kind: ImageKind,
        cube: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch("image dimensions must be positive".into()));
        }
        let expected = width * height * grid.n_bands();
        if cube.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: cube.len(),
            });
        }
        if let Some(index) = cube.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            grid,
            kind,
            cube,
        })
    }

    /// Builds a cube by evaluating `f(pixel, band)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        grid: SpectralGrid,
        kind: ImageKind,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = width * height;
        let cube = (0..grid.n_bands())
            .flat_map(|k| (0..n).map(move |i| (i, k)))
            .map(|(i, k)| f(i, k))
            .collect();
        Self::new(width, height, grid, kind, cube)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn kind(&self) -> ImageKind {
        self.kind
    }

    pub fn cube(&self) -> &[f64] {
        &self.cube
    }

    pub fn band(&self, k: usize) -> &[f64] {
        let n = self.pixels();
        &self.cube[k * n..(k + 1) * n]
    }

    pub fn get(&self, pixel: usize, band: usize) -> f64 {
        self.cube[band * self.pixels() + pixel]
    }

    pub fn pixel_spectrum(&self, pixel: usize) -> Spectrum {
        let values = (0..self.grid.n_bands()).map(|k| self.get(pixel, k)).collect();
        Spectrum::new(self.grid, values).expect("cube values are finite")
    }

    pub(crate) fn with_cube(&self, kind: ImageKind, cube: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, self.grid, kind, cube)
    }

    fn check_compatible(&self, depth: &DepthMap, medium: &MediumParams) -> Result<()> {
        if self.width != depth.width() || self.height != depth.height() {
            return Err(Error::ShapeMismatch(format!(
                "image is {}x{} but depth map is {}x{}",
                self.width,
                self.height,
                depth.width(),
                depth.height()
            )));
        }
        if self.grid != *medium.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Renders apparent radiance from inherent radiance, depth and medium.
pub fn forward_model(
    inherent: &SpectralImage,
    depth: &DepthMap,
    medium: &MediumParams,
) -> Result<SpectralImage> {
    inherent.check_compatible(depth, medium)?;
    let n = inherent.pixels();
    let mut cube = vec![0.0; inherent.cube.len()];
    cube.par_chunks_mut(n).enumerate().for_each(|(k, out)| {
        let (c, b) = (medium.c.values()[k], medium.b.values()[k]);
        let l = inherent.band(k);
        for ((o, &li), &z) in out.iter_mut().zip(l).zip(depth.values()) {
            *o = apparent(li, z, c, b);
        }
    });
    inherent.with_cube(ImageKind::Apparent, cube)
}

/// Scalar form of the forward model.
pub fn apparent(l: f64, z: f64, c: f64, b: f64) -> f64 {
    let t = (-c * z).exp();
    t * l + (-(-c * z).exp_m1()) * b
}

/// Scalar inverse: `L = B + e^{cz}(F - B)`.
pub fn inherent(f: f64, z: f64, c: f64, b: f64) -> f64 {
    b + (c * z).exp() * (f - b)
}

/// A pixel-band whose optical depth exceeded the inversion guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardHit {
    pub pixel: usize,
    pub band: usize,
    pub cz: f64,
}

/// Exact algebraic inverse of [`forward_model`] for a known medium.
///
/// Fails with [`Error::OverflowGuard`] at the first pixel-band (lowest band,
/// then lowest pixel) whose `c·z` exceeds `max_cz`.
pub fn invert_model(
    apparent: &SpectralImage,
    depth: &DepthMap,
    medium: &MediumParams,
    max_cz: f64,
) -> Result<SpectralImage> {
    let (image, hits) = invert_model_reporting(apparent, depth, medium, max_cz)?;
    match hits.first() {
        Some(hit) => Err(Error::OverflowGuard {
            pixel: hit.pixel,
            band: hit.band,
            cz: hit.cz,
            bound: max_cz,
        }),
        None => Ok(image),
    }
}

/// Like [`invert_model`] but returns the inverse together with every
/// pixel-band that exceeded the guard instead of failing on the first one.
///
/// Guarded entries still hold the exact algebraic inverse; callers decide
/// whether the amplified values are acceptable. An inverse that overflows
/// `f64` always fails with [`Error::OverflowGuard`].
pub fn invert_model_reporting(
    apparent: &SpectralImage,
    depth: &DepthMap,
    medium: &MediumParams,
    max_cz: f64,
) -> Result<(SpectralImage, Vec<GuardHit>)> {
    apparent.check_compatible(depth, medium)?;
    let n = apparent.pixels();
    let mut cube = vec![0.0; apparent.cube.len()];
    let hits: Vec<GuardHit> = cube
        .par_chunks_mut(n)
        .enumerate()
        .flat_map_iter(|(k, out)| {
            let (c, b) = (medium.c.values()[k], medium.b.values()[k]);
            let f = apparent.band(k);
            let mut hits = Vec::new();
            for (i, (o, (&fi, &z))) in out.iter_mut().zip(f.iter().zip(depth.values())).enumerate() {
                let cz = c * z;
                if cz > max_cz {
                    hits.push(GuardHit { pixel: i, band: k, cz });
                }
                *o = inherent(fi, z, c, b);
            }
            hits
        })
        .collect();
    if let Some(j) = cube.iter().position(|v| !v.is_finite()) {
        let (band, pixel) = (j / n, j % n);
        return Err(Error::OverflowGuard {
            pixel,
            band,
            cz: medium.c.values()[band] * depth.values()[pixel],
            bound: max_cz,
        });
    }
    let image = apparent.with_cube(ImageKind::Inherent, cube)?;
    Ok((image, hits))
}

/// Integrates `dQ/dz = Q⁺ - cQ` from `0` to `z` with classical RK4.
///
/// # Panics
///
/// If `c <= 0`, `z <= 0` or `steps == 0`.
pub fn rte_integrate(q0: f64, q_plus: f64, c: f64, z: f64, steps: usize) -> f64 {
    assert!(c > 0.0 && z > 0.0 && steps >= 1, "rte_integrate needs c > 0, z > 0, steps >= 1");
    let h = z / steps as f64;
    let rhs = |q: f64| q_plus - c * q;
    let mut q = q0;
    for _ in 0..steps {
        let k1 = rhs(q);
        let k2 = rhs(q + 0.5 * h * k1);
        let k3 = rhs(q + 0.5 * h * k2);
        let k4 = rhs(q + h * k3);
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    q
}

/// Closed-form solution of the same equation with constant gain.
pub fn rte_closed_form(q0: f64, q_plus: f64, c: f64, z: f64) -> f64 {
    apparent(q0, z, c, q_plus / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn single(grid: SpectralGrid, v: f64, kind: ImageKind) -> SpectralImage {
        SpectralImage::new(1, 1, grid, kind, vec![v; grid.n_bands()]).unwrap()
    }

    fn grid2() -> SpectralGrid {
        SpectralGrid::new(400.0, 700.0, 2).unwrap()
    }

    #[test]
    fn medium_rejects_vacuum_and_negative_backscatter() {
        let g = grid2();
        assert!(MediumParams::uniform(g, 0.0, 1.0).is_err());
        assert!(MediumParams::uniform(g, 1.0, -0.1).is_err());
        assert!(MediumParams::uniform(g, 1.0, 0.0).is_ok());
        for name in ["clear", "coastal", "turbid"] {
            let m = MediumParams::preset(name, SpectralGrid::visible()).unwrap();
            assert!(m.b().values()[0] > m.b().values()[30]);
        }
        assert!(MediumParams::preset("swamp", g).is_err());
    }

    #[test]
    fn depth_must_be_positive() {
        assert!(DepthMap::new(2, 1, vec![1.0, 0.0]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, f64::NAN]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn backscatter_is_a_fixed_point() {
        let g = grid2();
        let m = MediumParams::uniform(g, 0.7, 0.4).unwrap();
        let l = single(g, 0.4, ImageKind::Inherent);
        for z in [0.1, 1.0, 10.0, 50.0] {
            let d = DepthMap::new(1, 1, vec![z]).unwrap();
            let f = forward_model(&l, &d, &m).unwrap();
            assert!(f.cube().iter().all(|v| (v - 0.4).abs() < 1e-15));
            assert_eq!(f.kind(), ImageKind::Apparent);
            let back = invert_model(&f, &d, &m, 40.0).unwrap();
            assert!(back.cube().iter().all(|v| (v - 0.4).abs() < 1e-12));
        }
    }

    #[test]
    fn vanishing_depth_leaves_radiance_unchanged() {
        let g = grid2();
        let m = MediumParams::uniform(g, 2.0, 0.9).unwrap();
        let l = single(g, 0.3, ImageKind::Inherent);
        let d = DepthMap::new(1, 1, vec![1e-12]).unwrap();
        let f = forward_model(&l, &d, &m).unwrap();
        assert!(f.cube().iter().all(|v| ((v - 0.3) / 0.3).abs() < 1e-9));
    }

    #[test]
    fn half_transmission_example() {
        let g = grid2();
        let m = MediumParams::uniform(g, LN_2, 0.5).unwrap();
        let d = DepthMap::new(1, 1, vec![1.0]).unwrap();
        let f = forward_model(&single(g, 1.0, ImageKind::Inherent), &d, &m).unwrap();
        assert!(f.cube().iter().all(|v| (v - 0.75).abs() < 1e-15));
        let l = invert_model(&single(g, 0.75, ImageKind::Apparent), &d, &m, 30.0).unwrap();
        assert!(l.cube().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(l.kind(), ImageKind::Inherent);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = grid2();
        let m = MediumParams::uniform(g, 1.0, 0.5).unwrap();
        let d = DepthMap::new(2, 1, vec![1.0, 1.0]).unwrap();
        let l = single(g, 1.0, ImageKind::Inherent);
        assert!(matches!(forward_model(&l, &d, &m), Err(Error::ShapeMismatch(_))));
        let other = MediumParams::uniform(SpectralGrid::visible(), 1.0, 0.5).unwrap();
        let d1 = DepthMap::new(1, 1, vec![1.0]).unwrap();
        assert!(matches!(forward_model(&l, &d1, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn overflow_guard_trips_and_reports() {
        let g = grid2();
        let m = MediumParams::uniform(g, 4.0, 0.5).unwrap();
        let d = DepthMap::new(2, 1, vec![1.0, 10.0]).unwrap();
        let f = SpectralImage::new(2, 1, g, ImageKind::Apparent, vec![0.5; 4]).unwrap();
        match invert_model(&f, &d, &m, 30.0) {
            Err(Error::OverflowGuard { pixel: 1, band: 0, cz, .. }) => assert_eq!(cz, 40.0),
            other => panic!("expected overflow guard, got {other:?}"),
        }
        let (_, hits) = invert_model_reporting(&f, &d, &m, 30.0).unwrap();
        assert_eq!(hits.len(), 2);
        // Past f64 range even an unbounded guard fails.
        let murky = MediumParams::uniform(g, 100.0, 0.2).unwrap();
        match invert_model_reporting(&f, &d, &murky, f64::INFINITY) {
            Err(Error::OverflowGuard { pixel: 1, band: 0, .. }) => {}
            other => panic!("expected overflow guard, got {other:?}"),
        }
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = SpectralGrid::new(400.0, 700.0, 8).unwrap();
        let (w, h) = (7, 5);
        for _ in 0..20 {
            let c = Spectrum::from_fn(g, |_| rng.random_range(0.05..1.0)).unwrap();
            let b = Spectrum::from_fn(g, |_| rng.random_range(0.0..1.0)).unwrap();
            let m = MediumParams::new(c, b).unwrap();
            let z: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.5..5.0)).collect();
            let d = DepthMap::new(w, h, z).unwrap();
            let cube: Vec<f64> = (0..w * h * 8).map(|_| rng.random_range(0.0..1.0)).collect();
            let l = SpectralImage::new(w, h, g, ImageKind::Inherent, cube).unwrap();
            let f = forward_model(&l, &d, &m).unwrap();
            let back = invert_model(&f, &d, &m, 30.0).unwrap();
            for k in 0..8 {
                let scale = m.b().values()[k].max(1e-3);
                for (a, b) in back.band(k).iter().zip(l.band(k)) {
                    let rel = (a - b).abs() / b.abs().max(scale);
                    assert!(rel < 1e-12, "rel error {rel}");
                }
            }
        }
    }

    #[test]
    fn rte_pure_decay_and_equilibrium() {
        let q = rte_integrate(1.0, 0.0, 1.0, 1.0, 1000);
        assert!((q - (-1.0_f64).exp()).abs() < 1e-10);
        for z in [0.3, 2.0, 9.0] {
            let q = rte_integrate(0.8, 0.4, 0.5, z, 50);
            assert!((q - 0.8).abs() < 1e-14);
        }
    }

    #[test]
    fn rte_converges_at_fourth_order() {
        let (q0, qp, c, z) = (1.0, 0.3, 1.5, 4.0);
        let exact = rte_closed_form(q0, qp, c, z);
        let e1 = (rte_integrate(q0, qp, c, z, 40) - exact).abs();
        let e2 = (rte_integrate(q0, qp, c, z, 80) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn apparent_is_convex_combination(
            l in 0.0..5.0_f64, b in 0.0..5.0_f64, c in 0.01..5.0_f64, z in 0.01..20.0_f64,
        ) {
            let f = apparent(l, z, c, b);
            let tol = 1e-12 * (l.abs() + b.abs() + 1.0);
            prop_assert!(f >= l.min(b) - tol && f <= l.max(b) + tol);
        }

        #[test]
        fn haze_is_monotone_in_depth(
            l in 0.0..5.0_f64, gap in 0.01..5.0_f64, c in 0.05..3.0_f64,
            z in 0.1..5.0_f64, dz in 0.01..2.0_f64,
        ) {
            let b = l + gap;
            prop_assert!(apparent(l, z + dz, c, b) > apparent(l, z, c, b));
            prop_assert!(apparent(b, z + dz, c, l) < apparent(b, z, c, l));
        }

        #[test]
        fn any_medium_explains_the_observation(
            f in 0.0..2.0_f64, z in 0.2..5.0_f64,
            c2 in 0.05..2.0_f64, b2 in 0.0..2.0_f64,
        ) {
            let l2 = inherent(f, z, c2, b2);
            let again = apparent(l2, z, c2, b2);
            prop_assert!((again - f).abs() <= 1e-12 * f.abs().max(b2).max(1e-3));
        }

        #[test]
        fn rte_matches_closed_form(
            q0 in 0.0..3.0_f64, qp in 0.0..3.0_f64, c in 0.01..2.0_f64, z in 0.1..5.0_f64,
        ) {
            prop_assume!(c * z <= 10.0);
            let exact = rte_closed_form(q0, qp, c, z);
            let got = rte_integrate(q0, qp, c, z, 10_000);
            prop_assert!((got - exact).abs() <= 1e-6 * exact.abs().max(1e-12));
        }
    }
}
