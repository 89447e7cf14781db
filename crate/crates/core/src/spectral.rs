//! Wavelength grids, sampled spectra and trapezoidal quadrature.
//!
//! Every spectrum carries the grid it was sampled on. Operations that mix
//! spectra require identical grids and fail with [`Error::GridMismatch`]
//! otherwise; there is no implicit resampling.

use crate::error::{Error, Result};

/// Lower edge of the visible interval, in nm.
pub const VISIBLE_MIN_NM: f64 = 400.0;
/// Upper edge of the visible interval, in nm.
pub const VISIBLE_MAX_NM: f64 = 700.0;
/// Default band count (10 nm spacing over the visible interval).
pub const DEFAULT_BANDS: usize = 31;

/// Uniform wavelength grid with band centers at both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    lambda_min: f64,
    lambda_max: f64,
    n_bands: usize,
}

impl SpectralGrid {
    pub fn new(lambda_min: f64, lambda_max: f64, n_bands: usize) -> Result<Self> {
        let valid = lambda_min.is_finite()
            && lambda_max.is_finite()
            && lambda_min < lambda_max
            && n_bands >= 2;
        if !valid {
            return Err(Error::InvalidRange {
                lambda_min,
                lambda_max,
                n_bands,
            });
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            n_bands,
        })
    }

    /// 400–700 nm in 31 bands.
    pub fn visible() -> Self {
        Self {
            lambda_min: VISIBLE_MIN_NM,
            lambda_max: VISIBLE_MAX_NM,
            n_bands: DEFAULT_BANDS,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// Distance between neighbouring band centers.
    pub fn spacing(&self) -> f64 {
        (self.lambda_max - self.lambda_min) / (self.n_bands - 1) as f64
    }

    /// Center wavelength of band `k`.
    pub fn wavelength(&self, k: usize) -> f64 {
        if k + 1 == self.n_bands {
            return self.lambda_max;
        }
        self.lambda_min + k as f64 * self.spacing()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.n_bands).map(|k| self.wavelength(k)).collect()
    }

    /// Trapezoid weights: `h/2` at the endpoints, `h` in between.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_bands];
        w[0] = 0.5 * h;
        w[self.n_bands - 1] = 0.5 * h;
        w
    }

    pub(crate) fn ensure_same(&self, other: &SpectralGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self::visible()
    }
}

/// A real function of wavelength sampled on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_bands() {
            return Err(Error::LengthMismatch {
                expected: grid.n_bands(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SpectralGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_bands()],
        }
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every band center.
    pub fn from_fn(grid: SpectralGrid, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.wavelengths().into_iter().map(f).collect())
    }

    /// Linear interpolation through `(wavelength, value)` knots, held
    /// constant beyond the first and last knot. Knots must be strictly
    /// increasing in wavelength.
    pub fn piecewise_linear(grid: SpectralGrid, knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidScene("piecewise-linear spectrum needs at least one knot".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidScene("knot wavelengths must be strictly increasing".into()));
        }
        Self::from_fn(grid, |lambda| interpolate(knots, lambda))
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L² norm under the trapezoid inner product.
    pub fn norm(&self) -> f64 {
        inner_product(self, self)
            .expect("a spectrum shares its own grid")
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Spectrum {
        Spectrum {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Spectrum) -> Result<Spectrum> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Spectrum {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Spectrum) -> Result<Spectrum> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Spectrum {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

fn interpolate(knots: &[(f64, f64)], lambda: f64) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if lambda <= first.0 {
        return first.1;
    }
    if lambda >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= lambda);
    let (a, b) = (knots[i - 1], knots[i]);
    let t = (lambda - a.0) / (b.0 - a.0);
    a.1 + t * (b.1 - a.1)
}

/// Trapezoidal approximation of `∫ f g dλ` over the grid interval.
///
/// The summand is `w_k * (f_k * g_k)`; since floating-point multiplication
/// commutes, swapping the arguments gives a bitwise-identical result.
pub fn inner_product(f: &Spectrum, g: &Spectrum) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    Ok(weighted_dot(&f.grid.weights(), &f.values, &g.values))
}

pub(crate) fn weighted_dot(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * (a * b))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent trapezoid: sum of segment areas of the sampled integrand.
    fn trapezoid_segments(grid: &SpectralGrid, h: impl Fn(f64) -> f64) -> f64 {
        let xs = grid.wavelengths();
        xs.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (h(w[0]) + h(w[1])))
            .sum()
    }

    #[test]
    fn grid_centers_are_uniform_and_inclusive() {
        let g = SpectralGrid::new(400.0, 700.0, 31).unwrap();
        let centers = g.wavelengths();
        assert_eq!(centers.len(), 31);
        for (k, c) in centers.iter().enumerate() {
            assert!((c - (400.0 + 10.0 * k as f64)).abs() < 1e-12);
        }
        assert_eq!(centers[30], 700.0);

        let two = SpectralGrid::new(400.0, 700.0, 2).unwrap();
        assert_eq!(two.wavelengths(), vec![400.0, 700.0]);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(matches!(
            SpectralGrid::new(700.0, 400.0, 31),
            Err(Error::InvalidRange { .. })
        ));
        assert!(SpectralGrid::new(400.0, 400.0, 31).is_err());
        assert!(SpectralGrid::new(400.0, 700.0, 1).is_err());
        assert!(SpectralGrid::new(f64::NAN, 700.0, 5).is_err());
    }

    #[test]
    fn spectrum_validates_length_and_finiteness() {
        let g = SpectralGrid::visible();
        assert!(matches!(
            Spectrum::new(g, vec![0.0; 30]),
            Err(Error::LengthMismatch { expected: 31, got: 30 })
        ));
        let mut v = vec![0.0; 31];
        v[4] = f64::INFINITY;
        assert!(matches!(Spectrum::new(g, v), Err(Error::NonFinite { index: 4 })));
    }

    #[test]
    fn inner_product_of_ones_is_interval_length() {
        let g = SpectralGrid::visible();
        let one = Spectrum::constant(g, 1.0);
        assert!((inner_product(&one, &one).unwrap() - 300.0).abs() < 1e-12);
    }

    #[test]
    fn zero_annihilates() {
        let g = SpectralGrid::visible();
        let z = Spectrum::zeros(g);
        let f = Spectrum::from_fn(g, |l| (l / 37.0).sin()).unwrap();
        assert_eq!(inner_product(&z, &f).unwrap(), 0.0);
    }

    #[test]
    fn ramp_squared_matches_segment_trapezoid() {
        let g = SpectralGrid::visible();
        let ramp = Spectrum::from_fn(g, |l| (l - 400.0) / 300.0).unwrap();
        let oracle = trapezoid_segments(&g, |l| ((l - 400.0) / 300.0).powi(2));
        let got = inner_product(&ramp, &ramp).unwrap();
        assert!((got - oracle).abs() < 1e-12 * oracle);
        // Trapezoid error for x² over [0,1] scaled by 300: 300·h²/6 with h = 1/30.
        let bound = 300.0 * (1.0 / 30.0_f64).powi(2) / 6.0;
        assert!((got - 100.0).abs() <= bound * (1.0 + 1e-9));
        assert!(got > 100.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = Spectrum::constant(SpectralGrid::visible(), 1.0);
        let b = Spectrum::constant(SpectralGrid::new(400.0, 700.0, 16).unwrap(), 1.0);
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn refinement_reduces_error_on_polynomials() {
        let exact = 300.0 / 4.0; // ∫ x³ over [0,1], scaled by 300
        let mut last = f64::INFINITY;
        for n in [4usize, 7, 13, 25, 49, 97] {
            let g = SpectralGrid::new(400.0, 700.0, n).unwrap();
            let f = Spectrum::from_fn(g, |l| (l - 400.0) / 300.0).unwrap();
            let f2 = Spectrum::from_fn(g, |l| ((l - 400.0) / 300.0).powi(2)).unwrap();
            let err = (inner_product(&f, &f2).unwrap() - exact).abs();
            assert!(err < last, "n={n}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn piecewise_linear_interpolates_and_clamps() {
        let g = SpectralGrid::visible();
        let s = Spectrum::piecewise_linear(g, &[(450.0, 0.2), (550.0, 0.6)]).unwrap();
        assert_eq!(s.values()[0], 0.2);
        assert!((s.values()[10] - 0.4).abs() < 1e-15);
        assert_eq!(s.values()[30], 0.6);
        assert!(Spectrum::piecewise_linear(g, &[(500.0, 0.1), (500.0, 0.2)]).is_err());
    }

    fn arb_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0_f64, 31)
    }

    proptest! {
        #[test]
        fn inner_product_is_exactly_symmetric(a in arb_values(), b in arb_values()) {
            let g = SpectralGrid::visible();
            let f = Spectrum::new(g, a).unwrap();
            let h = Spectrum::new(g, b).unwrap();
            prop_assert_eq!(inner_product(&f, &h).unwrap(), inner_product(&h, &f).unwrap());
        }

        #[test]
        fn inner_product_is_linear(
            a in arb_values(), b in arb_values(), c in arb_values(),
            s in -5.0..5.0_f64, t in -5.0..5.0_f64,
        ) {
            let g = SpectralGrid::visible();
            let f = Spectrum::new(g, a).unwrap();
            let h = Spectrum::new(g, b).unwrap();
            let k = Spectrum::new(g, c).unwrap();
            let combo = f.scaled(s).add_scaled(t, &h).unwrap();
            let lhs = inner_product(&combo, &k).unwrap();
            let rhs = s * inner_product(&f, &k).unwrap() + t * inner_product(&h, &k).unwrap();
            // relative to the magnitude of the summands, not the possibly-cancelling result
            let scale = (s.abs() * f.norm() + t.abs() * h.norm()) * k.norm() + 1e-300;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}
