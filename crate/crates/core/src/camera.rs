//! Camera projection of spectra onto channel intensities.
//!
//! A camera with sensitivities `S_j` maps a spectrum `F` to intensities
//! `P_j = ∫ F S_j dλ`. Only the component of `F` in `span{S_j}` survives;
//! anything in the orthogonal complement is invisible. [`CameraModel`]
//! exposes the forward projection, the Gram-system solve that recovers the
//! best in-span approximation, the residual that the camera cannot see, and
//! a generator for nonzero invisible perturbations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{weighted_dot, SpectralGrid, Spectrum};

/// Default ceiling on the Gram condition number before solves are refused.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e10;

/// Condition numbers above this are treated as exact rank deficiency.
const SINGULAR_CONDITION: f64 = 1e13;

/// Relative norm below which a residual counts as zero.
const TRIVIAL_RESIDUAL: f64 = 1e-8;

/// Channel intensities `P_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelIntensities(pub Vec<f64>);

/// Coefficients `F_k` of the in-span approximation `Σ F_k S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCoefficients(pub Vec<f64>);

impl PixelIntensities {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl ProjectionCoefficients {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct CameraModel {
    grid: SpectralGrid,
    sensitivities: Vec<Spectrum>,
    gram: DMatrix<f64>,
    condition: f64,
    condition_bound: f64,
}

impl CameraModel {
    /// Builds a camera from per-channel sensitivities sharing one grid.
    ///
    /// Linear dependence is not rejected here; it is recorded in the
    /// condition number and reported by the solves that need the inverse.
    pub fn new(sensitivities: Vec<Spectrum>) -> Result<Self> {
        let first = sensitivities
            .first()
            .ok_or_else(|| Error::InvalidCamera("camera needs at least one channel".into()))?;
        let grid = *first.grid();
        for (j, s) in sensitivities.iter().enumerate() {
            grid.ensure_same(s.grid())?;
            if let Some(k) = s.values().iter().position(|v| *v < 0.0) {
                return Err(Error::InvalidCamera(format!(
                    "channel {j} has negative sensitivity at band {k}"
                )));
            }
        }
        let n = sensitivities.len();
        let weights = grid.weights();
        let mut gram = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in j..n {
                let v = weighted_dot(&weights, sensitivities[j].values(), sensitivities[k].values());
                gram[(j, k)] = v;
                gram[(k, j)] = v;
            }
        }
        let condition = condition_number(&gram);
        Ok(Self {
            grid,
            sensitivities,
            gram,
            condition,
            condition_bound: DEFAULT_CONDITION_BOUND,
        })
    }

    pub fn with_condition_bound(mut self, bound: f64) -> Self {
        self.condition_bound = bound;
        self
    }

    /// One unit boxcar per band: the camera sees every sampled wavelength,
    /// so the orthogonal complement of its sensitivities is `{0}` on this
    /// grid.
    pub fn identity(grid: SpectralGrid) -> Self {
        let n = grid.n_bands();
        let sens = (0..n)
            .map(|j| {
                let mut v = vec![0.0; n];
                v[j] = 1.0;
                Spectrum::new(grid, v).expect("finite unit vector")
            })
            .collect();
        Self::new(sens).expect("identity sensitivities are valid")
    }

    /// Three Gaussian channels peaking at 610, 540 and 460 nm.
    pub fn gaussian_rgb(grid: SpectralGrid) -> Self {
        let channel = |center: f64, width: f64| {
            Spectrum::from_fn(grid, |l| (-0.5 * ((l - center) / width).powi(2)).exp())
                .expect("finite gaussian")
        };
        Self::new(vec![
            channel(610.0, 35.0),
            channel(540.0, 35.0),
            channel(460.0, 30.0),
        ])
        .expect("gaussian sensitivities are valid")
    }

    /// Unit boxcars over half-open wavelength intervals `[lo, hi)`. An
    /// interval ending at the grid maximum includes it.
    pub fn boxcars(grid: SpectralGrid, intervals: &[(f64, f64)]) -> Result<Self> {
        let lambdas = grid.wavelengths();
        let sens = intervals
            .iter()
            .map(|&(lo, hi)| {
                let v = lambdas
                    .iter()
                    .map(|&l| {
                        let inside = l >= lo && (l < hi || (hi >= grid.lambda_max() && l <= hi));
                        if inside { 1.0 } else { 0.0 }
                    })
                    .collect();
                Spectrum::new(grid, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sens)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.sensitivities.len()
    }

    pub fn sensitivities(&self) -> &[Spectrum] {
        &self.sensitivities
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `P_j = ∫ F S_j dλ` for every channel.
    pub fn project(&self, f: &Spectrum) -> Result<PixelIntensities> {
        self.grid.ensure_same(f.grid())?;
        let weights = self.grid.weights();
        Ok(PixelIntensities(
            self.sensitivities
                .iter()
                .map(|s| weighted_dot(&weights, f.values(), s.values()))
                .collect(),
        ))
    }

    /// Solves `P = Gram · F_k` for the coefficients of the best L²
    /// approximation in the span of the sensitivities.
    pub fn best_approx(&self, p: &PixelIntensities) -> Result<ProjectionCoefficients> {
        if p.0.len() != self.channels() {
            return Err(Error::LengthMismatch {
                expected: self.channels(),
                got: p.0.len(),
            });
        }
        self.check_conditioning()?;
        let rhs = DVector::from_column_slice(&p.0);
        let sol = self
            .gram
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularGram {
                condition: self.condition,
            })?;
        Ok(ProjectionCoefficients(sol.iter().copied().collect()))
    }

    /// `Σ F_k S_k`.
    pub fn reconstruct(&self, coeffs: &ProjectionCoefficients) -> Result<Spectrum> {
        if coeffs.0.len() != self.channels() {
            return Err(Error::LengthMismatch {
                expected: self.channels(),
                got: coeffs.0.len(),
            });
        }
        let mut acc = vec![0.0; self.grid.n_bands()];
        for (a, s) in coeffs.0.iter().zip(&self.sensitivities) {
            for (o, v) in acc.iter_mut().zip(s.values()) {
                *o += a * v;
            }
        }
        Spectrum::new(self.grid, acc)
    }

    /// The part of `f` orthogonal to every sensitivity, `F⊥ = F − Σ F_k S_k`.
    ///
    /// The subtraction is applied twice; the second pass removes the
    /// round-off left in span by the first.
    pub fn residual(&self, f: &Spectrum) -> Result<Spectrum> {
        let mut r = f.clone();
        for _ in 0..2 {
            let coeffs = self.best_approx(&self.project(&r)?)?;
            let in_span = self.reconstruct(&coeffs)?;
            r = r.add_scaled(-1.0, &in_span)?;
        }
        Ok(r)
    }

    /// A unit-norm spectrum the camera cannot see, built by removing the
    /// in-span part of a seeded random spectrum.
    pub fn null_perturbation(&self, seed: u64) -> Result<Spectrum> {
        if self.grid.n_bands() <= self.channels() {
            // A random draw would still be tested below, but with at least
            // as many independent channels as bands the complement is {0}.
            self.check_conditioning()?;
            return Err(Error::TrivialComplement);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw: Vec<f64> = (0..self.grid.n_bands())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = Spectrum::new(self.grid, draw)?;
        let r = self.residual(&f)?;
        let norm = r.norm();
        if norm <= TRIVIAL_RESIDUAL * f.norm() {
            return Err(Error::TrivialComplement);
        }
        let unit = r.scaled(1.0 / norm);
        // One more sweep after normalisation keeps |P_j| at round-off level.
        self.residual(&unit)
    }

    fn check_conditioning(&self) -> Result<()> {
        if !(self.condition < SINGULAR_CONDITION) {
            return Err(Error::SingularGram {
                condition: self.condition,
            });
        }
        if self.condition > self.condition_bound {
            return Err(Error::IllConditionedGram {
                condition: self.condition,
                bound: self.condition_bound,
            });
        }
        Ok(())
    }
}

fn condition_number(gram: &DMatrix<f64>) -> f64 {
    let sv = gram.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |m, v| m.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::inner_product;

    fn three_boxcars() -> CameraModel {
        CameraModel::boxcars(
            SpectralGrid::visible(),
            &[(400.0, 500.0), (500.0, 600.0), (600.0, 700.0)],
        )
        .unwrap()
    }

    /// Orthonormal channels: scaled unit boxcars on a subset of bands.
    fn orthonormal(grid: SpectralGrid, bands: &[usize]) -> CameraModel {
        let w = grid.weights();
        let sens = bands
            .iter()
            .map(|&k| {
                let mut v = vec![0.0; grid.n_bands()];
                v[k] = 1.0 / w[k].sqrt();
                Spectrum::new(grid, v).unwrap()
            })
            .collect();
        CameraModel::new(sens).unwrap()
    }

    fn segment_trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
        (1..xs.len())
            .map(|i| 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]))
            .sum()
    }

    #[test]
    fn zero_spectrum_projects_to_zero() {
        let cam = CameraModel::gaussian_rgb(SpectralGrid::visible());
        let p = cam.project(&Spectrum::zeros(SpectralGrid::visible())).unwrap();
        assert!(p.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn boxcar_projection_matches_segment_oracle() {
        let cam = three_boxcars();
        let grid = SpectralGrid::visible();
        let one = Spectrum::constant(grid, 1.0);
        let p = cam.project(&one).unwrap();
        let xs = grid.wavelengths();
        for (j, s) in cam.sensitivities().iter().enumerate() {
            let oracle = segment_trapezoid(&xs, s.values());
            assert!((p.values()[j] - oracle).abs() < 1e-12);
        }
        // Steps fall between samples: the trapezoid rule ramps across the
        // 10 nm gap, so the grid endpoints lose half a bin and the last
        // channel (closed at 700 nm) gains one.
        assert!((p.values()[0] - 95.0).abs() < 1e-12);
        assert!((p.values()[1] - 100.0).abs() < 1e-12);
        assert!((p.values()[2] - 105.0).abs() < 1e-12);
    }

    #[test]
    fn projecting_a_sensitivity_gives_its_gram_row() {
        let cam = orthonormal(SpectralGrid::visible(), &[3, 11, 20]);
        let p = cam.project(&cam.sensitivities()[0]).unwrap();
        for k in 0..3 {
            assert!((p.values()[k] - cam.gram()[(0, k)]).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_camera_coefficients_equal_intensities() {
        let cam = orthonormal(SpectralGrid::visible(), &[0, 7, 30]);
        let p = PixelIntensities(vec![0.3, -1.2, 4.0]);
        let c = cam.best_approx(&p).unwrap();
        for (a, b) in c.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn best_approx_round_trips_in_span_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cam = CameraModel::gaussian_rgb(SpectralGrid::visible());
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = cam.reconstruct(&ProjectionCoefficients(a.clone())).unwrap();
            let got = cam.best_approx(&cam.project(&f).unwrap()).unwrap();
            let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (x, y) in got.values().iter().zip(&a) {
                assert!((x - y).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn duplicated_channel_is_singular() {
        let grid = SpectralGrid::visible();
        let s = Spectrum::from_fn(grid, |l| (-((l - 550.0) / 40.0).powi(2)).exp()).unwrap();
        let cam = CameraModel::new(vec![s.clone(), s]).unwrap();
        let p = PixelIntensities(vec![1.0, 1.0]);
        assert!(matches!(cam.best_approx(&p), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn near_dependent_channels_are_ill_conditioned() {
        let grid = SpectralGrid::visible();
        let s = Spectrum::from_fn(grid, |l| (-((l - 550.0) / 40.0).powi(2)).exp()).unwrap();
        let t = Spectrum::from_fn(grid, |l| (-((l - 550.0001) / 40.0).powi(2)).exp()).unwrap();
        let cam = CameraModel::new(vec![s, t]).unwrap();
        assert!(cam.condition_number() > DEFAULT_CONDITION_BOUND);
        let err = cam.best_approx(&PixelIntensities(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::IllConditionedGram { .. } | Error::SingularGram { .. }
        ));
    }

    #[test]
    fn negative_sensitivity_rejected() {
        let grid = SpectralGrid::visible();
        let mut v = vec![0.5; 31];
        v[2] = -0.1;
        let s = Spectrum::new(grid, v).unwrap();
        assert!(matches!(CameraModel::new(vec![s]), Err(Error::InvalidCamera(_))));
        assert!(CameraModel::new(vec![]).is_err());
    }

    #[test]
    fn residual_vanishes_in_span_and_for_zero() {
        let cam = CameraModel::gaussian_rgb(SpectralGrid::visible());
        let f = cam
            .reconstruct(&ProjectionCoefficients(vec![0.4, 1.1, -0.3]))
            .unwrap();
        let r = cam.residual(&f).unwrap();
        assert!(r.max_abs() < 1e-10 * f.norm());
        let z = cam.residual(&Spectrum::zeros(SpectralGrid::visible())).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_keeps_spike_outside_all_channels() {
        let grid = SpectralGrid::visible();
        // Channels skip band 15 (550 nm).
        let cam = CameraModel::boxcars(grid, &[(400.0, 550.0), (560.0, 700.0)]).unwrap();
        assert_eq!(cam.sensitivities()[0].values()[15], 0.0);
        assert_eq!(cam.sensitivities()[1].values()[15], 0.0);
        let mut v = vec![0.2; 31];
        v[15] = 5.0;
        let f = Spectrum::new(grid, v).unwrap();
        let r = cam.residual(&f).unwrap();
        assert!((r.values()[15] - 5.0).abs() < 1e-12);
        for (j, s) in cam.sensitivities().iter().enumerate() {
            let ip = inner_product(&r, s).unwrap();
            assert!(ip.abs() < 1e-10 * f.norm() * s.norm(), "channel {j}: {ip}");
        }
    }

    #[test]
    fn null_perturbation_is_invisible_and_deterministic() {
        let cam = three_boxcars();
        let d = cam.null_perturbation(7).unwrap();
        assert!(d.norm() > 0.5);
        let p = cam.project(&d).unwrap();
        assert!(p.values().iter().all(|v| v.abs() < 1e-10 * d.norm()));
        assert_eq!(d, cam.null_perturbation(7).unwrap());
        assert_ne!(d, cam.null_perturbation(8).unwrap());
    }

    #[test]
    fn full_rank_square_camera_has_trivial_complement() {
        let grid = SpectralGrid::new(400.0, 700.0, 4).unwrap();
        let cam = CameraModel::identity(grid);
        assert!(matches!(cam.null_perturbation(1), Err(Error::TrivialComplement)));
    }

    #[test]
    fn identity_camera_intensities_are_weighted_bands() {
        let grid = SpectralGrid::visible();
        let cam = CameraModel::identity(grid);
        let f = Spectrum::from_fn(grid, |l| 1.0 + (l / 50.0).cos()).unwrap();
        let p = cam.project(&f).unwrap();
        for ((pj, w), fv) in p.values().iter().zip(grid.weights()).zip(f.values()) {
            assert!((pj - w * fv).abs() < 1e-14);
        }
        let back = cam.reconstruct(&cam.best_approx(&p).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-10 * b.abs());
        }
    }
}
