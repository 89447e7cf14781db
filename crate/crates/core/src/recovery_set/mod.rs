//! Recovery sets: many pixels of one uniform, tilted surface.
//!
//! On such a surface `δL = 0` while `δz ≠ 0`, so every pixel satisfies
//! `δF/δz = cB − cF`. The points `(F, δF/δz)` therefore lie on one line with
//! slope `−c` and intercept `cB`. When more than half of the image sits on
//! that line no other line can collect as many points, and a consensus fit
//! recovers it.

mod consensus;
mod derivative;
mod necessity;

pub use consensus::{majority_line_fit, majority_line_fit_with, ConsensusOptions, LineFit};
pub use derivative::{differentiate, DerivativeField, Direction};
pub use necessity::{find_necessity_pair, necessity_estimate, necessity_estimator, NecessityOptions};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{DepthMap, SpectralImage};
use crate::patterns::{
    BandEstimate, BandOutcome, Degeneracy, MediumEstimate, PatternInstance, PixelDerivatives,
};

pub(crate) use derivative::plane_derivatives;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySetOptions {
    /// Pixels with `|δz|` at or below this are not eligible.
    pub eps_z: f64,
    /// Fixed inlier tolerance on `δF/δz`. `None` estimates it from the data
    /// and then adapts it to the inlier residuals.
    pub tol: Option<f64>,
    /// Lower bound for the estimated tolerance.
    pub tol_floor: f64,
    pub seed: u64,
    pub exhaustive_limit: usize,
    pub random_anchors: usize,
    /// Undo the bias central differences introduce on exponential profiles.
    pub correct_truncation: bool,
}

impl Default for RecoverySetOptions {
    fn default() -> Self {
        Self {
            eps_z: 1e-9,
            tol: None,
            tol_floor: 1e-9,
            seed: 0,
            exhaustive_limit: 2000,
            random_anchors: 40,
            correct_truncation: true,
        }
    }
}

/// Consensus fit for one band.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySetFit {
    pub band: usize,
    /// Slope of `δF/δz` against `F`; equals `−c`.
    pub slope: f64,
    /// Equals `cB`, the radiance gain `Q⁺`.
    pub intercept: f64,
    pub c: f64,
    pub b: f64,
    /// Pixel indices (row-major) on the consensus line.
    pub inliers: Vec<usize>,
    pub residual_scale: f64,
    pub tol: f64,
    pub eligible: usize,
    /// `⌈N/2⌉ + 1` for the full image pixel count `N`.
    pub min_support: usize,
    /// Smallest gap between distinct inlier values of `F`.
    pub min_f_gap: f64,
    pub hypotheses: usize,
    pub correction_iterations: usize,
}

impl RecoverySetFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }
}

/// Majority threshold for an image of `n` pixels.
pub fn majority_threshold(n: usize) -> usize {
    n.div_ceil(2) + 1
}

/// Estimates `(c, B)` at one band from the recovery set along `direction`.
pub fn estimate_from_recovery_set(
    apparent: &SpectralImage,
    depth: &DepthMap,
    direction: Direction,
    band: usize,
    opts: &RecoverySetOptions,
) -> Result<RecoverySetFit> {
    let n_bands = apparent.grid().n_bands();
    if band >= n_bands {
        return Err(Error::BandOutOfRange { band, n_bands });
    }
    let field = differentiate(apparent, depth, direction, false)?;
    fit_band(apparent, &field, band, opts)
}

/// Every band of the recovery-set estimate, together with the per-band
/// fits or the reason a band failed.
#[derive(Debug)]
pub struct RecoverySetEstimate {
    pub estimate: MediumEstimate,
    pub fits: Vec<Result<RecoverySetFit>>,
}

/// Runs [`estimate_from_recovery_set`] on every band in parallel. Band `k`
/// uses seed `opts.seed + k`, so results do not depend on scheduling.
pub fn estimate_recovery_set(
    apparent: &SpectralImage,
    depth: &DepthMap,
    direction: Direction,
    opts: &RecoverySetOptions,
) -> Result<RecoverySetEstimate> {
    let field = differentiate(apparent, depth, direction, false)?;
    let n_bands = apparent.grid().n_bands();
    let fits: Vec<Result<RecoverySetFit>> = (0..n_bands)
        .into_par_iter()
        .map(|k| fit_band(apparent, &field, k, opts))
        .collect();
    let bands = fits
        .iter()
        .map(|f| match f {
            Ok(fit) => BandOutcome::Estimated(BandEstimate {
                c: fit.c,
                b: fit.b,
                b_spread: 0.0,
                c_spread: 0.0,
                iterations: fit.correction_iterations as u32,
                model_violation: false,
            }),
            Err(Error::TooFewEligible { .. }) => BandOutcome::Degenerate(Degeneracy::TooFewEligible),
            Err(Error::NonPhysical { .. }) => BandOutcome::Degenerate(Degeneracy::NonPositiveAttenuation),
            Err(_) => BandOutcome::Degenerate(Degeneracy::NoConsensus),
        })
        .collect();
    let [dx, dy] = direction.as_array();
    Ok(RecoverySetEstimate {
        estimate: MediumEstimate {
            grid: *apparent.grid(),
            source: format!("recovery set along ({dx}, {dy})"),
            bands,
        },
        fits,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn fit_band(
    apparent: &SpectralImage,
    field: &DerivativeField,
    band: usize,
    opts: &RecoverySetOptions,
) -> Result<RecoverySetFit> {
    let n = apparent.pixels();
    let min_support = majority_threshold(n);
    let f = apparent.band(band);
    let d_f = field.d_f_band(band);
    let eligible: Vec<usize> = (0..n)
        .filter(|&i| field.is_interior(i) && field.d_z[i].abs() > opts.eps_z)
        .collect();
    if eligible.len() < min_support {
        return Err(Error::TooFewEligible {
            eligible: eligible.len(),
            required: min_support,
        });
    }

    let dz_typ = median(eligible.iter().map(|&i| field.d_z[i].abs()).collect());
    let points: Vec<(f64, f64)> = eligible.iter().map(|&i| (f[i], d_f[i] / field.d_z[i])).collect();
    let scales: Vec<f64> = eligible.iter().map(|&i| dz_typ / field.d_z[i].abs()).collect();

    let (tol, adaptive_floor) = match opts.tol {
        Some(t) => (t, None),
        None => {
            // Noise in F from second differences: 6σ² for a pure-noise field.
            let second = plane_derivatives(f, field.width, field.height, field.direction, true)
                .second
                .expect("second differences requested");
            let mad = median(eligible.iter().map(|&i| second[i].abs()).collect());
            let sigma_f = 1.4826 * mad / 6f64.sqrt();
            let sigma_y = sigma_f / std::f64::consts::SQRT_2 / dz_typ;
            (opts.tol_floor.max(3.0 * sigma_y), Some(opts.tol_floor))
        }
    };
    let copts = ConsensusOptions {
        exhaustive_limit: opts.exhaustive_limit,
        random_anchors: opts.random_anchors,
        seed: opts.seed.wrapping_add(band as u64),
        scales: Some(scales.clone()),
        adaptive_floor,
        refine_iterations: 8,
    };
    let fit = majority_line_fit_with(&points, min_support, tol, &copts)?;
    if fit.slope >= 0.0 {
        return Err(Error::NonPhysical { slope: fit.slope });
    }

    let (mut slope, mut intercept) = (fit.slope, fit.intercept);
    let mut correction_iterations = 0;
    if opts.correct_truncation {
        let [a, b] = field.direction.as_array();
        let mut c = -slope;
        for _ in 0..100 {
            correction_iterations += 1;
            let corrected: Vec<(f64, f64)> = fit
                .inliers
                .iter()
                .map(|&j| {
                    let [gx, gy] = field.dz_axes[eligible[j]];
                    let exact = c * (a * gx + b * gy);
                    let central = a * (c * gx).sinh() + b * (c * gy).sinh();
                    (points[j].0, points[j].1 * exact / central)
                })
                .collect();
            let w: Vec<f64> = fit.inliers.iter().map(|&j| scales[j]).collect();
            let Some((s, i)) = weighted_line(&corrected, &w) else {
                break;
            };
            let c_next = -s;
            slope = s;
            intercept = i;
            if !(c_next > 0.0) {
                return Err(Error::NonPhysical { slope: s });
            }
            let done = (c_next - c).abs() <= 1e-15 * c;
            c = c_next;
            if done {
                break;
            }
        }
    }
    let c = -slope;
    let mut xs: Vec<f64> = fit.inliers.iter().map(|&j| points[j].0).collect();
    xs.sort_by(f64::total_cmp);
    let min_f_gap = xs
        .windows(2)
        .map(|p| p[1] - p[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(RecoverySetFit {
        band,
        slope,
        intercept,
        c,
        b: intercept / c,
        inliers: fit.inliers.iter().map(|&j| eligible[j]).collect(),
        residual_scale: fit.residual_scale,
        tol: fit.tol,
        eligible: eligible.len(),
        min_support,
        min_f_gap,
        hypotheses: fit.hypotheses,
        correction_iterations,
    })
}

fn weighted_line(points: &[(f64, f64)], scales: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for ((x, y), s) in points.iter().zip(scales) {
        let w = 1.0 / (s * s);
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((x, y), s) in points.iter().zip(scales) {
        let w = 1.0 / (s * s);
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    (sxx > 0.0).then(|| {
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    })
}

/// Finite-difference derivatives at the pixels of a derivative pattern,
/// along the pattern's direction (`x` when none is set).
pub fn pattern_derivatives(
    pattern: &PatternInstance,
    apparent: &SpectralImage,
    depth: &DepthMap,
) -> Result<Vec<PixelDerivatives>> {
    let [dx, dy] = pattern.direction.unwrap_or([1.0, 0.0]);
    let second = pattern.kind.needs_second_derivatives();
    let field = differentiate(apparent, depth, Direction::new(dx, dy)?, second)?;
    let n_bands = apparent.grid().n_bands();
    pattern
        .pixels
        .iter()
        .map(|p| {
            let i = p.index(apparent.width(), apparent.height())?;
            Ok(PixelDerivatives {
                d_f: (0..n_bands).map(|k| field.d_f_band(k)[i]).collect(),
                d_z: field.d_z[i],
                d2_f: second.then(|| (0..n_bands).map(|k| field.d2_f_band(k).unwrap()[i]).collect()),
                d2_z: field.d2_z.as_ref().map(|v| v[i]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{apparent, ImageKind};
    use crate::spectral::SpectralGrid;

    /// Uniform slanted plane over the top `rows` rows, a shaded textured
    /// surface below.
    fn slant_scene(w: usize, h: usize, rows: usize, c: f64, b: f64) -> (SpectralImage, DepthMap) {
        let grid = SpectralGrid::new(500.0, 600.0, 2).unwrap();
        let z: Vec<f64> = (0..w * h)
            .map(|i| 1.0 + 0.04 * (i % w) as f64 + 0.025 * (i / w) as f64)
            .collect();
        let depth = DepthMap::new(w, h, z.clone()).unwrap();
        let f = SpectralImage::from_fn(w, h, grid, ImageKind::Apparent, |i, k| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let l = if i / w < rows {
                0.9
            } else {
                0.5 + 0.3 * (0.7 * x + 0.4 * y).sin()
            };
            apparent(l, z[i], c * (1.0 + 0.5 * k as f64), b)
        })
        .unwrap();
        (f, depth)
    }

    #[test]
    fn exact_plane_recovers_medium() {
        let (f, depth) = slant_scene(24, 24, 16, 1.0, 2.0);
        for dir in [Direction::X, Direction::Y, Direction::new(1.0, 2.0).unwrap()] {
            let est = estimate_recovery_set(&f, &depth, dir, &RecoverySetOptions::default()).unwrap();
            for (k, fit) in est.fits.iter().enumerate() {
                let fit = fit.as_ref().unwrap();
                let c = 1.0 + 0.5 * k as f64;
                assert!((fit.c - c).abs() < 1e-9 * c, "{dir:?} band {k}: {}", fit.c);
                assert!((fit.b - 2.0).abs() < 1e-9 * 2.0, "{dir:?} band {k}: {}", fit.b);
                assert!(fit.inlier_count() >= fit.min_support);
            }
        }
    }

    #[test]
    fn uncorrected_central_differences_are_biased() {
        let (f, depth) = slant_scene(24, 24, 16, 1.0, 2.0);
        let opts = RecoverySetOptions {
            correct_truncation: false,
            ..Default::default()
        };
        let fit = estimate_from_recovery_set(&f, &depth, Direction::X, 1, &opts).unwrap();
        let g: f64 = 0.04 * 1.5;
        let expected = g.sinh() / g * 1.5;
        assert!((fit.c - expected).abs() < 1e-10);
    }

    #[test]
    fn minority_plane_has_no_consensus() {
        let (f, depth) = slant_scene(24, 24, 9, 1.0, 2.0);
        let err = estimate_from_recovery_set(&f, &depth, Direction::X, 0, &RecoverySetOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoConsensus { .. }), "{err}");
    }

    #[test]
    fn flat_depth_has_too_few_eligible() {
        let (f, _) = slant_scene(8, 8, 6, 1.0, 2.0);
        let depth = DepthMap::new(8, 8, vec![2.0; 64]).unwrap();
        let err = estimate_from_recovery_set(&f, &depth, Direction::X, 0, &RecoverySetOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewEligible { eligible: 0, required: 33 }));
    }

    #[test]
    fn threshold_counts_the_whole_image() {
        assert_eq!(majority_threshold(4096), 2049);
        assert_eq!(majority_threshold(9), 6);
    }
}
