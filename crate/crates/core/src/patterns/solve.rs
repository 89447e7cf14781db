use crate::error::{Error, Result};
use crate::medium::{DepthMap, SpectralImage};

use super::phi::{phi_inverse_with, PhiOptions};
use super::{
    max_pairwise, relative_gap, BandEstimate, BandOutcome, Degeneracy, MediumEstimate,
    PatternInstance, PatternKind, PixelDerivatives,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub phi: PhiOptions,
    /// Radiance denominators below this fraction of the band's dynamic
    /// range count as zero.
    pub radiance_rel_tol: f64,
    /// Relative disagreement between redundant forms that flags a model
    /// violation.
    pub cross_check: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            phi: PhiOptions::default(),
            radiance_rel_tol: 1e-12,
            cross_check: 1e-8,
        }
    }
}

/// Solves one pattern for `(c, B)` at every band with default options.
pub fn solve_pattern(
    pattern: &PatternInstance,
    apparent: &SpectralImage,
    depth: &DepthMap,
) -> Result<MediumEstimate> {
    solve_pattern_with(pattern, apparent, depth, &SolveOptions::default())
}

pub fn solve_pattern_with(
    pattern: &PatternInstance,
    apparent: &SpectralImage,
    depth: &DepthMap,
    opts: &SolveOptions,
) -> Result<MediumEstimate> {
    pattern.check_shape()?;
    if apparent.width() != depth.width() || apparent.height() != depth.height() {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{} but depth map is {}x{}",
            apparent.width(),
            apparent.height(),
            depth.width(),
            depth.height()
        )));
    }
    let indices = pattern
        .pixels
        .iter()
        .map(|p| p.index(apparent.width(), apparent.height()))
        .collect::<Result<Vec<_>>>()?;
    let n_bands = apparent.grid().n_bands();
    let derivs = if pattern.kind.needs_derivatives() {
        let d = pattern
            .derivatives
            .as_ref()
            .ok_or(Error::MissingDerivatives { kind: pattern.kind.name() })?;
        check_derivatives(pattern.kind, d, indices.len(), n_bands)?;
        Some(d.as_slice())
    } else {
        None
    };
    let z: Vec<f64> = indices.iter().map(|&i| depth.values()[i]).collect();

    let bands = (0..n_bands)
        .map(|k| {
            let f: Vec<f64> = indices.iter().map(|&i| apparent.get(i, k)).collect();
            let outcome = match pattern.kind {
                PatternKind::DarkPair => dark_pair(&f, &z, opts),
                PatternKind::Triple => triple(&f, &z, opts),
                PatternKind::Box => box_pattern(&f, &z, opts),
                PatternKind::Sticks => sticks(&f, &z, opts),
                PatternKind::TwoRegionDeriv => two_region(&f, &z, derivs.unwrap(), k, opts),
                PatternKind::OneRegionDeriv2 => one_region(&f, derivs.unwrap(), k, opts),
            };
            match outcome {
                Ok(est) if est.c.is_finite() && est.b.is_finite() => {
                    if est.c > 0.0 {
                        BandOutcome::Estimated(est)
                    } else {
                        BandOutcome::Degenerate(Degeneracy::NonPositiveAttenuation)
                    }
                }
                Ok(_) => BandOutcome::Degenerate(Degeneracy::NonFinite),
                Err(d) => BandOutcome::Degenerate(d),
            }
        })
        .collect();

    Ok(MediumEstimate {
        grid: *apparent.grid(),
        source: pattern.describe(),
        bands,
    })
}

fn check_derivatives(
    kind: PatternKind,
    d: &[PixelDerivatives],
    pixels: usize,
    n_bands: usize,
) -> Result<()> {
    if d.len() != pixels {
        return Err(Error::LengthMismatch { expected: pixels, got: d.len() });
    }
    for pd in d {
        if pd.d_f.len() != n_bands {
            return Err(Error::LengthMismatch { expected: n_bands, got: pd.d_f.len() });
        }
        if kind.needs_second_derivatives() {
            match (&pd.d2_f, pd.d2_z) {
                (Some(d2), Some(_)) if d2.len() == n_bands => {}
                (Some(d2), Some(_)) => {
                    return Err(Error::LengthMismatch { expected: n_bands, got: d2.len() })
                }
                _ => return Err(Error::MissingDerivatives { kind: kind.name() }),
            }
        }
    }
    Ok(())
}

type BandResult = std::result::Result<BandEstimate, Degeneracy>;

fn estimate(c: f64, b_forms: &[f64], iterations: u32, opts: &SolveOptions) -> BandEstimate {
    let b_spread = max_pairwise(b_forms).unwrap_or(0.0);
    BandEstimate {
        c,
        b: b_forms[0],
        b_spread,
        c_spread: 0.0,
        iterations,
        model_violation: b_spread > opts.cross_check,
    }
}

fn radiance_eps(f: &[f64], opts: &SolveOptions) -> f64 {
    let range = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    opts.radiance_rel_tol * range.max(f64::MIN_POSITIVE)
}

fn distinct_depths(z1: f64, z2: f64, opts: &SolveOptions) -> std::result::Result<(), Degeneracy> {
    if (z1 - z2).abs() < opts.phi.depth_tol {
        Err(Degeneracy::DegenerateDepths)
    } else {
        Ok(())
    }
}

fn invert_phi(ratio: f64, a: f64, b: f64, opts: &SolveOptions) -> std::result::Result<(f64, u32), Degeneracy> {
    match phi_inverse_with(ratio, a, b, &opts.phi) {
        Ok(root) => Ok((root.c, root.iterations)),
        Err(Error::DegenerateDepths { .. }) => Err(Degeneracy::DegenerateDepths),
        Err(_) => Err(Degeneracy::PhiOutOfRange),
    }
}

/// `-ln(ratio) / dz`, the attenuation implied by an exponential ratio over
/// a depth difference.
fn log_ratio_attenuation(ratio: f64, dz: f64) -> std::result::Result<f64, Degeneracy> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Degeneracy::NonPositiveLogArgument);
    }
    Ok(-ratio.ln() / dz)
}

/// Backscatter from two equal-radiance pixels and known `c`:
/// `(e^{c zi} Fi − e^{c zj} Fj) / (e^{c zi} − e^{c zj})`, evaluated as
/// `Fj − (Fi − Fj) / (e^{c(zj − zi)} − 1)` to avoid large exponentials.
fn backscatter_from_pair(fi: f64, zi: f64, fj: f64, zj: f64, c: f64) -> f64 {
    fj - (fi - fj) / (c * (zj - zi)).exp_m1()
}

fn dark_pair(f: &[f64], z: &[f64], opts: &SolveOptions) -> BandResult {
    distinct_depths(z[0], z[1], opts)?;
    let eps = radiance_eps(f, opts);
    if f[1].abs() <= eps {
        return Err(Degeneracy::NearZeroDenominator);
    }
    let (c, iterations) = invert_phi(f[0] / f[1], z[0], z[1], opts)?;
    let b1 = f[0] / -(-c * z[0]).exp_m1();
    let b2 = f[1] / -(-c * z[1]).exp_m1();
    Ok(estimate(c, &[b1, b2], iterations, opts))
}

fn triple(f: &[f64], z: &[f64], opts: &SolveOptions) -> BandResult {
    distinct_depths(z[0], z[1], opts)?;
    distinct_depths(z[0], z[2], opts)?;
    distinct_depths(z[1], z[2], opts)?;
    let eps = radiance_eps(f, opts);
    let (d12, d13) = (f[0] - f[1], f[0] - f[2]);
    if d13.abs() <= eps || d12.abs() <= eps {
        return Err(Degeneracy::NearZeroDenominator);
    }
    // (F1 − F2)/(F1 − F3) = Φ evaluated at the depth offsets from pixel 1.
    let (c, iterations) = invert_phi(d12 / d13, z[1] - z[0], z[2] - z[0], opts)?;
    let b = [
        backscatter_from_pair(f[0], z[0], f[1], z[1], c),
        backscatter_from_pair(f[1], z[1], f[2], z[2], c),
        backscatter_from_pair(f[0], z[0], f[2], z[2], c),
    ];
    Ok(estimate(c, &b, iterations, opts))
}

fn box_pattern(f: &[f64], z: &[f64], opts: &SolveOptions) -> BandResult {
    distinct_depths(z[0], z[1], opts)?;
    let eps = radiance_eps(f, opts);
    let (num, den) = (f[0] - f[2], f[1] - f[3]);
    if den.abs() <= eps || num.abs() <= eps {
        return Err(Degeneracy::NearZeroDenominator);
    }
    let c = log_ratio_attenuation(num / den, z[0] - z[1])?;
    let b = [
        backscatter_from_pair(f[0], z[0], f[1], z[1], c),
        backscatter_from_pair(f[2], z[2], f[3], z[3], c),
    ];
    Ok(estimate(c, &b, 0, opts))
}

fn sticks(f: &[f64], z: &[f64], opts: &SolveOptions) -> BandResult {
    distinct_depths(z[0], z[1], opts)?;
    distinct_depths(z[2], z[3], opts)?;
    let eps = radiance_eps(f, opts);
    // (F1F4 − F2F3)/(F1 + F4 − F2 − F3) is translation-covariant, so it is
    // evaluated on radiances relative to F1 to limit cancellation.
    let a: Vec<f64> = f.iter().map(|v| v - f[0]).collect();
    let den = a[0] + a[3] - a[1] - a[2];
    if den.abs() <= eps {
        return Err(Degeneracy::NearZeroDenominator);
    }
    let b = f[0] + (a[0] * a[3] - a[1] * a[2]) / den;
    let (g1, g2, g3, g4) = (f[0] - b, f[1] - b, f[2] - b, f[3] - b);
    if g2.abs() <= eps || g4.abs() <= eps {
        return Err(Degeneracy::NearZeroDenominator);
    }
    let c1 = log_ratio_attenuation(g1 / g2, z[0] - z[1])?;
    let c2 = log_ratio_attenuation(g3 / g4, z[2] - z[3])?;
    let c_spread = relative_gap(c1, c2);
    Ok(BandEstimate {
        c: c1,
        b,
        b_spread: 0.0,
        c_spread,
        iterations: 0,
        model_violation: c_spread > opts.cross_check,
    })
}

fn derivative_eps(values: &[f64], opts: &SolveOptions) -> f64 {
    radiance_eps(values, opts)
}

fn two_region(
    f: &[f64],
    z: &[f64],
    d: &[PixelDerivatives],
    band: usize,
    opts: &SolveOptions,
) -> BandResult {
    distinct_depths(z[0], z[1], opts)?;
    let (df1, df2) = (d[0].d_f[band], d[1].d_f[band]);
    let (dz1, dz2) = (d[0].d_z, d[1].d_z);
    if dz1.abs() <= opts.phi.depth_tol || dz2.abs() <= opts.phi.depth_tol {
        return Err(Degeneracy::VanishingDerivative);
    }
    let eps = derivative_eps(&[df1, df2, f[0], f[1]], opts);
    if df1.abs() <= eps || df2.abs() <= eps {
        return Err(Degeneracy::VanishingDerivative);
    }
    let ratio = (df1 / df2) * (dz2 / dz1);
    let c = log_ratio_attenuation(ratio, z[0] - z[1])?;
    if !(c > 0.0) {
        return Err(Degeneracy::NonPositiveAttenuation);
    }
    let b = [f[0] + df1 / (c * dz1), f[1] + df2 / (c * dz2)];
    Ok(estimate(c, &b, 0, opts))
}

fn one_region(f: &[f64], d: &[PixelDerivatives], band: usize, opts: &SolveOptions) -> BandResult {
    let pd = &d[0];
    let df = pd.d_f[band];
    let dz = pd.d_z;
    let d2f = pd.d2_f.as_ref().expect("checked")[band];
    let d2z = pd.d2_z.expect("checked");
    if dz.abs() <= opts.phi.depth_tol {
        return Err(Degeneracy::VanishingDerivative);
    }
    if df.abs() <= derivative_eps(&[df, f[0]], opts) {
        return Err(Degeneracy::VanishingDerivative);
    }
    let c = d2z / (dz * dz) - (d2f / df) / dz;
    if !(c > 0.0) {
        return Err(Degeneracy::NonPositiveAttenuation);
    }
    Ok(estimate(c, &[f[0] + df / (c * dz)], 0, opts))
}
