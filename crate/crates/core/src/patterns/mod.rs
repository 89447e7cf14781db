//! Recovery patterns: small groups of pixels whose known relations pin down
//! the medium parameters in closed form.
//!
//! | kind | pixels | constraints | attenuation from |
//! |------|--------|-------------|------------------|
//! | dark pair | 2 | `L1 = L2 = 0`, `z1 ≠ z2` | `Φ⁻¹(F1/F2)` |
//! | triple | 3 | `L1 = L2 = L3`, `z1 < z2 < z3` | `Φ⁻¹((F1−F2)/(F1−F3))` |
//! | box | 4 | `L1 = L2 ≠ L3 = L4`, `z1 = z3 ≠ z2 = z4` | log of a radiance-difference ratio |
//! | sticks | 4 | `L1 = L2 ≠ L3 = L4`, `z1 − z2 = z3 − z4 ≠ 0` | `B` first, then a log ratio |
//! | two-region derivative | 2 | `L1 = L2`, `δL = 0`, `z1 ≠ z2`, `δz ≠ 0` | log of a derivative ratio |
//! | one-region second derivative | 1 | `δL = 0`, `δz ≠ 0` | first and second derivatives |
//!
//! Every band is solved independently. A band whose inputs make a formula
//! degenerate is flagged in the returned [`MediumEstimate`]; the remaining
//! bands are still estimated.

mod phi;
mod solve;
mod verify;

pub use phi::{phi, phi_inverse, phi_inverse_with, PhiOptions, PhiRoot, DEFAULT_DEPTH_TOL};
pub use solve::{solve_pattern, solve_pattern_with, SolveOptions};
pub use verify::{verify_pattern, ConstraintCheck, VerificationReport, VerifyTolerances};

use std::fmt;

use crate::error::{Error, Result};
use crate::medium::MediumParams;
use crate::spectral::{SpectralGrid, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternKind {
    DarkPair = 1,
    Triple = 2,
    Box = 3,
    Sticks = 4,
    TwoRegionDeriv = 5,
    OneRegionDeriv2 = 6,
}

impl PatternKind {
    pub const ALL: [PatternKind; 6] = [
        PatternKind::DarkPair,
        PatternKind::Triple,
        PatternKind::Box,
        PatternKind::Sticks,
        PatternKind::TwoRegionDeriv,
        PatternKind::OneRegionDeriv2,
    ];

    pub fn pixel_count(self) -> usize {
        match self {
            PatternKind::DarkPair | PatternKind::TwoRegionDeriv => 2,
            PatternKind::Triple => 3,
            PatternKind::Box | PatternKind::Sticks => 4,
            PatternKind::OneRegionDeriv2 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::DarkPair => "dark-pair",
            PatternKind::Triple => "triple",
            PatternKind::Box => "box",
            PatternKind::Sticks => "sticks",
            PatternKind::TwoRegionDeriv => "two-region-deriv",
            PatternKind::OneRegionDeriv2 => "one-region-deriv2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn needs_derivatives(self) -> bool {
        matches!(self, PatternKind::TwoRegionDeriv | PatternKind::OneRegionDeriv2)
    }

    pub fn needs_second_derivatives(self) -> bool {
        self == PatternKind::OneRegionDeriv2
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub(crate) fn index(self, width: usize, height: usize) -> Result<usize> {
        if self.x >= width || self.y >= height {
            return Err(Error::PixelOutOfBounds {
                x: self.x,
                y: self.y,
                width,
                height,
            });
        }
        Ok(self.y * width + self.x)
    }
}

/// Directional derivatives at one pattern pixel, per unit image step.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDerivatives {
    /// `δF` per band.
    pub d_f: Vec<f64>,
    pub d_z: f64,
    /// `δ²F` per band, needed by the one-region pattern.
    pub d2_f: Option<Vec<f64>>,
    pub d2_z: Option<f64>,
}

/// One declared recovery pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternInstance {
    pub kind: PatternKind,
    pub pixels: Vec<Pixel>,
    /// Differencing direction in image coordinates for the derivative kinds.
    pub direction: Option<[f64; 2]>,
    /// Supplied derivatives, one entry per pixel.
    pub derivatives: Option<Vec<PixelDerivatives>>,
    pub label: Option<String>,
}

impl PatternInstance {
    pub fn new(kind: PatternKind, pixels: Vec<Pixel>) -> Result<Self> {
        if pixels.len() != kind.pixel_count() {
            return Err(Error::PatternShape {
                kind: kind.name(),
                expected: kind.pixel_count(),
                got: pixels.len(),
            });
        }
        Ok(Self {
            kind,
            pixels,
            direction: None,
            derivatives: None,
            label: None,
        })
    }

    pub fn with_direction(mut self, direction: [f64; 2]) -> Self {
        self.direction = Some(direction);
        self
    }

    pub fn with_derivatives(mut self, derivatives: Vec<PixelDerivatives>) -> Self {
        self.derivatives = Some(derivatives);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        if self.pixels.len() != self.kind.pixel_count() {
            return Err(Error::PatternShape {
                kind: self.kind.name(),
                expected: self.kind.pixel_count(),
                got: self.pixels.len(),
            });
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let px: Vec<String> = self.pixels.iter().map(|p| format!("({},{})", p.x, p.y)).collect();
        match &self.label {
            Some(l) => format!("{} '{}' at {}", self.kind, l, px.join(" ")),
            None => format!("{} at {}", self.kind, px.join(" ")),
        }
    }
}

/// Why a band could not be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    DegenerateDepths,
    PhiOutOfRange,
    NonPositiveLogArgument,
    NearZeroDenominator,
    NonPositiveAttenuation,
    VanishingDerivative,
    NonFinite,
    NoConsensus,
    TooFewEligible,
}

impl Degeneracy {
    pub fn as_str(self) -> &'static str {
        match self {
            Degeneracy::DegenerateDepths => "degenerate-depths",
            Degeneracy::PhiOutOfRange => "phi-out-of-range",
            Degeneracy::NonPositiveLogArgument => "non-positive-log-argument",
            Degeneracy::NearZeroDenominator => "near-zero-denominator",
            Degeneracy::NonPositiveAttenuation => "non-positive-attenuation",
            Degeneracy::VanishingDerivative => "vanishing-derivative",
            Degeneracy::NonFinite => "non-finite",
            Degeneracy::NoConsensus => "no-consensus",
            Degeneracy::TooFewEligible => "too-few-eligible",
        }
    }
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// A successful single-band estimate and its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEstimate {
    pub c: f64,
    pub b: f64,
    /// Largest pairwise relative disagreement between the equivalent
    /// closed forms for `B`; zero when only one form exists.
    pub b_spread: f64,
    /// Relative disagreement between the two attenuation forms of the
    /// sticks pattern; zero for the other kinds.
    pub c_spread: f64,
    /// `Φ` inversion iterations, zero when no inversion was needed.
    pub iterations: u32,
    /// Set when redundant forms disagree beyond the cross-check tolerance.
    pub model_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandOutcome {
    Estimated(BandEstimate),
    Degenerate(Degeneracy),
}

impl BandOutcome {
    pub fn estimate(&self) -> Option<&BandEstimate> {
        match self {
            BandOutcome::Estimated(e) => Some(e),
            BandOutcome::Degenerate(_) => None,
        }
    }
}

/// Per-band medium estimate from one pattern or recovery set.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumEstimate {
    pub grid: SpectralGrid,
    /// Where the estimate came from, e.g. `pattern 0 (dark-pair at ...)`.
    pub source: String,
    pub bands: Vec<BandOutcome>,
}

impl MediumEstimate {
    pub fn c_hat(&self) -> Vec<Option<f64>> {
        self.bands.iter().map(|b| b.estimate().map(|e| e.c)).collect()
    }

    pub fn b_hat(&self) -> Vec<Option<f64>> {
        self.bands.iter().map(|b| b.estimate().map(|e| e.b)).collect()
    }

    pub fn degenerate_bands(&self) -> Vec<(usize, Degeneracy)> {
        self.bands
            .iter()
            .enumerate()
            .filter_map(|(k, b)| match b {
                BandOutcome::Degenerate(d) => Some((k, *d)),
                BandOutcome::Estimated(_) => None,
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.bands.iter().all(|b| b.estimate().is_some())
    }

    /// Converts to [`MediumParams`]; every band must be estimated.
    pub fn to_medium(&self) -> Result<MediumParams> {
        if self.bands.iter().all(|b| b.estimate().is_none()) {
            return Err(Error::AllBandsDegenerate);
        }
        if let Some((k, d)) = self.degenerate_bands().first() {
            return Err(Error::InvalidMedium(format!("band {k} is degenerate ({d})")));
        }
        let c = self.bands.iter().map(|b| b.estimate().map_or(0.0, |e| e.c)).collect();
        let b = self.bands.iter().map(|b| b.estimate().map_or(0.0, |e| e.b)).collect();
        MediumParams::new(Spectrum::new(self.grid, c)?, Spectrum::new(self.grid, b)?)
    }
}

/// Agreement between several estimates of the same medium.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Per band: largest pairwise relative discrepancy in `c`, or `None`
    /// when fewer than two estimates are valid at that band.
    pub c_discrepancy: Vec<Option<f64>>,
    pub b_discrepancy: Vec<Option<f64>>,
    pub threshold: f64,
    pub passed: bool,
}

impl ConsistencyReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.c_discrepancy
            .iter()
            .chain(&self.b_discrepancy)
            .flatten()
            .fold(0.0_f64, |m, v| m.max(*v))
    }
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn max_pairwise(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut worst = 0.0_f64;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            worst = worst.max(relative_gap(*a, *b));
        }
    }
    Some(worst)
}

/// Compares independent estimates band by band.
///
/// Passes when every band with at least two valid estimates agrees within
/// `threshold` (relative) in both `c` and `B`, and at least one band could
/// be compared.
pub fn consistency_check(estimates: &[MediumEstimate], threshold: f64) -> Result<ConsistencyReport> {
    if estimates.len() < 2 {
        return Err(Error::Arity(estimates.len()));
    }
    let grid = estimates[0].grid;
    for e in estimates {
        grid.ensure_same(&e.grid)?;
        if e.bands.len() != grid.n_bands() {
            return Err(Error::LengthMismatch {
                expected: grid.n_bands(),
                got: e.bands.len(),
            });
        }
    }
    let mut c_discrepancy = Vec::with_capacity(grid.n_bands());
    let mut b_discrepancy = Vec::with_capacity(grid.n_bands());
    for k in 0..grid.n_bands() {
        let valid: Vec<&BandEstimate> = estimates.iter().filter_map(|e| e.bands[k].estimate()).collect();
        let cs: Vec<f64> = valid.iter().map(|e| e.c).collect();
        let bs: Vec<f64> = valid.iter().map(|e| e.b).collect();
        c_discrepancy.push(max_pairwise(&cs));
        b_discrepancy.push(max_pairwise(&bs));
    }
    let compared = c_discrepancy.iter().any(Option::is_some);
    let within = c_discrepancy
        .iter()
        .chain(&b_discrepancy)
        .flatten()
        .all(|d| *d <= threshold);
    Ok(ConsistencyReport {
        c_discrepancy,
        b_discrepancy,
        threshold,
        passed: compared && within,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate(grid: SpectralGrid, c: f64, b: f64) -> MediumEstimate {
        MediumEstimate {
            grid,
            source: "test".into(),
            bands: (0..grid.n_bands())
                .map(|_| {
                    BandOutcome::Estimated(BandEstimate {
                        c,
                        b,
                        b_spread: 0.0,
                        c_spread: 0.0,
                        iterations: 0,
                        model_violation: false,
                    })
                })
                .collect(),
        }
    }

    #[test]
    fn pattern_shape_is_enforced() {
        let err = PatternInstance::new(PatternKind::Box, vec![Pixel::new(0, 0)]).unwrap_err();
        assert!(matches!(err, Error::PatternShape { expected: 4, got: 1, .. }));
        for kind in PatternKind::ALL {
            assert_eq!(PatternKind::from_name(kind.name()), Some(kind));
        }
    }

    #[test]
    fn consistency_reports_relative_gap() {
        let g = SpectralGrid::new(400.0, 700.0, 3).unwrap();
        let rep = consistency_check(&[estimate(g, 1.0, 2.0), estimate(g, 1.0, 2.0)], 1e-8).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_discrepancy(), 0.0);

        let rep = consistency_check(&[estimate(g, 1.0, 2.0), estimate(g, 1.1, 2.0)], 1e-8).unwrap();
        assert!(!rep.passed);
        let d = rep.c_discrepancy[0].unwrap();
        assert!((d - 0.1 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn consistency_needs_two_estimates_on_one_grid() {
        let g = SpectralGrid::new(400.0, 700.0, 3).unwrap();
        assert!(matches!(consistency_check(&[estimate(g, 1.0, 1.0)], 1e-8), Err(Error::Arity(1))));
        let other = SpectralGrid::new(400.0, 700.0, 4).unwrap();
        assert!(matches!(
            consistency_check(&[estimate(g, 1.0, 1.0), estimate(other, 1.0, 1.0)], 1e-8),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn degenerate_bands_block_conversion() {
        let g = SpectralGrid::new(400.0, 700.0, 3).unwrap();
        let mut e = estimate(g, 1.0, 0.5);
        assert!(e.to_medium().is_ok());
        e.bands[1] = BandOutcome::Degenerate(Degeneracy::NearZeroDenominator);
        assert_eq!(e.degenerate_bands(), vec![(1, Degeneracy::NearZeroDenominator)]);
        assert!(e.to_medium().is_err());
        e.bands = vec![BandOutcome::Degenerate(Degeneracy::PhiOutOfRange); 3];
        assert!(matches!(e.to_medium(), Err(Error::AllBandsDegenerate)));
    }
}
