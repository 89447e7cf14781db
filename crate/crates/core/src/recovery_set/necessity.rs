//! Estimating the medium when the inherent radiance is already known.
//!
//! Two pixels at the same depth `z` with different inherent radiance give
//! `F1 − F2 = e^{−cz}(L1 − L2)`, which fixes `c`; `B` then follows from
//! either pixel. If every equal-depth pair has equal radiance (radiance a
//! function of depth alone) no such pair exists and the scene is atypical.

use crate::error::{Error, Result};
use crate::medium::{DepthMap, SpectralImage};
use crate::patterns::{BandEstimate, BandOutcome, Degeneracy, MediumEstimate, Pixel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecessityOptions {
    /// Depths closer than this count as equal.
    pub eps_z: f64,
    /// Radiance differences at or below this count as zero.
    pub eps_l: f64,
}

impl Default for NecessityOptions {
    fn default() -> Self {
        Self { eps_z: 1e-9, eps_l: 1e-9 }
    }
}

fn check_shapes(f: &SpectralImage, l: &SpectralImage, depth: &DepthMap) -> Result<()> {
    if f.width() != l.width() || f.height() != l.height() || f.width() != depth.width() || f.height() != depth.height() {
        return Err(Error::ShapeMismatch("apparent, inherent and depth must share dimensions".into()));
    }
    f.grid().ensure_same(l.grid())
}

/// `(c, B)` at one band from the pixel pair `(i1, i2)`.
pub fn necessity_estimator(
    apparent: &SpectralImage,
    inherent: &SpectralImage,
    depth: &DepthMap,
    i1: Pixel,
    i2: Pixel,
    band: usize,
    opts: &NecessityOptions,
) -> Result<(f64, f64)> {
    check_shapes(apparent, inherent, depth)?;
    let n_bands = apparent.grid().n_bands();
    if band >= n_bands {
        return Err(Error::BandOutOfRange { band, n_bands });
    }
    let (w, h) = (apparent.width(), apparent.height());
    let (p1, p2) = (i1.index(w, h)?, i2.index(w, h)?);
    let (z1, z2) = (depth.values()[p1], depth.values()[p2]);
    if (z1 - z2).abs() >= opts.eps_z {
        return Err(Error::InvalidDepth(format!(
            "pixels ({},{}) and ({},{}) are at different depths {z1} and {z2}",
            i1.x, i1.y, i2.x, i2.y
        )));
    }
    let (l1, l2) = (inherent.get(p1, band), inherent.get(p2, band));
    if (l1 - l2).abs() <= opts.eps_l {
        return Err(Error::AtypicalScene);
    }
    let (f1, f2) = (apparent.get(p1, band), apparent.get(p2, band));
    pair_estimate(f1, f2, l1, l2, 0.5 * (z1 + z2))
}

fn pair_estimate(f1: f64, f2: f64, l1: f64, l2: f64, z: f64) -> Result<(f64, f64)> {
    let ratio = (f1 - f2) / (l1 - l2);
    if !(ratio > 0.0) {
        return Err(Error::NonPositiveRatio(ratio));
    }
    let c = -ratio.ln() / z;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidAttenuation(c));
    }
    let t = (-c * z).exp();
    let b = (f1 - t * l1) / -(-c * z).exp_m1();
    Ok((c, b))
}

/// The equal-depth pair with the largest radiance difference at `band`.
pub fn find_necessity_pair(
    inherent: &SpectralImage,
    depth: &DepthMap,
    band: usize,
    opts: &NecessityOptions,
) -> Result<(Pixel, Pixel)> {
    let n_bands = inherent.grid().n_bands();
    if band >= n_bands {
        return Err(Error::BandOutOfRange { band, n_bands });
    }
    let w = inherent.width();
    let z = depth.values();
    let l = inherent.band(band);
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));

    let mut best: Option<(f64, usize, usize)> = None;
    let mut start = 0;
    while start < order.len() {
        // Runs where consecutive depths stay within eps_z of the first.
        let z0 = z[order[start]];
        let mut end = start + 1;
        while end < order.len() && z[order[end]] - z0 < opts.eps_z {
            end += 1;
        }
        let run = &order[start..end];
        let lo = run.iter().copied().min_by(|&a, &b| l[a].total_cmp(&l[b]).then(a.cmp(&b)));
        let hi = run.iter().copied().max_by(|&a, &b| l[a].total_cmp(&l[b]).then(b.cmp(&a)));
        if let (Some(lo), Some(hi)) = (lo, hi) {
            let gap = l[hi] - l[lo];
            if gap > opts.eps_l && best.is_none_or(|b| gap > b.0) {
                best = Some((gap, hi, lo));
            }
        }
        start = end;
    }
    let (_, a, b) = best.ok_or(Error::AtypicalScene)?;
    Ok((Pixel::new(a % w, a / w), Pixel::new(b % w, b / w)))
}

/// Runs the estimator on every band with its best equal-depth pair. Fails
/// with [`Error::AtypicalScene`] when no band has a usable pair.
pub fn necessity_estimate(
    apparent: &SpectralImage,
    inherent: &SpectralImage,
    depth: &DepthMap,
    opts: &NecessityOptions,
) -> Result<MediumEstimate> {
    check_shapes(apparent, inherent, depth)?;
    let mut bands = Vec::with_capacity(apparent.grid().n_bands());
    let mut any = false;
    for k in 0..apparent.grid().n_bands() {
        let outcome = match find_necessity_pair(inherent, depth, k, opts) {
            Ok((p1, p2)) => match necessity_estimator(apparent, inherent, depth, p1, p2, k, opts) {
                Ok((c, b)) => {
                    any = true;
                    BandOutcome::Estimated(BandEstimate {
                        c,
                        b,
                        b_spread: 0.0,
                        c_spread: 0.0,
                        iterations: 0,
                        model_violation: false,
                    })
                }
                Err(Error::NonPositiveRatio(_)) => BandOutcome::Degenerate(Degeneracy::NonPositiveLogArgument),
                Err(_) => BandOutcome::Degenerate(Degeneracy::NonPositiveAttenuation),
            },
            Err(Error::AtypicalScene) => BandOutcome::Degenerate(Degeneracy::NearZeroDenominator),
            Err(e) => return Err(e),
        };
        bands.push(outcome);
    }
    if !any {
        return Err(Error::AtypicalScene);
    }
    Ok(MediumEstimate {
        grid: *apparent.grid(),
        source: "known inherent radiance".into(),
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::ImageKind;
    use crate::spectral::SpectralGrid;
    use std::f64::consts::LN_2;

    fn one_band(w: usize, values: Vec<f64>, kind: ImageKind) -> SpectralImage {
        // The same values in both bands of a two-band grid.
        let grid = SpectralGrid::new(500.0, 600.0, 2).unwrap();
        let h = values.len() / w;
        let cube = values.iter().chain(&values).copied().collect();
        SpectralImage::new(w, h, grid, kind, cube).unwrap()
    }

    #[test]
    fn worked_example() {
        let f = one_band(2, vec![0.75, 0.25], ImageKind::Apparent);
        let l = one_band(2, vec![1.0, 0.0], ImageKind::Inherent);
        let depth = DepthMap::new(2, 1, vec![1.0, 1.0]).unwrap();
        let opts = NecessityOptions::default();
        let (c, b) = necessity_estimator(&f, &l, &depth, Pixel::new(0, 0), Pixel::new(1, 0), 0, &opts).unwrap();
        assert!((c - LN_2).abs() < 1e-15);
        assert!((b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_radiance_is_atypical() {
        let f = one_band(2, vec![0.5, 0.5], ImageKind::Apparent);
        let l = one_band(2, vec![0.3, 0.3], ImageKind::Inherent);
        let depth = DepthMap::new(2, 1, vec![1.0, 1.0]).unwrap();
        let opts = NecessityOptions::default();
        assert!(matches!(
            necessity_estimator(&f, &l, &depth, Pixel::new(0, 0), Pixel::new(1, 0), 0, &opts),
            Err(Error::AtypicalScene)
        ));
        assert!(matches!(necessity_estimate(&f, &l, &depth, &opts), Err(Error::AtypicalScene)));
    }

    #[test]
    fn different_depths_are_rejected() {
        let f = one_band(2, vec![0.75, 0.25], ImageKind::Apparent);
        let l = one_band(2, vec![1.0, 0.0], ImageKind::Inherent);
        let depth = DepthMap::new(2, 1, vec![1.0, 2.0]).unwrap();
        let r = necessity_estimator(&f, &l, &depth, Pixel::new(0, 0), Pixel::new(1, 0), 0, &NecessityOptions::default());
        assert!(matches!(r, Err(Error::InvalidDepth(_))));
    }

    #[test]
    fn inconsistent_data_gives_non_positive_ratio() {
        let f = one_band(2, vec![0.25, 0.75], ImageKind::Apparent);
        let l = one_band(2, vec![1.0, 0.0], ImageKind::Inherent);
        let depth = DepthMap::new(2, 1, vec![1.0, 1.0]).unwrap();
        let r = necessity_estimator(&f, &l, &depth, Pixel::new(0, 0), Pixel::new(1, 0), 0, &NecessityOptions::default());
        assert!(matches!(r, Err(Error::NonPositiveRatio(_))));
    }

    #[test]
    fn pair_search_prefers_the_widest_gap() {
        let l = one_band(3, vec![0.1, 0.9, 0.4, 0.2, 0.2, 0.2], ImageKind::Inherent);
        let depth = DepthMap::new(3, 2, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        let (a, b) = find_necessity_pair(&l, &depth, 0, &NecessityOptions::default()).unwrap();
        assert_eq!((a, b), (Pixel::new(1, 0), Pixel::new(0, 0)));
    }
}
