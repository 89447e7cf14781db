use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Search controls for [`majority_line_fit_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusOptions {
    /// Up to this many points every point is tried as an anchor.
    pub exhaustive_limit: usize,
    /// Anchors drawn in the randomized mode. With a strict majority on the
    /// line the chance of missing it is below `2^-anchors`.
    pub random_anchors: usize,
    pub seed: u64,
    /// Per-point tolerance multipliers; point `i` is an inlier when its
    /// vertical residual is within `tol * scales[i]`. Least-squares weights
    /// are `1 / scales[i]^2`.
    pub scales: Option<Vec<f64>>,
    /// Re-estimate the tolerance from the inlier residuals after the
    /// consensus step, never going below this floor.
    pub adaptive_floor: Option<f64>,
    pub refine_iterations: usize,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        Self {
            exhaustive_limit: 2000,
            random_anchors: 40,
            seed: 0,
            scales: None,
            adaptive_floor: None,
            refine_iterations: 8,
        }
    }
}

/// A line `y = slope * x + intercept` supported by a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Indices into the input, ascending.
    pub inliers: Vec<usize>,
    /// Robust scale (1.4826 · MAD) of the inlier residuals, after dividing
    /// by the per-point scales.
    pub residual_scale: f64,
    /// Tolerance used for the final inlier count.
    pub tol: f64,
    /// Anchors evaluated during the search.
    pub hypotheses: usize,
}

impl LineFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }
}

/// Finds the line supported by at least `min_support` of `points` within
/// vertical distance `tol`, then polishes it by least squares over its
/// inliers.
pub fn majority_line_fit(points: &[(f64, f64)], min_support: usize, tol: f64) -> Result<LineFit> {
    majority_line_fit_with(points, min_support, tol, &ConsensusOptions::default())
}

pub fn majority_line_fit_with(
    points: &[(f64, f64)],
    min_support: usize,
    tol: f64,
    opts: &ConsensusOptions,
) -> Result<LineFit> {
    let n = points.len();
    if min_support < 2 || n < min_support {
        return Err(Error::NoConsensus { best: 0, required: min_support.max(2) });
    }
    if !(tol >= 0.0) {
        return Err(Error::Usage(format!("line-fit tolerance must be non-negative, got {tol}")));
    }
    if let Some((i, _)) = points.iter().enumerate().find(|(_, p)| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite { index: i });
    }
    let unit = vec![1.0; n];
    let scales = match &opts.scales {
        Some(s) if s.len() != n => {
            return Err(Error::LengthMismatch { expected: n, got: s.len() });
        }
        Some(s) => s.as_slice(),
        None => unit.as_slice(),
    };

    let majority = 2 * min_support > n;
    let anchors: Vec<usize> = if n <= opts.exhaustive_limit {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        sample(&mut rng, n, opts.random_anchors.min(n)).into_vec()
    };

    let mut sweep = Sweep::with_capacity(n);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut hypotheses = 0;
    for &a in &anchors {
        hypotheses += 1;
        let (support, slope) = sweep.best_slope(points, scales, a, tol);
        if best.is_none_or(|b| support > b.0) {
            best = Some((support, slope, points[a].1 - slope * points[a].0));
        }
        // A strict majority line is unique, so the first one found is it.
        if majority && support >= min_support {
            break;
        }
    }
    let (hyp_support, mut slope, mut intercept) = best.expect("at least one anchor");

    let mut tol = tol;
    let mut inliers = select(points, scales, slope, intercept, 2.0 * tol);
    if inliers.len() < 2 {
        return Err(Error::NoConsensus { best: hyp_support, required: min_support });
    }
    for _ in 0..opts.refine_iterations.max(1) {
        let Some((s, b)) = weighted_ls(points, scales, &inliers) else {
            break;
        };
        slope = s;
        intercept = b;
        if let Some(floor) = opts.adaptive_floor {
            let scale = robust_scale(points, scales, &inliers, slope, intercept);
            tol = floor.max(3.0 * scale);
        }
        let next = select(points, scales, slope, intercept, tol);
        if next == inliers || next.len() < 2 {
            inliers = next;
            break;
        }
        inliers = next;
    }
    if inliers.len() >= 2 {
        if let Some((s, b)) = weighted_ls(points, scales, &inliers) {
            slope = s;
            intercept = b;
        }
        inliers = select(points, scales, slope, intercept, tol);
    }
    if inliers.len() < min_support {
        return Err(Error::NoConsensus {
            best: inliers.len(),
            required: min_support,
        });
    }
    let residual_scale = robust_scale(points, scales, &inliers, slope, intercept);
    Ok(LineFit {
        slope,
        intercept,
        inliers,
        residual_scale,
        tol,
        hypotheses,
    })
}

fn select(points: &[(f64, f64)], scales: &[f64], slope: f64, intercept: f64, tol: f64) -> Vec<usize> {
    points
        .iter()
        .zip(scales)
        .enumerate()
        .filter(|(_, ((x, y), s))| (y - slope * x - intercept).abs() <= tol * *s)
        .map(|(i, _)| i)
        .collect()
}

fn robust_scale(points: &[(f64, f64)], scales: &[f64], idx: &[usize], slope: f64, intercept: f64) -> f64 {
    let mut r: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let (x, y) = points[i];
            (y - slope * x - intercept).abs() / scales[i]
        })
        .collect();
    if r.is_empty() {
        return 0.0;
    }
    let mid = r.len() / 2;
    let (_, m, _) = r.select_nth_unstable_by(mid, f64::total_cmp);
    1.4826 * *m
}

/// Weighted least squares on centred data. `None` when the abscissae do
/// not spread.
fn weighted_ls(points: &[(f64, f64)], scales: &[f64], idx: &[usize]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &i in idx {
        let w = 1.0 / (scales[i] * scales[i]);
        sw += w;
        sx += w * points[i].0;
        sy += w * points[i].1;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &i in idx {
        let w = 1.0 / (scales[i] * scales[i]);
        let dx = points[i].0 - mx;
        sxx += w * dx * dx;
        sxy += w * dx * (points[i].1 - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// For a fixed anchor, every other point admits an interval of slopes for
/// which it lies within tolerance of the line through the anchor. The best
/// slope is where most intervals overlap.
struct Sweep {
    events: Vec<(f64, i32)>,
}

impl Sweep {
    fn with_capacity(n: usize) -> Self {
        Self { events: Vec::with_capacity(2 * n) }
    }

    fn best_slope(&mut self, points: &[(f64, f64)], scales: &[f64], anchor: usize, tol: f64) -> (usize, f64) {
        let (xa, ya) = points[anchor];
        self.events.clear();
        let mut always = 1;
        for (j, &(x, y)) in points.iter().enumerate() {
            if j == anchor {
                continue;
            }
            let h = tol * (scales[anchor] + scales[j]);
            let (dx, dy) = (x - xa, y - ya);
            if dx == 0.0 {
                if dy.abs() <= h {
                    always += 1;
                }
                continue;
            }
            let (a, b) = ((dy - h) / dx, (dy + h) / dx);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            self.events.push((lo, 1));
            self.events.push((hi, -1));
        }
        // Openings sort before closings at equal slopes so touching
        // intervals count as overlapping.
        self.events.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
        let (mut count, mut best, mut at) = (0i32, 0i32, 0.0);
        for (k, &(s, d)) in self.events.iter().enumerate() {
            count += d;
            if count > best {
                best = count;
                let next = self.events.get(k + 1).map_or(s, |e| e.0);
                at = 0.5 * (s + next);
            }
        }
        (always + best as usize, at)
    }
}
