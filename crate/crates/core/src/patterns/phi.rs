//! The ratio function `Φ_{z1,z2}(c) = (1 - e^{-c z1}) / (1 - e^{-c z2})` and
//! its numerical inverse.
//!
//! For `z1 ≠ z2` the function is strictly monotone in `c > 0`, running from
//! the `c → 0⁺` limit `z1/z2` to a `c → ∞` limit that depends on the signs
//! of the arguments. Negative arguments are allowed.

use crate::error::{Error, Result};

/// Depths closer than this are treated as equal.
pub const DEFAULT_DEPTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOptions {
    /// Initial lower bracket for `c`.
    pub c_lo: f64,
    /// Initial upper bracket for `c`; the `--c-max` setting.
    pub c_hi: f64,
    /// Geometric bracket expansions allowed on either side.
    pub max_expansions: u32,
    /// Bisection stops once the bracket is narrower than this, or narrower
    /// than this times the upper end when that is smaller.
    pub bisection_tol: f64,
    pub secant_steps: u32,
    pub depth_tol: f64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self {
            c_lo: 1e-8,
            c_hi: 50.0,
            max_expansions: 60,
            bisection_tol: 1e-13,
            secant_steps: 3,
            depth_tol: DEFAULT_DEPTH_TOL,
        }
    }
}

/// A root of `Φ(c) = ratio` with the work spent finding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRoot {
    pub c: f64,
    pub iterations: u32,
}

/// `1 - e^{-c z}` as `e^{scale} · mantissa`, exact for either sign of `z`
/// without overflowing for large `c|z|`.
fn split_factor(c: f64, z: f64) -> (f64, f64) {
    if z >= 0.0 {
        (0.0, -(-c * z).exp_m1())
    } else {
        // 1 - e^{c|z|} = e^{c|z|} · (e^{-c|z|} - 1)
        let a = c * -z;
        (a, (-a).exp_m1())
    }
}

fn phi_unchecked(c: f64, z1: f64, z2: f64) -> f64 {
    let (s1, m1) = split_factor(c, z1);
    let (s2, m2) = split_factor(c, z2);
    (s1 - s2).exp() * (m1 / m2)
}

fn check_depths(z1: f64, z2: f64, tol: f64) -> Result<()> {
    if (z1 - z2).abs() < tol || z1.abs() < tol || z2.abs() < tol {
        return Err(Error::DegenerateDepths { z1, z2 });
    }
    Ok(())
}

/// Evaluates `Φ_{z1,z2}(c)`.
pub fn phi(c: f64, z1: f64, z2: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidAttenuation(c));
    }
    check_depths(z1, z2, DEFAULT_DEPTH_TOL)?;
    Ok(phi_unchecked(c, z1, z2))
}

/// Limit of `Φ` as `c → ∞`.
fn limit_at_infinity(z1: f64, z2: f64) -> f64 {
    match (z1 > 0.0, z2 > 0.0) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => {
            if z1.abs() < z2.abs() {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Solves `Φ_{z1,z2}(c) = ratio` for `c` with default options.
pub fn phi_inverse(ratio: f64, z1: f64, z2: f64) -> Result<f64> {
    phi_inverse_with(ratio, z1, z2, &PhiOptions::default()).map(|r| r.c)
}

/// Solves `Φ_{z1,z2}(c) = ratio` by bracket expansion, bisection and a few
/// secant polish steps.
///
/// Ratios on or beyond the open interval between the `c → 0⁺` and `c → ∞`
/// limits are rejected with [`Error::OutOfRange`]; they are never clamped.
pub fn phi_inverse_with(ratio: f64, z1: f64, z2: f64, opts: &PhiOptions) -> Result<PhiRoot> {
    check_depths(z1, z2, opts.depth_tol)?;
    let at_zero = z1 / z2;
    let at_inf = limit_at_infinity(z1, z2);
    let (lo_lim, hi_lim) = if at_zero < at_inf { (at_zero, at_inf) } else { (at_inf, at_zero) };
    if !(ratio > lo_lim && ratio < hi_lim) {
        return Err(Error::OutOfRange {
            ratio,
            lo: lo_lim,
            hi: hi_lim,
        });
    }
    let increasing = at_inf > at_zero;
    // g > 0 means c is too large.
    let g = |c: f64| {
        let d = phi_unchecked(c, z1, z2) - ratio;
        if increasing { d } else { -d }
    };

    let (mut lo, mut hi) = (opts.c_lo, opts.c_hi);
    let mut iterations = 0;
    let mut expansions = 0;
    while g(lo) > 0.0 {
        if expansions == opts.max_expansions {
            return Err(Error::OutOfRange { ratio, lo: lo_lim, hi: hi_lim });
        }
        hi = lo;
        lo *= 0.5_f64.powi(8);
        expansions += 1;
        iterations += 1;
    }
    expansions = 0;
    while g(hi) < 0.0 {
        if expansions == opts.max_expansions {
            return Err(Error::OutOfRange { ratio, lo: lo_lim, hi: hi_lim });
        }
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        iterations += 1;
    }

    let (mut g_lo, mut g_hi) = (g(lo), g(hi));
    while hi - lo > opts.bisection_tol.min(opts.bisection_tol * hi) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        iterations += 1;
        if gm == 0.0 {
            return Ok(PhiRoot { c: mid, iterations });
        }
        if gm < 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }

    let (mut best, mut g_best) = if g_lo.abs() < g_hi.abs() { (lo, g_lo) } else { (hi, g_hi) };
    let (mut a, mut ga, mut b, mut gb) = (lo, g_lo, hi, g_hi);
    for _ in 0..opts.secant_steps {
        if gb == ga {
            break;
        }
        let x = b - gb * (b - a) / (gb - ga);
        if !(x >= lo && x <= hi) {
            break;
        }
        let gx = g(x);
        iterations += 1;
        if gx.abs() < g_best.abs() {
            best = x;
            g_best = gx;
        }
        a = b;
        ga = gb;
        b = x;
        gb = gx;
    }
    Ok(PhiRoot { c: best, iterations })
}
