//! Plain-text reports: `key = value` lines grouped in `[section]` blocks.
//!
//! Every report starts with the crate version and the command, followed by
//! a `[config]` block with every tolerance and seed that influenced the
//! result. Error fields appear only when ground truth was supplied.

use std::fmt::{self, Display};

use crate::error::Result;
use crate::medium::{MediumParams, SpectralImage};
use crate::patterns::{BandOutcome, MediumEstimate};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.kv("version", env!("CARGO_PKG_VERSION"));
        r.kv("command", command);
        r
    }

    pub fn section(&mut self, name: impl Display) -> &mut Self {
        self.lines.push(String::new());
        self.lines.push(format!("[{name}]"));
        self
    }

    pub fn kv(&mut self, key: impl Display, value: impl Display) -> &mut Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }

    /// Lines of the report, without the trailing newline.
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Looks up the first value of `key` inside `section` (`""` for the
    /// preamble).
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        let mut current = "";
        for l in &self.lines {
            if let Some(s) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = s;
            } else if current == section {
                if let Some(v) = l.strip_prefix(key).and_then(|v| v.strip_prefix(" = ")) {
                    return Some(v);
                }
            }
        }
        None
    }

    /// Adds one estimate: per-band values, degeneracies and, given the true
    /// medium, relative errors.
    pub fn estimate(&mut self, name: &str, est: &MediumEstimate, truth: Option<&MediumParams>) -> &mut Self {
        self.section(name);
        self.kv("source", &est.source);
        let degenerate = est.degenerate_bands();
        self.kv("bands", est.bands.len());
        self.kv("degenerate_bands", degenerate.len());
        let (mut worst_c, mut worst_b) = (0.0_f64, 0.0_f64);
        for (k, band) in est.bands.iter().enumerate() {
            let lambda = est.grid.wavelength(k);
            match band {
                BandOutcome::Estimated(e) => {
                    self.kv(format_args!("band.{k}"), format_args!(
                        "lambda={lambda} c={} b={} b_spread={:e} c_spread={:e} iterations={} model_violation={}",
                        e.c, e.b, e.b_spread, e.c_spread, e.iterations, e.model_violation
                    ));
                    if let Some(t) = truth {
                        let ec = rel(e.c, t.c().values()[k]);
                        let eb = rel(e.b, t.b().values()[k]);
                        worst_c = worst_c.max(ec);
                        worst_b = worst_b.max(eb);
                        self.kv(format_args!("band.{k}.error"), format_args!("c={ec:e} b={eb:e}"));
                    }
                }
                BandOutcome::Degenerate(d) => {
                    self.kv(format_args!("band.{k}"), format_args!("lambda={lambda} degenerate={d}"));
                }
            }
        }
        if truth.is_some() {
            self.kv("max_rel_error.c", format_args!("{worst_c:e}"));
            self.kv("max_rel_error.b", format_args!("{worst_b:e}"));
        }
        self
    }

    pub fn error_stats(&mut self, prefix: &str, s: &ErrorStats) -> &mut Self {
        self.kv(format_args!("{prefix}.max"), format_args!("{:e}", s.max));
        self.kv(format_args!("{prefix}.median"), format_args!("{:e}", s.median));
        self.kv(format_args!("{prefix}.p95"), format_args!("{:e}", s.p95));
        self
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

/// `|a − b| / |b|`, or `|a|` when `b` is zero.
pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub max: f64,
    pub median: f64,
    pub p95: f64,
    pub count: usize,
}

impl ErrorStats {
    /// Nearest-rank statistics of `values`; all zero when empty.
    pub fn of(mut values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Self { max: 0.0, median: 0.0, p95: 0.0, count: 0 };
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let rank = |q: f64| values[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            max: values[n - 1],
            median: rank(0.5),
            p95: rank(0.95),
            count: n,
        }
    }
}

/// Per pixel-band relative error of `recovered` against `reference`.
///
/// The denominator is `max(|L|, 1e-3 · max |L|)` so that dark pixels do not
/// turn round-off into huge ratios.
pub fn radiance_errors(recovered: &SpectralImage, reference: &SpectralImage) -> Result<ErrorStats> {
    recovered.grid().ensure_same(reference.grid())?;
    if recovered.pixels() != reference.pixels() {
        return Err(crate::Error::ShapeMismatch("recovered and reference cubes differ in size".into()));
    }
    let peak = reference.cube().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = if peak > 0.0 { 1e-3 * peak } else { 1.0 };
    let errs = recovered
        .cube()
        .iter()
        .zip(reference.cube())
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .collect();
    Ok(ErrorStats::of(errs))
}
