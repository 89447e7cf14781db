use crate::error::{Error, Result};
use crate::medium::{DepthMap, SpectralImage};
use crate::recovery_set::{differentiate, Direction};

use super::{PatternInstance, PatternKind};

/// Slack allowed on equality constraints and required on inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyTolerances {
    pub depth: f64,
    pub radiance: f64,
}

impl VerifyTolerances {
    /// Zero slack: equalities must hold exactly, inequalities strictly.
    pub fn exact() -> Self {
        Self { depth: 0.0, radiance: 0.0 }
    }
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { depth: 1e-9, radiance: 1e-9 }
    }
}

/// Outcome of one constraint.
///
/// For equalities `slack` is the largest violation (over bands where it
/// applies); for inequalities it is the smallest separation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    pub passed: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub kind: PatternKind,
    pub checks: Vec<ConstraintCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .failures()
            .iter()
            .map(|c| format!("{} (slack {:e})", c.name, c.slack))
            .collect();
        if failed.is_empty() {
            format!("{}: all {} constraints hold", self.kind, self.checks.len())
        } else {
            format!("{}: violated {}", self.kind, failed.join(", "))
        }
    }
}

struct Checker<'a> {
    inherent: &'a SpectralImage,
    depth: &'a DepthMap,
    idx: Vec<usize>,
    tol: VerifyTolerances,
    checks: Vec<ConstraintCheck>,
}

impl Checker<'_> {
    fn band_values(&self, a: usize) -> Vec<f64> {
        (0..self.inherent.grid().n_bands()).map(|k| self.inherent.get(self.idx[a], k)).collect()
    }

    fn z(&self, a: usize) -> f64 {
        self.depth.values()[self.idx[a]]
    }

    fn push(&mut self, name: String, passed: bool, slack: f64) {
        self.checks.push(ConstraintCheck { name, passed, slack });
    }

    fn radiance_zero(&mut self, a: usize) {
        let worst = self.band_values(a).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.push(format!("L{} = 0", a + 1), worst <= self.tol.radiance, worst);
    }

    fn radiance_equal(&mut self, a: usize, b: usize) {
        let worst = self
            .band_values(a)
            .iter()
            .zip(self.band_values(b))
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        self.push(format!("L{} = L{}", a + 1, b + 1), worst <= self.tol.radiance, worst);
    }

    fn radiance_distinct(&mut self, a: usize, b: usize) {
        let least = self
            .band_values(a)
            .iter()
            .zip(self.band_values(b))
            .fold(f64::INFINITY, |m, (x, y)| m.min((x - y).abs()));
        self.push(format!("L{} != L{}", a + 1, b + 1), least > self.tol.radiance, least);
    }

    fn depth_equal(&mut self, a: usize, b: usize) {
        let d = (self.z(a) - self.z(b)).abs();
        self.push(format!("z{} = z{}", a + 1, b + 1), d <= self.tol.depth, d);
    }

    fn depth_distinct(&mut self, a: usize, b: usize) {
        let d = (self.z(a) - self.z(b)).abs();
        self.push(format!("z{} != z{}", a + 1, b + 1), d > self.tol.depth, d);
    }

    fn depth_increasing(&mut self, a: usize, b: usize) {
        let d = self.z(b) - self.z(a);
        self.push(format!("z{} < z{}", a + 1, b + 1), d > self.tol.depth, d);
    }

    fn equal_offsets(&mut self) {
        let d = ((self.z(0) - self.z(1)) - (self.z(2) - self.z(3))).abs();
        self.push("z1 - z2 = z3 - z4".into(), d <= self.tol.depth, d);
    }

    fn derivatives(&mut self, pattern: &PatternInstance, second: bool) -> Result<()> {
        let [dx, dy] = pattern.direction.unwrap_or([1.0, 0.0]);
        let field = differentiate(self.inherent, self.depth, Direction::new(dx, dy)?, second)?;
        let n_bands = self.inherent.grid().n_bands();
        for a in 0..self.idx.len() {
            let i = self.idx[a];
            let worst = (0..n_bands).fold(0.0_f64, |m, k| m.max(field.d_f_band(k)[i].abs()));
            self.push(format!("dL{} = 0", a + 1), worst <= self.tol.radiance, worst);
            if second {
                let worst = (0..n_bands).fold(0.0_f64, |m, k| m.max(field.d2_f_band(k).unwrap()[i].abs()));
                self.push(format!("d2L{} = 0", a + 1), worst <= self.tol.radiance, worst);
            }
            let dz = field.d_z[i].abs();
            self.push(format!("dz{} != 0", a + 1), dz > self.tol.depth, dz);
        }
        Ok(())
    }
}

/// Checks a pattern's defining constraints against ground-truth inherent
/// radiance and depth.
pub fn verify_pattern(
    pattern: &PatternInstance,
    inherent: &SpectralImage,
    depth: &DepthMap,
    tol: &VerifyTolerances,
) -> Result<VerificationReport> {
    pattern.check_shape()?;
    if inherent.width() != depth.width() || inherent.height() != depth.height() {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{} but depth map is {}x{}",
            inherent.width(),
            inherent.height(),
            depth.width(),
            depth.height()
        )));
    }
    let idx = pattern
        .pixels
        .iter()
        .map(|p| p.index(inherent.width(), inherent.height()))
        .collect::<Result<Vec<_>>>()?;
    let mut ck = Checker {
        inherent,
        depth,
        idx,
        tol: *tol,
        checks: Vec::new(),
    };
    match pattern.kind {
        PatternKind::DarkPair => {
            ck.radiance_zero(0);
            ck.radiance_zero(1);
            ck.depth_distinct(0, 1);
        }
        PatternKind::Triple => {
            ck.radiance_equal(0, 1);
            ck.radiance_equal(1, 2);
            ck.depth_increasing(0, 1);
            ck.depth_increasing(1, 2);
        }
        PatternKind::Box => {
            ck.radiance_equal(0, 1);
            ck.radiance_equal(2, 3);
            ck.radiance_distinct(0, 2);
            ck.depth_equal(0, 2);
            ck.depth_equal(1, 3);
            ck.depth_distinct(0, 1);
        }
        PatternKind::Sticks => {
            ck.radiance_equal(0, 1);
            ck.radiance_equal(2, 3);
            ck.radiance_distinct(0, 2);
            ck.equal_offsets();
            ck.depth_distinct(0, 1);
        }
        PatternKind::TwoRegionDeriv => {
            ck.radiance_equal(0, 1);
            ck.depth_distinct(0, 1);
            ck.derivatives(pattern, false)?;
        }
        PatternKind::OneRegionDeriv2 => {
            ck.derivatives(pattern, true)?;
        }
    }
    Ok(VerificationReport {
        kind: pattern.kind,
        checks: ck.checks,
    })
}
