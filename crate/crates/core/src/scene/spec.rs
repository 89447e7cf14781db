use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::MediumParams;
use crate::patterns::{PatternInstance, PatternKind, Pixel};
use crate::spectral::{SpectralGrid, Spectrum};

/// Most knots a material reflectance may have.
pub const MAX_MATERIAL_KNOTS: usize = 6;

/// A scene description, read from TOML.
///
/// See `scenes/annotated.toml` in the crate for a complete example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub grid: GridSpec,
    /// Flat 1.0 when omitted.
    #[serde(default)]
    pub illuminant: SpectrumSpec,
    pub medium: MediumSpec,
    pub materials: Vec<MaterialSpec>,
    pub regions: Vec<RegionSpec>,
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub patterns: Vec<PatternSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_bands: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = SpectralGrid::visible();
        Self {
            lambda_min: g.lambda_min(),
            lambda_max: g.lambda_max(),
            n_bands: g.n_bands(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.lambda_min, self.lambda_max, self.n_bands)
    }
}

/// Either one value for every band or piecewise-linear `[wavelength, value]`
/// knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumSpec {
    Flat(f64),
    Knots(Vec<[f64; 2]>),
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec::Flat(1.0)
    }
}

impl SpectrumSpec {
    pub fn build(&self, grid: SpectralGrid) -> Result<Spectrum> {
        match self {
            SpectrumSpec::Flat(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidScene(format!("non-finite spectrum value {v}")));
                }
                Ok(Spectrum::constant(grid, *v))
            }
            SpectrumSpec::Knots(k) => {
                if k.is_empty() {
                    return Err(Error::InvalidScene("spectrum needs at least one knot".into()));
                }
                let knots: Vec<(f64, f64)> = k.iter().map(|p| (p[0], p[1])).collect();
                if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::InvalidScene("spectrum knots must have increasing wavelengths".into()));
                }
                Spectrum::piecewise_linear(grid, &knots)
            }
        }
    }

    fn knot_count(&self) -> usize {
        match self {
            SpectrumSpec::Flat(_) => 1,
            SpectrumSpec::Knots(k) => k.len(),
        }
    }
}

/// A preset name or explicit `c` and `b` spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub preset: Option<String>,
    pub c: Option<SpectrumSpec>,
    pub b: Option<SpectrumSpec>,
}

impl MediumSpec {
    pub fn build(&self, grid: SpectralGrid) -> Result<MediumParams> {
        match (&self.preset, &self.c, &self.b) {
            (Some(p), None, None) => MediumParams::preset(p, grid),
            (None, Some(c), Some(b)) => MediumParams::new(c.build(grid)?, b.build(grid)?),
            _ => Err(Error::InvalidScene(
                "medium needs either `preset` or both `c` and `b`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    /// Values in `[0, 1]`, at most six knots.
    pub reflectance: SpectrumSpec,
}

/// Half-open rectangle `[x0, x1) × [y0, y1)` of one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub material: String,
    pub depth: DepthSpec,
    /// Spatially varying brightness; such a region is not uniformly shaded.
    pub shading: Option<ShadingSpec>,
}

/// `z = z0 + gx·x + gy·y` in absolute image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSpec {
    pub z0: f64,
    #[serde(default)]
    pub gx: f64,
    #[serde(default)]
    pub gy: f64,
}

impl DepthSpec {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.z0 + self.gx * x as f64 + self.gy * y as f64
    }
}

/// Multiplies radiance by `1 + amplitude·sin(kx·x + ky·y + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadingSpec {
    pub amplitude: f64,
    pub kx: f64,
    pub ky: f64,
    #[serde(default)]
    pub phase: f64,
}

impl ShadingSpec {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        1.0 + self.amplitude * (self.kx * x as f64 + self.ky * y as f64 + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    Additive,
    Relative,
}

impl NoiseModel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::Additive => "additive",
            NoiseModel::Relative => "relative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// An embedded pattern declaration: a kind name and `[x, y]` pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub kind: String,
    pub pixels: Vec<[usize; 2]>,
    pub direction: Option<[f64; 2]>,
    pub label: Option<String>,
}

impl PatternSpec {
    pub fn build(&self) -> Result<PatternInstance> {
        let kind = PatternKind::from_name(&self.kind)
            .ok_or_else(|| Error::InvalidScene(format!("unknown pattern kind '{}'", self.kind)))?;
        let pixels = self.pixels.iter().map(|p| Pixel::new(p[0], p[1])).collect();
        let mut p = PatternInstance::new(kind, pixels)?;
        if let Some(d) = self.direction {
            p = p.with_direction(d);
        }
        if let Some(l) = &self.label {
            p = p.with_label(l.clone());
        }
        Ok(p)
    }
}

/// 1-based line of a byte offset.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

pub(crate) fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| line_of(text, s.start));
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.message().to_string(),
    }
}

impl SceneSpec {
    /// Parses TOML text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| toml_error(origin, text, &e))?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs serialize")
    }

    /// Checks every invariant that does not need rendering: dimensions,
    /// knots, reflectance range, region tiling and positive depth.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("width and height must be positive".into()));
        }
        let grid = self.grid.build()?;
        self.illuminant.build(grid)?;
        self.medium.build(grid)?;
        for m in &self.materials {
            if m.reflectance.knot_count() > MAX_MATERIAL_KNOTS {
                return Err(Error::InvalidScene(format!(
                    "material '{}' has {} knots, at most {MAX_MATERIAL_KNOTS} allowed",
                    m.name,
                    m.reflectance.knot_count()
                )));
            }
            let r = m.reflectance.build(grid)?;
            if r.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidScene(format!(
                    "material '{}' reflectance leaves [0, 1]",
                    m.name
                )));
            }
        }
        let mut owner = vec![usize::MAX; self.width * self.height];
        for (r_idx, r) in self.regions.iter().enumerate() {
            if r.x0 >= r.x1 || r.y0 >= r.y1 || r.x1 > self.width || r.y1 > self.height {
                return Err(Error::InvalidScene(format!(
                    "region {r_idx} [{}, {}) x [{}, {}) is empty or outside the {}x{} image",
                    r.x0, r.x1, r.y0, r.y1, self.width, self.height
                )));
            }
            if !self.materials.iter().any(|m| m.name == r.material) {
                return Err(Error::InvalidScene(format!(
                    "region {r_idx} uses unknown material '{}'",
                    r.material
                )));
            }
            for y in r.y0..r.y1 {
                for x in r.x0..r.x1 {
                    let o = &mut owner[y * self.width + x];
                    if *o != usize::MAX {
                        return Err(Error::CoverageOverlap { x, y });
                    }
                    *o = r_idx;
                    let z = r.depth.at(x, y);
                    if !(z > 0.0) || !z.is_finite() {
                        return Err(Error::InvalidDepth(format!(
                            "region {r_idx} has depth {z} at ({x}, {y}); depth must be positive"
                        )));
                    }
                    if let Some(s) = r.shading {
                        if !(s.at(x, y) >= 0.0) {
                            return Err(Error::InvalidScene(format!(
                                "region {r_idx} shading is negative at ({x}, {y})"
                            )));
                        }
                    }
                }
            }
        }
        if let Some(i) = owner.iter().position(|o| *o == usize::MAX) {
            return Err(Error::CoverageGap {
                x: i % self.width,
                y: i / self.width,
            });
        }
        if let Some(n) = &self.noise {
            if !(n.sigma >= 0.0) || !n.sigma.is_finite() {
                return Err(Error::InvalidScene(format!("noise sigma must be >= 0, got {}", n.sigma)));
            }
        }
        for p in &self.patterns {
            p.build()?;
        }
        Ok(())
    }

    /// Index of the region covering each pixel. Call after [`validate`].
    ///
    /// [`validate`]: SceneSpec::validate
    pub(crate) fn region_map(&self) -> Vec<usize> {
        let mut owner = vec![0; self.width * self.height];
        for (r_idx, r) in self.regions.iter().enumerate() {
            for y in r.y0..r.y1 {
                for x in r.x0..r.x1 {
                    owner[y * self.width + x] = r_idx;
                }
            }
        }
        owner
    }
}
