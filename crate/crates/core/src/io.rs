//! File formats: spectral cubes, media, pattern manifests, camera
//! sensitivities and grayscale previews.
//!
//! # Spectral cubes (`SPECCUBE/1`)
//!
//! A text header of `key value` lines, terminated by a line `end`:
//!
//! ```text
//! SPECCUBE/1
//! width 24
//! height 12
//! n_bands 31
//! lambda_min 400
//! lambda_max 700
//! kind apparent
//! depth 1
//! end
//! ```
//!
//! followed immediately by `n_bands · width · height` little-endian `f32`
//! values, band after band, pixels row-major within a band. When `depth` is
//! `1` a row-major `f32` depth plane follows. Nothing may come after.
//!
//! # Sensitivities
//!
//! Plain text. Blank lines and everything after `#` are ignored. The first
//! remaining line is `n_channels n_bands lambda_min lambda_max`; each of the
//! next `n_channels` lines holds exactly `n_bands` decimal values, one
//! channel per line. Values must be finite and non-negative.
//!
//! # Media and pattern manifests
//!
//! TOML; see [`MediumFile`] and [`PatternManifest`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::medium::{DepthMap, ImageKind, MediumParams, SpectralImage};
use crate::patterns::{PatternInstance, PatternKind, Pixel, PixelDerivatives};
use crate::scene::toml_error;
use crate::spectral::{SpectralGrid, Spectrum};

pub const CUBE_MAGIC: &str = "SPECCUBE/1";

/// A cube as stored on disk, with its optional depth plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeFile {
    pub image: SpectralImage,
    pub depth: Option<DepthMap>,
}

impl CubeFile {
    pub fn new(image: SpectralImage, depth: Option<DepthMap>) -> Result<Self> {
        if let Some(d) = &depth {
            if d.width() != image.width() || d.height() != image.height() {
                return Err(Error::ShapeMismatch(format!(
                    "image is {}x{} but depth map is {}x{}",
                    image.width(),
                    image.height(),
                    d.width(),
                    d.height()
                )));
            }
        }
        Ok(Self { image, depth })
    }

    pub fn require_depth(&self) -> Result<&DepthMap> {
        self.depth.as_ref().ok_or(Error::MissingDepth)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let im = &self.image;
        let g = im.grid();
        let header = format!(
            "{CUBE_MAGIC}\nwidth {}\nheight {}\nn_bands {}\nlambda_min {}\nlambda_max {}\nkind {}\ndepth {}\nend\n",
            im.width(),
            im.height(),
            g.n_bands(),
            g.lambda_min(),
            g.lambda_max(),
            im.kind().as_str(),
            u8::from(self.depth.is_some())
        );
        let planes = im.cube().len() + self.depth.as_ref().map_or(0, |d| d.values().len());
        let mut out = Vec::with_capacity(header.len() + 4 * planes);
        out.extend_from_slice(header.as_bytes());
        let depth = self.depth.as_ref().map_or(&[][..], |d| d.values());
        for (i, v) in im.cube().iter().chain(depth).enumerate() {
            let x = *v as f32;
            if !x.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    /// Parses a cube; `origin` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|b| *b == b'\n')
                .ok_or_else(|| err(lines.len() + 1, "header ends before `end`".into()))?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|_| err(lines.len() + 1, "header is not UTF-8".into()))?
                .trim_end_matches('\r');
            pos += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line.to_string());
            if lines.len() > 64 {
                return Err(err(lines.len(), "header too long".into()));
            }
        }
        if lines.first().map(String::as_str) != Some(CUBE_MAGIC) {
            return Err(err(1, format!("expected magic `{CUBE_MAGIC}`")));
        }

        let mut width = None;
        let mut height = None;
        let mut n_bands = None;
        let mut lambda_min = None;
        let mut lambda_max = None;
        let mut kind = None;
        let mut has_depth = None;
        for (i, line) in lines.iter().enumerate().skip(1) {
            let n = i + 1;
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| err(n, format!("expected `key value`, got `{line}`")))?;
            let value = value.trim();
            let int = || value.parse::<usize>().map_err(|_| err(n, format!("bad integer `{value}` for {key}")));
            let float = || value.parse::<f64>().map_err(|_| err(n, format!("bad number `{value}` for {key}")));
            let slot_taken = match key {
                "width" => width.replace(int()?).is_some(),
                "height" => height.replace(int()?).is_some(),
                "n_bands" => n_bands.replace(int()?).is_some(),
                "lambda_min" => lambda_min.replace(float()?).is_some(),
                "lambda_max" => lambda_max.replace(float()?).is_some(),
                "kind" => {
                    let k = match value {
                        "apparent" => ImageKind::Apparent,
                        "inherent" => ImageKind::Inherent,
                        _ => return Err(err(n, format!("unknown kind `{value}`"))),
                    };
                    kind.replace(k).is_some()
                }
                "depth" => {
                    let d = match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(err(n, format!("depth flag must be 0 or 1, got `{value}`"))),
                    };
                    has_depth.replace(d).is_some()
                }
                _ => return Err(err(n, format!("unknown header key `{key}`"))),
            };
            if slot_taken {
                return Err(err(n, format!("duplicate header key `{key}`")));
            }
        }
        let last = lines.len() + 1;
        let missing = |k: &str| err(last, format!("header lacks `{k}`"));
        let width = width.ok_or_else(|| missing("width"))?;
        let height = height.ok_or_else(|| missing("height"))?;
        let n_bands = n_bands.ok_or_else(|| missing("n_bands"))?;
        let grid = SpectralGrid::new(
            lambda_min.ok_or_else(|| missing("lambda_min"))?,
            lambda_max.ok_or_else(|| missing("lambda_max"))?,
            n_bands,
        )?;
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let has_depth = has_depth.unwrap_or(false);

        let n = width
            .checked_mul(height)
            .filter(|n| *n > 0)
            .ok_or_else(|| err(last, "image dimensions must be positive".into()))?;
        let values = n * (n_bands + usize::from(has_depth));
        let payload = &bytes[pos..];
        if payload.len() != 4 * values {
            return Err(err(
                last,
                format!("payload has {} bytes, header implies {}", payload.len(), 4 * values),
            ));
        }
        let floats: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let (cube, z) = floats.split_at(n * n_bands);
        let image = SpectralImage::new(width, height, grid, kind, cube.to_vec())?;
        let depth = has_depth.then(|| DepthMap::new(width, height, z.to_vec())).transpose()?;
        Self::new(image, depth)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes()?)
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A medium on disk:
///
/// ```toml
/// lambda_min = 400.0
/// lambda_max = 700.0
/// n_bands = 31
/// c = [0.45, ...]   # one value per band, 1/m
/// b = [0.6, ...]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumFile {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_bands: usize,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
}

impl MediumFile {
    pub fn from_medium(m: &MediumParams) -> Self {
        let g = m.grid();
        Self {
            lambda_min: g.lambda_min(),
            lambda_max: g.lambda_max(),
            n_bands: g.n_bands(),
            c: m.c().values().to_vec(),
            b: m.b().values().to_vec(),
        }
    }

    pub fn to_medium(&self) -> Result<MediumParams> {
        let grid = SpectralGrid::new(self.lambda_min, self.lambda_max, self.n_bands)?;
        MediumParams::new(Spectrum::new(grid, self.c.clone())?, Spectrum::new(grid, self.b.clone())?)
    }
}

pub fn read_medium(path: &Path) -> Result<MediumParams> {
    let text = read_text(path)?;
    let file: MediumFile = toml::from_str(&text).map_err(|e| toml_error(path, &text, &e))?;
    file.to_medium()
}

pub fn medium_to_string(m: &MediumParams) -> String {
    toml::to_string(&MediumFile::from_medium(m)).expect("media serialize")
}

pub fn write_medium(path: &Path, m: &MediumParams) -> Result<()> {
    write_bytes(path, medium_to_string(m).as_bytes())
}

/// A list of pattern declarations:
///
/// ```toml
/// [[pattern]]
/// kind = "two-region-deriv"
/// pixels = [[5, 3], [18, 3]]
/// direction = [1.0, 0.0]        # optional
/// label = "sand"                # optional
///
/// [[pattern.derivatives]]       # optional, one table per pixel
/// d_f = [...]                   # per band
/// d_z = 0.125
/// d2_f = [...]                  # one-region-deriv2 only
/// d2_z = 0.0
/// ```
///
/// Derivative kinds without `derivatives` are differenced from the cube.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternManifest {
    #[serde(default)]
    pub pattern: Vec<PatternEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEntry {
    pub kind: String,
    pub pixels: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derivatives: Vec<DerivativeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeEntry {
    pub d_f: Vec<f64>,
    pub d_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2_f: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2_z: Option<f64>,
}

impl PatternManifest {
    pub fn from_patterns(patterns: &[PatternInstance]) -> Self {
        let pattern = patterns
            .iter()
            .map(|p| PatternEntry {
                kind: p.kind.name().to_string(),
                pixels: p.pixels.iter().map(|q| [q.x, q.y]).collect(),
                direction: p.direction,
                label: p.label.clone(),
                derivatives: p
                    .derivatives
                    .iter()
                    .flatten()
                    .map(|d| DerivativeEntry {
                        d_f: d.d_f.clone(),
                        d_z: d.d_z,
                        d2_f: d.d2_f.clone(),
                        d2_z: d.d2_z,
                    })
                    .collect(),
            })
            .collect();
        Self { pattern }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(origin, text, &e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifests serialize")
    }

    pub fn instances(&self) -> Result<Vec<PatternInstance>> {
        self.pattern
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let kind = PatternKind::from_name(&e.kind)
                    .ok_or_else(|| Error::Usage(format!("pattern {i}: unknown kind '{}'", e.kind)))?;
                let pixels = e.pixels.iter().map(|p| Pixel::new(p[0], p[1])).collect();
                let mut p = PatternInstance::new(kind, pixels)?;
                if let Some(d) = e.direction {
                    p = p.with_direction(d);
                }
                if let Some(l) = &e.label {
                    p = p.with_label(l.clone());
                }
                if !e.derivatives.is_empty() {
                    if e.derivatives.len() != p.pixels.len() {
                        return Err(Error::Usage(format!(
                            "pattern {i}: {} derivative entries for {} pixels",
                            e.derivatives.len(),
                            p.pixels.len()
                        )));
                    }
                    let d = e
                        .derivatives
                        .iter()
                        .map(|d| PixelDerivatives {
                            d_f: d.d_f.clone(),
                            d_z: d.d_z,
                            d2_f: d.d2_f.clone(),
                            d2_z: d.d2_z,
                        })
                        .collect();
                    p = p.with_derivatives(d);
                }
                Ok(p)
            })
            .collect()
    }
}

/// Parses a sensitivity file into a camera.
pub fn parse_sensitivities(text: &str, origin: &Path) -> Result<CameraModel> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hn, header) = rows.next().ok_or_else(|| err(1, "empty sensitivity file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(err(hn, "header must be `n_channels n_bands lambda_min lambda_max`".into()));
    }
    let n_channels: usize = fields[0].parse().map_err(|_| err(hn, format!("bad channel count `{}`", fields[0])))?;
    let n_bands: usize = fields[1].parse().map_err(|_| err(hn, format!("bad band count `{}`", fields[1])))?;
    let lmin: f64 = fields[2].parse().map_err(|_| err(hn, format!("bad lambda_min `{}`", fields[2])))?;
    let lmax: f64 = fields[3].parse().map_err(|_| err(hn, format!("bad lambda_max `{}`", fields[3])))?;
    if n_channels == 0 {
        return Err(err(hn, "need at least one channel".into()));
    }
    let grid = SpectralGrid::new(lmin, lmax, n_bands).map_err(|e| err(hn, e.to_string()))?;
    let mut sens = Vec::with_capacity(n_channels);
    for j in 0..n_channels {
        let (n, row) = rows
            .next()
            .ok_or_else(|| err(text.lines().count() + 1, format!("missing row for channel {j}")))?;
        let values = row
            .split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(err(n, format!("sensitivity `{t}` is not a finite non-negative number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != n_bands {
            return Err(err(n, format!("channel {j} has {} values, expected {n_bands}", values.len())));
        }
        sens.push(Spectrum::new(grid, values)?);
    }
    if let Some((n, _)) = rows.next() {
        return Err(err(n, format!("more rows than the {n_channels} declared channels")));
    }
    CameraModel::new(sens)
}

pub fn read_sensitivities(path: &Path) -> Result<CameraModel> {
    parse_sensitivities(&read_text(path)?, path)
}

pub fn sensitivities_to_string(camera: &CameraModel) -> String {
    let g = camera.grid();
    let mut s = format!("{} {} {} {}\n", camera.channels(), g.n_bands(), g.lambda_min(), g.lambda_max());
    for sens in camera.sensitivities() {
        let row: Vec<String> = sens.values().iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Binary PGM (`P5`) of one plane, scaled linearly so `0` is black and the
/// plane maximum is white.
pub fn pgm(width: usize, height: usize, plane: &[f64]) -> Vec<u8> {
    let max = plane.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(plane.iter().map(|v| {
        if max > 0.0 {
            (v.max(0.0) / max * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}

/// Writes `band-NN.pgm` for every band into `dir`.
pub fn write_preview(dir: &Path, image: &SpectralImage) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for k in 0..image.grid().n_bands() {
        let path = dir.join(format!("band-{k:02}.pgm"));
        write_bytes(&path, &pgm(image.width(), image.height(), image.band(k)))?;
    }
    Ok(())
}
