use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants fall in two families: input problems (bad ranges, mismatched
/// grids, unparseable files) and numerical failures (singular systems,
/// degenerate bands, missing consensus). [`Error::exit_code`] maps them to
/// the stable CLI exit statuses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid wavelength range: lambda_min={lambda_min}, lambda_max={lambda_max}, n_bands={n_bands}")]
    InvalidRange {
        lambda_min: f64,
        lambda_max: f64,
        n_bands: usize,
    },
    #[error("spectra live on different wavelength grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("singular Gram matrix: sensitivities are linearly dependent (condition number {condition:e})")]
    SingularGram { condition: f64 },
    #[error("ill-conditioned Gram matrix: condition number {condition:e} exceeds bound {bound:e}")]
    IllConditionedGram { condition: f64, bound: f64 },
    #[error("orthogonal complement of the camera sensitivities is trivial on this grid")]
    TrivialComplement,
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("overflow guard: c*z = {cz} exceeds {bound} at pixel {pixel}, band {band}")]
    OverflowGuard {
        pixel: usize,
        band: usize,
        cz: f64,
        bound: f64,
    },
    #[error("degenerate depths: |{z1} - {z2}| is below tolerance")]
    DegenerateDepths { z1: f64, z2: f64 },
    #[error("attenuation must be positive, got {0}")]
    InvalidAttenuation(f64),
    #[error("ratio {ratio} outside the attainable open interval ({lo}, {hi})")]
    OutOfRange { ratio: f64, lo: f64, hi: f64 },
    #[error("pattern {kind} needs {expected} pixels, got {got}")]
    PatternShape {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("pattern {kind} needs per-pixel derivatives")]
    MissingDerivatives { kind: &'static str },
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    PixelOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("image too small for differencing: need at least 3 pixels along the direction, got {size}")]
    TooSmallImage { size: usize },
    #[error("invalid direction ({dx}, {dy}): must be a finite nonzero vector")]
    InvalidDirection { dx: f64, dy: f64 },
    #[error("band {band} out of range (n_bands = {n_bands})")]
    BandOutOfRange { band: usize, n_bands: usize },
    #[error("no consensus: best line supported by {best} points, {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("non-physical fit: slope {slope} implies non-positive attenuation")]
    NonPhysical { slope: f64 },
    #[error("only {eligible} pixels have |dz| above tolerance, {required} required")]
    TooFewEligible { eligible: usize, required: usize },
    #[error("atypical scene: no equal-depth pixel pair with distinct inherent radiance")]
    AtypicalScene,
    #[error("non-positive ratio {0} under logarithm")]
    NonPositiveRatio(f64),
    #[error("consistency check needs at least two estimates, got {0}")]
    Arity(usize),
    #[error("pixel ({x}, {y}) is not covered by any region")]
    CoverageGap { x: usize, y: usize },
    #[error("pixel ({x}, {y}) is covered by more than one region")]
    CoverageOverlap { x: usize, y: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("embedded pattern {index} violates its constraints: {detail}")]
    PatternViolation { index: usize, detail: String },
    #[error("unknown built-in scene '{0}'")]
    UnknownScene(String),
    #[error("unknown demo '{0}'")]
    UnknownDemo(String),
    #[error("cube has no depth plane")]
    MissingDepth,
    #[error("every band is degenerate; no medium estimate available")]
    AllBandsDegenerate,
    #[error("no estimate for bands {0:?}; refusing to write a partial medium")]
    IncompleteEstimate(Vec<usize>),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// CLI exit status: 1 for usage, parse and validation problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularGram { .. }
            | Error::IllConditionedGram { .. }
            | Error::TrivialComplement
            | Error::OverflowGuard { .. }
            | Error::DegenerateDepths { .. }
            | Error::InvalidAttenuation(_)
            | Error::OutOfRange { .. }
            | Error::NoConsensus { .. }
            | Error::NonPhysical { .. }
            | Error::TooFewEligible { .. }
            | Error::AtypicalScene
            | Error::NonPositiveRatio(_)
            | Error::AllBandsDegenerate
            | Error::IncompleteEstimate(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
