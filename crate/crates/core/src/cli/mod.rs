//! The `specrec` command line.
//!
//! Exit status: 0 on success, 1 for usage, parse and validation errors, 2
//! for numerical failures (degenerate bands, no consensus, singular Gram
//! matrix, overflow guard).

mod demo;

pub use demo::{run_demo, DEMOS};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::camera::{CameraModel, PixelIntensities};
use crate::error::{Error, Result};
use crate::io::{self, CubeFile, PatternManifest};
use crate::medium::{invert_model_reporting, DepthMap, MediumParams, SpectralImage};
use crate::patterns::{
    consistency_check, solve_pattern_with, BandOutcome, MediumEstimate, PhiOptions, SolveOptions,
};
use crate::recovery_set::{
    estimate_recovery_set, pattern_derivatives, Direction, RecoverySetOptions,
};
use crate::report::{radiance_errors, Report};
use crate::scene::{builtin_scene, builtin_scenes, render_with_seed, SceneSpec};

#[derive(Debug, Parser)]
#[command(name = "specrec", version, about = "Spectral color recovery in scattering media")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Depths closer than this are equal.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_z: f64,
    /// Fixed inlier tolerance for recovery sets; estimated from the data
    /// when omitted. Also the radiance tolerance of the necessity pair.
    #[arg(long, global = true)]
    pub tol_f: Option<f64>,
    /// Initial upper bracket for attenuation inversion [1/m].
    #[arg(long, global = true, default_value_t = 50.0)]
    pub c_max: f64,
    /// Noise seed for `render`, consensus seed for `estimate`, perturbation
    /// seed for `demo`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write per-band grayscale PGM images of every output cube.
    #[arg(long, global = true)]
    pub preview: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene into apparent and inherent cubes, truth medium and
    /// pattern manifest.
    Render {
        /// Scene file (TOML).
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        scene: Option<PathBuf>,
        /// Render a built-in scene instead.
        #[arg(long)]
        builtin: Option<String>,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Estimate the medium from recovery patterns or a recovery set.
    Estimate {
        /// Apparent cube with depth plane.
        cube: PathBuf,
        /// Pattern manifest (TOML).
        #[arg(long, required_unless_present = "recovery_set", conflicts_with = "recovery_set")]
        patterns: Option<PathBuf>,
        /// Use the majority recovery set instead of patterns.
        #[arg(long)]
        recovery_set: bool,
        #[arg(long, value_enum, default_value_t = Axis::X)]
        direction: Axis,
        /// Write the combined medium here.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// True medium, for error fields in the report.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// True inherent cube, for radiance error statistics.
        #[arg(long)]
        inherent: Option<PathBuf>,
        /// Relative agreement required between estimates.
        #[arg(long, default_value_t = 1e-8)]
        agree: f64,
    },
    /// Recover inherent radiance with a given medium.
    Recover {
        cube: PathBuf,
        medium: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Largest `c·z` inverted without a warning.
        #[arg(long, default_value_t = crate::medium::DEFAULT_MAX_OPTICAL_DEPTH)]
        max_cz: f64,
        /// Fraction of pixel-bands allowed over `--max-cz` before failing.
        #[arg(long, default_value_t = 0.0)]
        guard_fraction: f64,
        /// True inherent cube, for error statistics.
        #[arg(long)]
        inherent: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Project a cube onto camera channels.
    Project {
        cube: PathBuf,
        sensitivities: PathBuf,
        /// Per-pixel intensities (text).
        #[arg(long, short)]
        out: PathBuf,
        /// Also write `<out>.approx.cube` and `<out>.residual.txt`.
        #[arg(long)]
        best_approx: bool,
    },
    /// Run a demonstration: ill-posed-camera, ill-posed-medium, necessity.
    Demo { name: String },
    /// List built-in scenes, or print one as TOML.
    Scenes {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn direction(self) -> Direction {
        match self {
            Axis::X => Direction::X,
            Axis::Y => Direction::Y,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} threads: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    check_globals(g)?;
    match &cli.command {
        Command::Render { scene, builtin, out } => {
            let spec = match (scene, builtin) {
                (Some(path), _) => SceneSpec::from_file(path)?,
                (None, Some(name)) => builtin_scene(name)?,
                (None, None) => unreachable!("clap requires one"),
            };
            cmd_render(g, &spec, out)
        }
        Command::Estimate {
            cube,
            patterns,
            recovery_set: _,
            direction,
            out,
            report,
            truth,
            inherent,
            agree,
        } => cmd_estimate(
            g,
            &EstimateArgs {
                cube,
                patterns: patterns.as_deref(),
                direction: *direction,
                out: out.as_deref(),
                report: report.as_deref(),
                truth: truth.as_deref(),
                inherent: inherent.as_deref(),
                agree: *agree,
            },
        ),
        Command::Recover {
            cube,
            medium,
            out,
            max_cz,
            guard_fraction,
            inherent,
            report,
        } => cmd_recover(g, cube, medium, out, *max_cz, *guard_fraction, inherent.as_deref(), report.as_deref()),
        Command::Project {
            cube,
            sensitivities,
            out,
            best_approx,
        } => cmd_project(g, cube, sensitivities, out, *best_approx),
        Command::Demo { name } => {
            let mut text = String::new();
            let ok = run_demo(name, g.seed.unwrap_or(0), &mut text)?;
            print!("{text}");
            Ok(if ok { 0 } else { 2 })
        }
        Command::Scenes { show } => {
            match show {
                Some(name) => print!("{}", builtin_scene(name)?.to_toml()),
                None => {
                    for s in builtin_scenes() {
                        println!("{:<20} {}x{}  {}", s.name, s.width, s.height, s.description);
                    }
                }
            }
            Ok(0)
        }
    }
}

fn check_globals(g: &GlobalOpts) -> Result<()> {
    if !(g.tol_z >= 0.0) {
        return Err(Error::Usage(format!("--tol-z must be >= 0, got {}", g.tol_z)));
    }
    if let Some(t) = g.tol_f {
        if !(t > 0.0) {
            return Err(Error::Usage(format!("--tol-f must be > 0, got {t}")));
        }
    }
    if !(g.c_max > 0.0) || !g.c_max.is_finite() {
        return Err(Error::Usage(format!("--c-max must be positive, got {}", g.c_max)));
    }
    if g.threads == Some(0) {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    Ok(())
}

fn config(r: &mut Report, g: &GlobalOpts) {
    r.section("config");
    r.kv("tol_z", g.tol_z);
    r.kv("tol_f", g.tol_f.map_or("auto".to_string(), |t| t.to_string()));
    r.kv("c_max", g.c_max);
    r.kv("seed", g.seed.unwrap_or(0));
}

fn write_cube(g: &GlobalOpts, path: &Path, image: &SpectralImage, depth: Option<&DepthMap>) -> Result<()> {
    CubeFile::new(image.clone(), depth.cloned())?.write(path)?;
    if g.preview {
        let mut dir = path.as_os_str().to_owned();
        dir.push(".preview");
        io::write_preview(Path::new(&dir), image)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit_report(report: &Report, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_text(p, &report.to_string()),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn cmd_render(g: &GlobalOpts, spec: &SceneSpec, out: &Path) -> Result<i32> {
    let r = render_with_seed(spec, g.seed)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_cube(g, &out.join("apparent.cube"), &r.apparent, Some(&r.depth))?;
    write_cube(g, &out.join("inherent.cube"), &r.inherent, Some(&r.depth))?;
    io::write_medium(&out.join("truth.toml"), &r.truth)?;
    let manifest = PatternManifest::from_patterns(&r.patterns);
    write_text(&out.join("patterns.toml"), &manifest.to_toml())?;

    println!("scene = {}", r.name);
    println!("size = {}x{}x{}", r.apparent.width(), r.apparent.height(), r.apparent.grid().n_bands());
    match r.noise {
        Some(n) => println!("noise = {} sigma={} seed={} clamped={}", n.model.as_str(), n.sigma, n.seed, r.clamped),
        None => println!("noise = none"),
    }
    println!("patterns = {}", r.patterns.len());
    for (i, (p, v)) in r.patterns.iter().zip(&r.verification).enumerate() {
        println!("pattern.{i} = {} ({})", p.describe(), v.summary());
    }
    Ok(0)
}

struct EstimateArgs<'a> {
    cube: &'a Path,
    patterns: Option<&'a Path>,
    direction: Axis,
    out: Option<&'a Path>,
    report: Option<&'a Path>,
    truth: Option<&'a Path>,
    inherent: Option<&'a Path>,
    agree: f64,
}

fn cmd_estimate(g: &GlobalOpts, a: &EstimateArgs) -> Result<i32> {
    let cube = CubeFile::read(a.cube)?;
    let depth = cube.require_depth()?;
    let f = &cube.image;
    let truth = a.truth.map(io::read_medium).transpose()?;
    if let Some(t) = &truth {
        f.grid().ensure_same(t.grid())?;
    }

    let mut report = Report::new("estimate");
    config(&mut report, g);
    report.kv("cube", a.cube.display());

    let mut estimates = Vec::new();
    match a.patterns {
        Some(path) => {
            report.kv("mode", "patterns");
            report.kv("patterns", path.display());
            report.kv("agree", a.agree);
            let opts = SolveOptions {
                phi: PhiOptions {
                    c_hi: g.c_max,
                    depth_tol: g.tol_z,
                    ..PhiOptions::default()
                },
                ..SolveOptions::default()
            };
            for (i, mut p) in PatternManifest::read(path)?.instances()?.into_iter().enumerate() {
                if p.kind.needs_derivatives() && p.derivatives.is_none() {
                    let d = pattern_derivatives(&p, f, depth)?;
                    p = p.with_derivatives(d);
                }
                let mut e = solve_pattern_with(&p, f, depth, &opts)?;
                e.source = format!("pattern {i} ({})", p.describe());
                estimates.push(e);
            }
            if estimates.is_empty() {
                return Err(Error::Usage(format!("{} declares no patterns", path.display())));
            }
        }
        None => {
            let opts = RecoverySetOptions {
                eps_z: g.tol_z,
                tol: g.tol_f,
                seed: g.seed.unwrap_or(0),
                ..RecoverySetOptions::default()
            };
            report.kv("mode", "recovery-set");
            report.kv("direction", format!("{:?}", a.direction).to_lowercase());
            report.kv("exhaustive_limit", opts.exhaustive_limit);
            report.kv("random_anchors", opts.random_anchors);
            let rs = estimate_recovery_set(f, depth, a.direction.direction(), &opts)?;
            report.section("recovery-set");
            for (k, fit) in rs.fits.iter().enumerate() {
                match fit {
                    Ok(fit) => report.kv(
                        format_args!("fit.{k}"),
                        format_args!(
                            "slope={} intercept={} inliers={} eligible={} min_support={} tol={:e} residual_scale={:e} min_f_gap={:e} hypotheses={}",
                            fit.slope,
                            fit.intercept,
                            fit.inlier_count(),
                            fit.eligible,
                            fit.min_support,
                            fit.tol,
                            fit.residual_scale,
                            fit.min_f_gap,
                            fit.hypotheses
                        ),
                    ),
                    Err(e) => report.kv(format_args!("fit.{k}"), format_args!("failed: {e}")),
                };
            }
            if rs.fits.iter().all(|f| f.is_err()) {
                emit_report(&report, a.report)?;
                let first = rs.fits.into_iter().find_map(|f| f.err()).expect("at least one band");
                return Err(first);
            }
            estimates.push(rs.estimate);
        }
    }

    for (i, e) in estimates.iter().enumerate() {
        report.estimate(&format!("estimate.{i}"), e, truth.as_ref());
    }
    let combined = combine(&estimates);
    let usable = combined.bands.iter().any(|b| b.estimate().is_some());
    if estimates.len() >= 2 {
        report.section("consistency");
        match consistency_check(&estimates, a.agree) {
            Ok(c) => {
                report.kv("passed", c.passed);
                report.kv("max_discrepancy", format_args!("{:e}", c.max_discrepancy()));
            }
            Err(e) => {
                report.kv("passed", false);
                report.kv("error", e);
            }
        }
    }
    report.estimate("combined", &combined, truth.as_ref());

    if usable && combined.is_complete() {
        let est_medium = combined.to_medium()?;
        let reference = match a.inherent {
            Some(p) => Some(("inherent cube", CubeFile::read(p)?.image)),
            None => match &truth {
                Some(t) => Some(("truth medium", invert_model_reporting(f, depth, t, f64::INFINITY)?.0)),
                None => None,
            },
        };
        if let Some((against, reference)) = reference {
            let (recovered, _) = invert_model_reporting(f, depth, &est_medium, f64::INFINITY)?;
            report.section("radiance-error");
            report.kv("against", against);
            report.error_stats("rel", &radiance_errors(&recovered, &reference)?);
        }
    }
    emit_report(&report, a.report)?;

    if !usable {
        return Err(Error::AllBandsDegenerate);
    }
    if let Some(out) = a.out {
        if !combined.is_complete() {
            let missing = combined.degenerate_bands().into_iter().map(|(k, _)| k).collect();
            return Err(Error::IncompleteEstimate(missing));
        }
        io::write_medium(out, &combined.to_medium()?)?;
    }
    Ok(0)
}

/// Per band, the first estimate that succeeded.
fn combine(estimates: &[MediumEstimate]) -> MediumEstimate {
    let first = &estimates[0];
    let bands = (0..first.bands.len())
        .map(|k| {
            estimates
                .iter()
                .map(|e| e.bands[k])
                .find(|b| b.estimate().is_some())
                .unwrap_or(first.bands[k])
        })
        .collect::<Vec<BandOutcome>>();
    MediumEstimate {
        grid: first.grid,
        source: "first valid estimate per band".into(),
        bands,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_recover(
    g: &GlobalOpts,
    cube_path: &Path,
    medium_path: &Path,
    out: &Path,
    max_cz: f64,
    guard_fraction: f64,
    inherent: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<i32> {
    if !(0.0..=1.0).contains(&guard_fraction) {
        return Err(Error::Usage(format!("--guard-fraction must be in [0, 1], got {guard_fraction}")));
    }
    let cube = CubeFile::read(cube_path)?;
    let depth = cube.require_depth()?;
    let medium: MediumParams = io::read_medium(medium_path)?;
    let (l, hits) = invert_model_reporting(&cube.image, depth, &medium, max_cz)?;
    let total = cube.image.cube().len();
    let fraction = hits.len() as f64 / total as f64;
    if !hits.is_empty() {
        eprintln!(
            "warning: {} of {total} pixel-bands exceed c*z = {max_cz}; their radiance is amplified by up to e^{:.1}",
            hits.len(),
            hits.iter().fold(0.0_f64, |m, h| m.max(h.cz))
        );
        if fraction > guard_fraction {
            let h = hits[0];
            return Err(Error::OverflowGuard {
                pixel: h.pixel,
                band: h.band,
                cz: h.cz,
                bound: max_cz,
            });
        }
    }
    write_cube(g, out, &l, Some(depth))?;

    let mut report = Report::new("recover");
    config(&mut report, g);
    report.kv("cube", cube_path.display());
    report.kv("medium", medium_path.display());
    report.kv("max_cz", max_cz);
    report.kv("guard_fraction", guard_fraction);
    report.section("recover");
    report.kv("guard_hits", hits.len());
    if let Some(p) = inherent {
        let truth = CubeFile::read(p)?;
        report.section("radiance-error");
        report.kv("against", p.display());
        report.error_stats("rel", &radiance_errors(&l, &truth.image)?);
    }
    if report_path.is_some() || inherent.is_some() {
        emit_report(&report, report_path)?;
    }
    Ok(0)
}

fn cmd_project(g: &GlobalOpts, cube_path: &Path, sens_path: &Path, out: &Path, best_approx: bool) -> Result<i32> {
    let cube = CubeFile::read(cube_path)?;
    let cam: CameraModel = io::read_sensitivities(sens_path)?;
    let im = &cube.image;
    if cam.grid() != im.grid() {
        return Err(Error::GridMismatch);
    }
    let (w, n) = (im.width(), im.pixels());
    let intensities: Vec<PixelIntensities> = (0..n)
        .map(|i| cam.project(&im.pixel_spectrum(i)))
        .collect::<Result<_>>()?;

    let mut text = String::new();
    writeln!(text, "# {} {} {}", im.width(), im.height(), cam.channels()).unwrap();
    for (i, p) in intensities.iter().enumerate() {
        let vals: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
        writeln!(text, "{} {} {}", i % w, i / w, vals.join(" ")).unwrap();
    }
    write_text(out, &text)?;
    println!("channels = {}", cam.channels());
    println!("gram_condition = {:e}", cam.condition_number());

    if best_approx {
        let n_bands = im.grid().n_bands();
        let mut approx = vec![0.0; im.cube().len()];
        let mut residual = String::new();
        let mut worst_orth = 0.0_f64;
        writeln!(residual, "# x y residual_norm").unwrap();
        for (i, p) in intensities.iter().enumerate() {
            let f = im.pixel_spectrum(i);
            let recon = cam.reconstruct(&cam.best_approx(p)?)?;
            for k in 0..n_bands {
                approx[k * n + i] = recon.values()[k];
            }
            let r = f.add_scaled(-1.0, &recon)?;
            let pr = cam.project(&r)?;
            let scale = r.norm().max(f64::MIN_POSITIVE);
            for (s, v) in cam.sensitivities().iter().zip(pr.values()) {
                worst_orth = worst_orth.max(v.abs() / (scale * s.norm()));
            }
            writeln!(residual, "{} {} {}", i % w, i / w, r.norm()).unwrap();
        }
        let approx = SpectralImage::new(im.width(), im.height(), *im.grid(), im.kind(), approx)?;
        write_cube(g, &with_suffix(out, ".approx.cube"), &approx, cube.depth.as_ref())?;
        write_text(&with_suffix(out, ".residual.txt"), &residual)?;
        println!("max_residual_channel_overlap = {worst_orth:e}");
    }
    Ok(0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
