use std::path::Path;
use std::process::{Command, Output};

use spectral_recovery::io::{self, CubeFile};
use spectral_recovery::medium::MediumParams;

fn specrec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("specrec runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn render(name: &str, dir: &Path) {
    let out = specrec(&["render", "--builtin", name, "-o", name], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specrec(&[], dir.path())), 1);
    assert_eq!(code(&specrec(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&specrec(&["render", "--builtin", "nope", "-o", "x"], dir.path())), 1);
    assert_eq!(code(&specrec(&["demo", "nope"], dir.path())), 1);
    assert_eq!(code(&specrec(&["scenes", "--tol-z", "abc"], dir.path())), 1);
    assert_eq!(code(&specrec(&["--help"], dir.path())), 0);
}

#[test]
fn malformed_scene_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "name = \"x\"\nwidth = 4\nheight = [\n").unwrap();
    let out = specrec(&["render", "bad.toml", "-o", "o"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bad.toml:3:"), "{}", stderr(&out));
}

#[test]
fn estimate_needs_depth() {
    let dir = tempfile::tempdir().unwrap();
    render("triple", dir.path());
    let full = CubeFile::read(&dir.path().join("triple/apparent.cube")).unwrap();
    CubeFile::new(full.image, None).unwrap().write(&dir.path().join("flat.cube")).unwrap();
    let out = specrec(&["estimate", "flat.cube", "--patterns", "triple/patterns.toml"], dir.path());
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("depth"), "{}", stderr(&out));
}

#[test]
fn sensitivities_on_wrong_grid_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    render("triple", dir.path());
    let camera = Path::new(env!("CARGO_MANIFEST_DIR")).join("cameras/gaussian-rgb.txt");
    let text = std::fs::read_to_string(camera).unwrap().replacen("3 31 400 700", "3 31 410 710", 1);
    std::fs::write(dir.path().join("cam.txt"), text).unwrap();
    let out = specrec(&["project", "triple/apparent.cube", "cam.txt", "-o", "p.txt"], dir.path());
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    std::fs::write(dir.path().join("short.txt"), "2 31 400 700\n0.1 0.2\n").unwrap();
    let out = specrec(&["project", "triple/apparent.cube", "short.txt", "-o", "p.txt"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("short.txt:2:"), "{}", stderr(&out));
}

#[test]
fn minority_recovery_set_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    render("minority", dir.path());
    let out = specrec(&["estimate", "minority/apparent.cube", "--recovery-set", "-o", "m.toml"], dir.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("m.toml").exists());
}

#[test]
fn recover_rejects_mismatched_medium() {
    let dir = tempfile::tempdir().unwrap();
    render("triple", dir.path());
    let grid = spectral_recovery::spectral::SpectralGrid::new(400.0, 700.0, 16).unwrap();
    io::write_medium(&dir.path().join("m16.toml"), &MediumParams::uniform(grid, 0.3, 0.2).unwrap()).unwrap();
    let out = specrec(&["recover", "triple/apparent.cube", "m16.toml", "-o", "l.cube"], dir.path());
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn recover_overflow_guard_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    render("triple", dir.path());
    let grid = spectral_recovery::spectral::SpectralGrid::visible();
    io::write_medium(&dir.path().join("murky.toml"), &MediumParams::uniform(grid, 500.0, 0.2).unwrap()).unwrap();
    let out = specrec(&["recover", "triple/apparent.cube", "murky.toml", "-o", "l.cube"], dir.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn wrong_medium_still_explains_the_image() {
    // Recovery with any valid medium succeeds; only the truth tells the
    // answers apart.
    let dir = tempfile::tempdir().unwrap();
    render("consistency", dir.path());
    let truth = io::read_medium(&dir.path().join("consistency/truth.toml")).unwrap();
    let wrong = MediumParams::new(truth.c().scaled(1.5), truth.b().scaled(0.7)).unwrap();
    io::write_medium(&dir.path().join("wrong.toml"), &wrong).unwrap();
    for (medium, report) in [("consistency/truth.toml", "right.txt"), ("wrong.toml", "wrong.txt")] {
        let out = specrec(
            &["recover", "consistency/apparent.cube", medium, "-o", "l.cube", "--inherent", "consistency/inherent.cube", "--report", report],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    // The cube on disk is single precision and e^{cz} amplifies its
    // rounding, so compare medians.
    let median = |file: &str| -> f64 {
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        let line = text.lines().find(|l| l.starts_with("rel.median")).expect("error line");
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert!(median("right.txt") < 1e-6, "{}", median("right.txt"));
    assert!(median("wrong.txt") > 1e-2, "{}", median("wrong.txt"));
}

#[test]
fn pattern_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    render("consistency", dir.path());
    let out = specrec(
        &["estimate", "consistency/apparent.cube", "--patterns", "consistency/patterns.toml", "--truth", "consistency/truth.toml", "-o", "m.toml"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let est = io::read_medium(&dir.path().join("m.toml")).unwrap();
    let truth = io::read_medium(&dir.path().join("consistency/truth.toml")).unwrap();
    for (a, b) in est.c().values().iter().zip(truth.c().values()) {
        // Cubes are stored in single precision.
        assert!((a - b).abs() / b < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn demos_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["ill-posed-camera", "ill-posed-medium", "necessity"] {
        let out = specrec(&["demo", name], dir.path());
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("result = pass"));
    }
}
