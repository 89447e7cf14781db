//! A scene from TOML text through render, a cube file on disk, and back.

use std::path::Path;

use spectral_recovery::io::CubeFile;
use spectral_recovery::scene::{render, SceneSpec};

const SCENE: &str = r#"
name = "two-tone"
width = 8
height = 4
medium = { c = 0.5, b = 0.2 }

[[materials]]
name = "pale"
reflectance = [[400.0, 0.6], [700.0, 0.8]]

[[materials]]
name = "dark"
reflectance = 0.05

[[regions]]
x0 = 0
y0 = 0
x1 = 4
y1 = 4
material = "pale"
depth = { z0 = 1.0, gx = 0.25 }

[[regions]]
x0 = 4
y0 = 0
x1 = 8
y1 = 4
material = "dark"
depth = { z0 = 2.0 }
"#;

fn main() -> spectral_recovery::Result<()> {
    let spec = SceneSpec::parse(SCENE, Path::new("inline"))?;
    let r = render(&spec)?;
    let file = CubeFile::new(r.apparent, Some(r.depth))?;
    let bytes = file.to_bytes()?;
    let back = CubeFile::from_bytes(&bytes, Path::new("inline.cube"))?;
    println!("{} bytes, bitwise round trip: {}", bytes.len(), back.to_bytes()? == bytes);
    let end = bytes.windows(5).position(|w| w == b"\nend\n").expect("header terminator") + 5;
    print!("{}", String::from_utf8_lossy(&bytes[..end]));
    Ok(())
}
