// Patterns on disk: binary PPM plus a JSON sidecar that keeps full precision.

use cca::texture::Precision;
use cca::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join(format!("cca-texture-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("pattern.ppm");

    let pattern = CamouflagePattern::from_channels(2, 1, vec![0.4, 127.6, 255.0, 10.25, 99.5, 1.0 / 3.0])?;
    pattern.save(&path)?;
    let loaded = CamouflagePattern::load(&path)?;
    println!("with sidecar: {:?}, exact {}", loaded.precision, loaded.pattern == pattern);

    std::fs::remove_file(cca::texture::sidecar_path(&path))?;
    let rounded = CamouflagePattern::load(&path)?;
    println!("ppm only:     {:?}, channels {:?}", rounded.precision, rounded.pattern.channels());
    anyhow::ensure!(rounded.precision == Precision::Rounded);

    let tiled = pattern.tile(5, 2)?;
    println!("tiled to {}x{}, pixel (4, 1) = {:?}", tiled.width, tiled.height, tiled.pixel(4, 1));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
