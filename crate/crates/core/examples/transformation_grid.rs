// The 36 locations x 20 orientations grid, its train/test split, and the
// JSON files an external scoring service consumes.

use cca::prelude::*;
use cca::scene::{export_grid_json, load_grid_json};

pub fn run_example() -> anyhow::Result<()> {
    let grid = build_transformation_grid(0);
    let train = filter_split(&grid, Split::Train);
    let test = filter_split(&grid, Split::Test);
    println!("{} transformations: {} train, {} test", grid.len(), train.len(), test.len());

    let small = subsample(&grid, 2, 3);
    for t in &small {
        println!("  {:?} location {:>2} orientation {} lighting {:.3}", t.split, t.location_id, t.orientation_id, t.lighting);
    }

    let dir = std::env::temp_dir().join(format!("cca-grid-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    export_grid_json(&small, dir.join("grid.json"))?;
    anyhow::ensure!(load_grid_json(dir.join("grid.json"))? == small);
    let params = SynthParams { pattern_width: 4, pattern_height: 4, ..Default::default() };
    SynthSceneSpec::generate(&params, &small)?.save_json(dir.join("scene.json"))?;
    println!("wrote {}", dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
