// Plugging in your own detector: implement `SceneScorer` and hand it to the
// optimizer. Here the "detector" just dislikes bright pixels.

use cca::prelude::*;
use cca::scene::{Detection, GroundTruth};

struct Brightness;

impl SceneScorer for Brightness {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> cca::Result<SceneScore> {
        let mean = pattern.channels().iter().sum::<f64>() / pattern.len() as f64 / 255.0;
        let confidence = (0.2 + 0.6 * mean * t.lighting.max(0.2)).min(1.0);
        let car = BBox::new(10.0, 10.0, 60.0, 40.0)?;
        let painted = BBox::new(100.0, 10.0, 150.0, 40.0)?;
        Ok(SceneScore {
            detections: vec![
                Detection { confidence, bbox: car, is_camouflaged: false },
                Detection { confidence: 0.95, bbox: painted, is_camouflaged: true },
            ],
            ground_truth: vec![
                GroundTruth { vehicle_id: 1, bbox: car, is_camouflaged: false },
                GroundTruth { vehicle_id: 0, bbox: painted, is_camouflaged: true },
            ],
        })
    }
}

pub fn run_example() -> anyhow::Result<()> {
    let grid = subsample(&build_transformation_grid(0), 2, 1);
    let config = OptimizerConfig { max_iterations: 30, ..OptimizerConfig::new(Mode::Attack, filter_split(&grid, Split::Train)) };
    let outcome = Optimizer::new(config, Brightness)?.run(CamouflagePattern::solid(4, 4, [200.0; 3])?)?;
    let mean = outcome.best.pattern.channels().iter().sum::<f64>() / outcome.best.pattern.len() as f64;
    println!(
        "score {:.4} -> {:.4} after {} iterations ({:?}); mean channel 200 -> {mean:.1}",
        outcome.history[0].objective, outcome.best.objective, outcome.final_state.iteration, outcome.stop_reason
    );
    anyhow::ensure!(mean < 200.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
