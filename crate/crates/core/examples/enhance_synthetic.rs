// Enhance mode: the same search with the opposite goal, raising detection
// confidence on the surrounding vehicles.

use cca::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let grid = subsample(&build_transformation_grid(2), 2, 2);
    let params = SynthParams { seed: 2, pattern_width: 8, pattern_height: 8, noise_std: 0.02, ..Default::default() };
    let scorer = SynthScorer::new(SynthSceneSpec::generate(&params, &grid)?)?;
    let train = filter_split(&grid, Split::Train);

    let mut results = Vec::new();
    for mode in [Mode::Attack, Mode::Enhance] {
        let config = OptimizerConfig { max_iterations: 40, patience: 40, ..OptimizerConfig::new(mode, train.clone()) };
        let outcome = Optimizer::new(config, &scorer)?.run(CamouflagePattern::new_random(8, 8, 5)?)?;
        let report = evaluate_pattern(&scorer, &outcome.best.pattern, &grid, Split::Test, &format!("{mode:?}"))?;
        println!(
            "{:<8} train score {:.4} -> {:.4}, test confidence {:.2}%",
            format!("{mode:?}"),
            outcome.history[0].objective,
            outcome.best.objective,
            report.detection_confidence
        );
        results.push(report.detection_confidence);
    }
    anyhow::ensure!(results[1] > results[0], "enhanced pattern should be detected more readily");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
