// Comparison table: basic colors, random patterns and a learned pattern on
// both splits, written as CSV to stdout.

use cca::metrics::write_reports_csv;
use cca::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let grid = subsample(&build_transformation_grid(3), 3, 1);
    let params = SynthParams { seed: 3, pattern_width: 8, pattern_height: 8, noise_std: 0.02, ..Default::default() };
    let scorer = SynthScorer::new(SynthSceneSpec::generate(&params, &grid)?)?;

    let config = OptimizerConfig { max_iterations: 50, patience: 50, ..OptimizerConfig::new(Mode::Attack, filter_split(&grid, Split::Train)) };
    let ours = Optimizer::new(config, &scorer)?.run(CamouflagePattern::new_random(8, 8, 3)?)?.best.pattern;

    let suite = BaselineSuite::build(8, 8, 3)?;
    let mut rows = Vec::new();
    for split in [Split::Train, Split::Test] {
        rows.extend(evaluate_all(&suite, Some(&ours), &scorer, &grid, split)?.rows);
    }
    write_reports_csv(&rows, std::io::stdout())?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
