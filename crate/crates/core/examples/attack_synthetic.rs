// Learn a camouflage against the synthetic detector and compare it with the
// closed-form optimum of a noiseless world.
//
//     cargo run --example attack_synthetic

use cca::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let t = build_transformation_grid(11)[0];
    let params = SynthParams { seed: 11, pattern_width: 8, pattern_height: 8, noise_std: 0.0, ..Default::default() };
    let spec = SynthSceneSpec::generate(&params, &[t])?;
    let optimum = analytic_optimum(&spec, &t)?;
    let scorer = SynthScorer::new(spec)?;

    let config = OptimizerConfig { max_iterations: 60, patience: 60, base_seed: 1, ..OptimizerConfig::new(Mode::Attack, vec![t]) };
    let optimizer = Optimizer::new(config, &scorer)?;
    let outcome = optimizer.run(CamouflagePattern::new_random(8, 8, 1)?)?;

    for h in outcome.history.iter().step_by(10) {
        println!("iter {:>3}  score {:.4}  best {:.4}", h.iteration, h.objective, h.best_objective);
    }
    let target = optimizer.objective(&optimum)?;
    println!(
        "best {:.4} at iteration {}, analytic optimum {:.4}",
        outcome.best.objective, outcome.best.iteration, target
    );
    anyhow::ensure!(outcome.best.objective < outcome.history[0].objective, "attack did not lower the score");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
