use std::sync::atomic::{AtomicUsize, Ordering};

use cca::prelude::*;
use cca::distribution::derive_seed;
use cca::evolve::StopReason;
use cca::scene::{Concurrency, Detection, GroundTruth};

fn noiseless_world(seed: u64, size: usize) -> (SynthScorer, Transformation) {
    let t = build_transformation_grid(seed)[0];
    let params = SynthParams { seed, pattern_width: size, pattern_height: size, noise_std: 0.0, ..Default::default() };
    (SynthScorer::new(SynthSceneSpec::generate(&params, &[t]).unwrap()).unwrap(), t)
}

#[test]
fn default_step_size_reaches_the_optimum() {
    let (scorer, t) = noiseless_world(11, 16);
    let optimum = analytic_optimum(scorer.spec(), &t).unwrap();
    let cfg = OptimizerConfig { patience: 300, base_seed: 11, ..OptimizerConfig::new(Mode::Attack, vec![t]) };
    assert_eq!(cfg.alpha, 1000.0);
    let opt = Optimizer::new(cfg, &scorer).unwrap();
    let target = opt.objective(&optimum).unwrap();
    let out = opt.run(CamouflagePattern::new_random(16, 16, 11).unwrap()).unwrap();
    assert!(out.best.objective - target <= 0.05, "best {} vs optimum {target}", out.best.objective);
}

#[test]
fn optimum_beats_every_baseline_pattern() {
    let (scorer, t) = noiseless_world(4, 8);
    let opt = Optimizer::new(OptimizerConfig::new(Mode::Attack, vec![t]), &scorer).unwrap();
    let best = opt.objective(&analytic_optimum(scorer.spec(), &t).unwrap()).unwrap();
    let suite = BaselineSuite::build(8, 8, 1).unwrap();
    for p in suite.basic_colors.iter().map(|(_, p)| p).chain(&suite.random_patterns) {
        assert!(best <= opt.objective(p).unwrap());
    }
}

#[test]
fn history_tracks_the_run() {
    let (scorer, t) = noiseless_world(2, 4);
    let cfg = OptimizerConfig { max_iterations: 12, patience: 100, ..OptimizerConfig::new(Mode::Attack, vec![t]) };
    let opt = Optimizer::new(cfg, &scorer).unwrap();
    let out = opt.run(CamouflagePattern::new_random(4, 4, 0).unwrap()).unwrap();
    assert_eq!(out.stop_reason, StopReason::IterationBudget);
    assert_eq!(out.history.len(), out.final_state.iteration + 1);
    let min = out.history.iter().map(|h| h.objective).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best.objective, min);
    assert_eq!(opt.objective(&out.best.pattern).unwrap(), out.best.objective);
    for w in out.history.windows(2) {
        assert!(w[1].best_objective <= w[0].best_objective);
    }
}

#[test]
fn patience_stops_a_flat_search() {
    let (scorer, t) = noiseless_world(2, 4);
    let cfg = OptimizerConfig { alpha: 1e-9, patience: 3, ..OptimizerConfig::new(Mode::Attack, vec![t]) };
    let out = Optimizer::new(cfg, &scorer).unwrap().run(CamouflagePattern::new_random(4, 4, 0).unwrap()).unwrap();
    assert_eq!(out.stop_reason, StopReason::Converged);
    assert_eq!(out.final_state.iteration, 3);
}

#[test]
fn enhance_raises_the_score() {
    let (scorer, t) = noiseless_world(7, 8);
    let cfg = OptimizerConfig { max_iterations: 40, patience: 40, ..OptimizerConfig::new(Mode::Enhance, vec![t]) };
    let opt = Optimizer::new(cfg, &scorer).unwrap();
    let out = opt.run(CamouflagePattern::new_random(8, 8, 3).unwrap()).unwrap();
    assert!(out.best.objective > out.history[0].objective + 0.05, "{:?}", out.best.objective);
    let max = out.history.iter().map(|h| h.objective).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best.objective, max);
}

struct Serial<'a>(&'a SynthScorer, AtomicUsize);

impl SceneScorer for Serial<'_> {
    fn score_scene(&self, p: &CamouflagePattern, t: &Transformation) -> cca::Result<SceneScore> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.score_scene(p, t)
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Serialized
    }
}

#[test]
fn serialized_scorer_matches_concurrent_scorer() {
    let grid = subsample(&build_transformation_grid(3), 2, 2);
    let params = SynthParams { seed: 3, pattern_width: 4, pattern_height: 4, noise_std: 0.02, ..Default::default() };
    let scorer = SynthScorer::new(SynthSceneSpec::generate(&params, &grid).unwrap()).unwrap();
    let train = filter_split(&grid, Split::Train);
    let cfg = OptimizerConfig { max_iterations: 5, lambda: 6, ..OptimizerConfig::new(Mode::Attack, train.clone()) };
    let init = CamouflagePattern::new_random(4, 4, derive_seed(&[3])).unwrap();
    let a = Optimizer::new(cfg.clone(), &scorer).unwrap().run(init.clone()).unwrap();
    let serial = Serial(&scorer, AtomicUsize::new(0));
    let b = Optimizer::new(cfg, &serial).unwrap().run(init).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.history, b.history);
    // initial objective, then per iteration lambda candidates plus the new mean
    assert_eq!(serial.1.load(Ordering::SeqCst), train.len() * (1 + 5 * (6 + 1)));
}

struct FailsAfter(usize, AtomicUsize);

impl SceneScorer for FailsAfter {
    fn score_scene(&self, _: &CamouflagePattern, _: &Transformation) -> cca::Result<SceneScore> {
        if self.1.fetch_add(1, Ordering::SeqCst) >= self.0 {
            return Err(Error::Scorer("detector crashed".into()));
        }
        let bbox = BBox::new(0.0, 0.0, 4.0, 4.0)?;
        Ok(SceneScore {
            detections: vec![Detection { confidence: 0.4, bbox, is_camouflaged: false }],
            ground_truth: vec![GroundTruth { vehicle_id: 1, bbox, is_camouflaged: false }],
        })
    }
}

#[test]
fn scorer_failure_aborts_the_run() {
    let t = build_transformation_grid(0)[0];
    let opt = Optimizer::new(OptimizerConfig::new(Mode::Attack, vec![t]), FailsAfter(30, AtomicUsize::new(0))).unwrap();
    let err = opt.run(CamouflagePattern::new_random(2, 2, 0).unwrap()).unwrap_err();
    assert_eq!(err.kind(), "scorer");
}

#[test]
fn malformed_scene_is_rejected() {
    struct Bad;
    impl SceneScorer for Bad {
        fn score_scene(&self, _: &CamouflagePattern, _: &Transformation) -> cca::Result<SceneScore> {
            let bbox = BBox::new(0.0, 0.0, 4.0, 4.0)?;
            Ok(SceneScore {
                detections: vec![Detection { confidence: 1.5, bbox, is_camouflaged: false }],
                ground_truth: vec![GroundTruth { vehicle_id: 1, bbox, is_camouflaged: false }],
            })
        }
    }
    let t = build_transformation_grid(0)[0];
    let opt = Optimizer::new(OptimizerConfig::new(Mode::Attack, vec![t]), Bad).unwrap();
    assert!(opt.objective(&CamouflagePattern::solid(1, 1, [0.0; 3]).unwrap()).is_err());
}
