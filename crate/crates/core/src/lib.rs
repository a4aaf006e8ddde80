//! Contextual camouflage search.
//!
//! An evolution-strategy optimizer learns a small RGB texture which, painted
//! on one vehicle, lowers (or raises) a detector's confidence on the *other*
//! vehicles in the scene. The detector is treated as a black box behind the
//! [`scene::SceneScorer`] trait. Two scorers ship with the crate: an
//! in-process synthetic world ([`synthsim`]) with a known optimum, and an
//! HTTP client ([`bridge`]) for an external render-and-detect service.
//!
//! ```no_run
//! use cca::prelude::*;
//!
//! let grid = subsample(&build_transformation_grid(0), 2, 4);
//! let spec = SynthSceneSpec::generate(&SynthParams::default(), &grid)?;
//! let scorer = SynthScorer::new(spec)?;
//! let config = OptimizerConfig::new(Mode::Attack, filter_split(&grid, Split::Train));
//! let outcome = Optimizer::new(config, scorer)?.run(CamouflagePattern::new_random(16, 16, 1)?)?;
//! println!("best objective {}", outcome.best.objective);
//! # Ok::<(), cca::Error>(())
//! ```

pub mod baseline;
pub mod bridge;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod evolve;
pub mod metrics;
pub mod objective;
pub mod scene;
pub mod synthsim;
pub mod texture;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::baseline::{evaluate_all, BaselineSuite, Comparison};
    pub use crate::bridge::{BridgeConfig, BridgeScorer};
    pub use crate::distribution::SearchDistribution;
    pub use crate::error::{Error, Result};
    pub use crate::evolve::{estimate_gradient, EvaluationGrid, Mode, Optimizer, OptimizerConfig};
    pub use crate::metrics::{evaluate_pattern, EvalReport};
    pub use crate::scene::{
        build_transformation_grid, filter_split, subsample, BBox, SceneScore, SceneScorer, Split,
        Transformation,
    };
    pub use crate::synthsim::{analytic_optimum, SynthParams, SynthSceneSpec, SynthScorer};
    pub use crate::texture::CamouflagePattern;
}
