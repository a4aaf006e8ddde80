//! Scene transformations and the black-box scorer abstraction.
//!
//! A [`SceneScorer`] paints a pattern onto the context vehicle, places it in
//! a scene described by a [`Transformation`], and reports what a detector saw.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::derive_seed;
use crate::error::{Error, Result};
use crate::objective::{mean_vehicle_score, VehicleScore};
use crate::texture::CamouflagePattern;

pub const NUM_LOCATIONS: u32 = 36;
pub const NUM_TRAIN_LOCATIONS: u32 = 18;
pub const NUM_ORIENTATIONS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn for_location(location_id: u32) -> Split {
        if location_id < NUM_TRAIN_LOCATIONS {
            Split::Train
        } else {
            Split::Test
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One rendering condition: where the vehicle stands, where the camera looks
/// from, and how the scene is lit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    pub location_id: u32,
    pub orientation_id: u32,
    pub lighting: f64,
    pub split: Split,
}

impl Transformation {
    pub fn new(location_id: u32, orientation_id: u32, lighting: f64) -> Result<Self> {
        if location_id >= NUM_LOCATIONS || orientation_id >= NUM_ORIENTATIONS {
            return Err(Error::Config(format!(
                "transformation ({location_id}, {orientation_id}) outside the {NUM_LOCATIONS}x{NUM_ORIENTATIONS} grid"
            )));
        }
        if !(0.0..=1.0).contains(&lighting) {
            return Err(Error::Config(format!("lighting {lighting} outside [0, 1]")));
        }
        Ok(Self {
            location_id,
            orientation_id,
            lighting,
            split: Split::for_location(location_id),
        })
    }

    pub fn key(&self) -> (u32, u32) {
        (self.location_id, self.orientation_id)
    }
}

/// The full 36 x 20 grid. Lighting is drawn once per location from `seed`.
pub fn build_transformation_grid(seed: u64) -> Vec<Transformation> {
    let mut grid = Vec::with_capacity((NUM_LOCATIONS * NUM_ORIENTATIONS) as usize);
    for location_id in 0..NUM_LOCATIONS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, u64::from(location_id)]));
        let lighting: f64 = rng.random();
        for orientation_id in 0..NUM_ORIENTATIONS {
            grid.push(Transformation {
                location_id,
                orientation_id,
                lighting,
                split: Split::for_location(location_id),
            });
        }
    }
    grid
}

pub fn filter_split(grid: &[Transformation], split: Split) -> Vec<Transformation> {
    grid.iter().filter(|t| t.split == split).copied().collect()
}

/// Keeps the first `locations_per_split` locations of each split and the first
/// `orientations` camera orientations.
pub fn subsample(
    grid: &[Transformation],
    locations_per_split: u32,
    orientations: u32,
) -> Vec<Transformation> {
    grid.iter()
        .filter(|t| {
            let rank = match t.split {
                Split::Train => t.location_id,
                Split::Test => t.location_id - NUM_TRAIN_LOCATIONS,
            };
            rank < locations_per_split && t.orientation_id < orientations
        })
        .copied()
        .collect()
}

pub fn check_unique(grid: &[Transformation]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for t in grid {
        if !seen.insert(t.key()) {
            return Err(Error::Config(format!(
                "duplicate transformation (location {}, orientation {})",
                t.location_id, t.orientation_id
            )));
        }
    }
    Ok(())
}

pub fn export_grid_json(grid: &[Transformation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(grid)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_grid_json(path: impl AsRef<Path>) -> Result<Vec<Transformation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let grid: Vec<Transformation> = serde_json::from_str(&text)?;
    check_unique(&grid)?;
    Ok(grid)
}

/// Axis-aligned box in pixel coordinates. Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidBox(format!(
                "[{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub is_camouflaged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub vehicle_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub is_camouflaged: bool,
}

/// What the detector reported for one painted scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<GroundTruth>,
}

impl SceneScore {
    /// Confidences of detections not attributed to the camouflaged vehicle.
    pub fn unpainted_confidences(&self) -> Vec<f64> {
        self.detections
            .iter()
            .filter(|d| !d.is_camouflaged)
            .map(|d| d.confidence)
            .collect()
    }

    /// Mean unpainted-vehicle score for this scene.
    pub fn vehicle_score(&self) -> VehicleScore {
        mean_vehicle_score(&self.unpainted_confidences())
    }

    pub fn no_detection(&self) -> bool {
        self.detections.iter().all(|d| d.is_camouflaged)
    }

    pub fn unpainted_predictions(&self) -> Vec<BBox> {
        self.detections
            .iter()
            .filter(|d| !d.is_camouflaged)
            .map(|d| d.bbox)
            .collect()
    }

    pub fn unpainted_ground_truth(&self) -> Vec<BBox> {
        self.ground_truth
            .iter()
            .filter(|g| !g.is_camouflaged)
            .map(|g| g.bbox)
            .collect()
    }

    /// Checks confidences are in `[0, 1]`. Boxes are validated on construction.
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.detections.iter().enumerate() {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::Protocol {
                    field: format!("detections[{i}].confidence"),
                    message: format!("{} outside [0, 1]", d.confidence),
                });
            }
        }
        Ok(())
    }
}

/// How an optimizer may call a scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    /// Calls may run in parallel.
    Concurrent,
    /// Calls must be issued one at a time.
    Serialized,
}

/// The black box from camouflage pattern to detections.
///
/// Implementations must be deterministic in `(pattern, transformation)` up to
/// their declared noise model and must tag detections of the camouflaged vehicle.
pub trait SceneScorer: Send + Sync {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
}

impl<S: SceneScorer + ?Sized> SceneScorer for &S {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore> {
        (**self).score_scene(pattern, t)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

impl<S: SceneScorer + ?Sized> SceneScorer for Box<S> {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore> {
        (**self).score_scene(pattern, t)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

/// Runs `f` over `items`, in parallel only when the scorer allows it. Output order matches input.
pub(crate) fn map_scored<T, R, F>(concurrency: Concurrency, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    match concurrency {
        Concurrency::Concurrent => items.par_iter().map(&f).collect(),
        Concurrency::Serialized => items.iter().map(f).collect(),
    }
}
