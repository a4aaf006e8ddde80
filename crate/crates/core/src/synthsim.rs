//! In-process synthetic scene scorer.
//!
//! Each unpainted vehicle's confidence is a logistic function of a linear
//! score over the tiled pattern:
//!
//! ```text
//! S_i = logistic(b_i + GAIN * <w_t, phi> / ||w_t||_1 + eps_i)
//! ```
//!
//! where `phi` is the pattern tiled to `tile_width x tile_height` and scaled
//! to `[0, 1]`. The noise `eps_i` is derived from a SHA-256 hash of the scene
//! and pattern, so repeated calls agree exactly. The structure is simple
//! enough that the best pattern has a closed form (see [`analytic_optimum`]).

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::derive_seed;
use crate::error::{Error, Result};
use crate::scene::{
    BBox, Concurrency, Detection, GroundTruth, SceneScore, SceneScorer, Transformation,
};
use crate::texture::{CamouflagePattern, CHANNEL_MAX};

/// Fixed gain applied to the normalized linear term.
pub const GAIN: f64 = 4.0;
/// Confidence reported for the camouflaged vehicle itself.
pub const CAMOUFLAGED_CONFIDENCE: f64 = 0.9;
/// Smallest relative width/height a predicted box may shrink to.
const MIN_BOX_FRACTION: f64 = 1e-9;

const IMAGE_WIDTH: f64 = 640.0;
const IMAGE_HEIGHT: f64 = 480.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthVehicle {
    pub vehicle_id: u32,
    pub bias: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

/// Everything the scorer needs to know about one transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScene {
    pub transformation: Transformation,
    /// Row-major `tile_height x tile_width x 3` weights over the tiled pattern.
    pub weights: Vec<f64>,
    pub vehicles: Vec<SynthVehicle>,
    pub camouflaged_box: BBox,
}

/// A complete synthetic world, serializable so an external service can host
/// the identical function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    pub pattern_width: usize,
    pub pattern_height: usize,
    pub tile_width: usize,
    pub tile_height: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub scenes: Vec<SynthScene>,
}

/// Knobs for [`SynthSceneSpec::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub pattern_width: usize,
    pub pattern_height: usize,
    /// Tiled surface size as a multiple of the pattern size.
    pub tile_repeat: usize,
    pub noise_std: f64,
    /// Scale of the weight component shared by all scenes.
    pub shared_weight: f64,
    /// Scale of the per-location weight component.
    pub location_weight: f64,
    /// Scale of the per-(location, orientation) weight component.
    pub view_weight: f64,
    pub bias_mean: f64,
    pub bias_std: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            pattern_width: 16,
            pattern_height: 16,
            tile_repeat: 2,
            noise_std: 0.0,
            shared_weight: 1.0,
            location_weight: 0.4,
            view_weight: 0.2,
            bias_mean: 1.0,
            bias_std: 0.5,
        }
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n).map(|_| scale * dist.sample(rng)).collect()
}

fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    let w = rng.random_range(40.0..120.0);
    let h = rng.random_range(30.0..90.0);
    let x = rng.random_range(0.0..IMAGE_WIDTH - w);
    let y = rng.random_range(0.0..IMAGE_HEIGHT - h);
    BBox::new(x, y, x + w, y + h).expect("positive size")
}

impl SynthSceneSpec {
    /// Builds a seeded world over `transformations`.
    ///
    /// Weights share a common component across all scenes so a pattern
    /// learned on training locations carries over to test locations. Vehicle
    /// count (1 to 4) and biases are fixed per location; brighter lighting
    /// raises every bias slightly.
    pub fn generate(params: &SynthParams, transformations: &[Transformation]) -> Result<Self> {
        if params.pattern_width == 0 || params.pattern_height == 0 || params.tile_repeat == 0 {
            return Err(Error::InvalidDimension(
                "synthetic scene dimensions must be positive".into(),
            ));
        }
        let tile_width = params.pattern_width * params.tile_repeat;
        let tile_height = params.pattern_height * params.tile_repeat;
        let n_features = tile_width * tile_height * 3;
        let mut shared_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[params.seed, 0xC0FFEE]));
        let shared = normal_vec(&mut shared_rng, n_features, params.shared_weight);

        let mut location_cache: HashMap<u32, (Vec<f64>, Vec<f64>)> = HashMap::new();
        let mut scenes = Vec::with_capacity(transformations.len());
        for t in transformations {
            let (loc_weights, biases) = location_cache
                .entry(t.location_id)
                .or_insert_with(|| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                        params.seed,
                        1,
                        u64::from(t.location_id),
                    ]));
                    let w = normal_vec(&mut rng, n_features, params.location_weight);
                    let n = rng.random_range(1..=4usize);
                    let dist = Normal::new(params.bias_mean, params.bias_std.max(0.0))
                        .map_err(|e| Error::Config(e.to_string()))
                        .expect("non-negative std");
                    let b = (0..n).map(|_| dist.sample(&mut rng)).collect();
                    (w, b)
                })
                .clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                params.seed,
                2,
                u64::from(t.location_id),
                u64::from(t.orientation_id),
            ]));
            let view = normal_vec(&mut rng, n_features, params.view_weight);
            let weights = shared
                .iter()
                .zip(&loc_weights)
                .zip(&view)
                .map(|((s, l), v)| s + l + v)
                .collect();
            let light_shift = 0.5 * (t.lighting - 0.5);
            let vehicles = biases
                .iter()
                .enumerate()
                .map(|(i, b)| SynthVehicle {
                    vehicle_id: i as u32 + 1,
                    bias: b + light_shift,
                    bbox: random_box(&mut rng),
                })
                .collect();
            scenes.push(SynthScene {
                transformation: *t,
                weights,
                vehicles,
                camouflaged_box: BBox::new(280.0, 200.0, 360.0, 260.0)?,
            });
        }
        let spec = Self {
            pattern_width: params.pattern_width,
            pattern_height: params.pattern_height,
            tile_width,
            tile_height,
            noise_std: params.noise_std,
            seed: params.seed,
            scenes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pattern_width == 0
            || self.pattern_height == 0
            || self.tile_width == 0
            || self.tile_height == 0
        {
            return Err(Error::InvalidDimension("synthetic scene dimensions must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        let n_features = self.tile_width * self.tile_height * 3;
        let mut seen = std::collections::HashSet::new();
        for (i, scene) in self.scenes.iter().enumerate() {
            if !seen.insert(scene.transformation.key()) {
                return Err(Error::Config(format!("scene {i} duplicates a transformation")));
            }
            if scene.weights.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n_features} weights"),
                    got: format!("{} weights in scene {i}", scene.weights.len()),
                });
            }
            if scene.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Config(format!("scene {i} has non-finite weights")));
            }
            if scene.vehicles.is_empty() {
                return Err(Error::Config(format!("scene {i} has no unpainted vehicles")));
            }
        }
        Ok(())
    }

    pub fn transformations(&self) -> Vec<Transformation> {
        self.scenes.iter().map(|s| s.transformation).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// `GAIN * <w, phi> / ||w||_1`, summed over the tiled surface in row-major order.
/// Zero when all weights are zero.
fn linear_term(spec: &SynthSceneSpec, scene: &SynthScene, pattern: &CamouflagePattern) -> f64 {
    let l1: f64 = scene.weights.iter().map(|w| w.abs()).sum();
    if l1 == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    for y in 0..spec.tile_height {
        for x in 0..spec.tile_width {
            let px = pattern.pixel(x % pattern.width(), y % pattern.height());
            let base = (y * spec.tile_width + x) * 3;
            for c in 0..3 {
                dot += scene.weights[base + c] * (px[c] / CHANNEL_MAX);
            }
        }
    }
    GAIN * dot / l1
}

/// Seed for the noise stream: first 8 bytes (little endian) of SHA-256 over
/// `seed, location_id, orientation_id, width, height, channels...`, all little endian
/// (`u64, u32, u32, u32, u32, f64...`).
pub fn noise_seed(spec_seed: u64, t: &Transformation, pattern: &CamouflagePattern) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(spec_seed.to_le_bytes());
    hasher.update(t.location_id.to_le_bytes());
    hasher.update(t.orientation_id.to_le_bytes());
    hasher.update((pattern.width() as u32).to_le_bytes());
    hasher.update((pattern.height() as u32).to_le_bytes());
    for v in pattern.channels() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// SplitMix64 generator; simple enough to reimplement bit-exactly elsewhere.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box-Muller, cosine branch only.
    fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Ground-truth box shrunk on each side by `0.5 * (1 - confidence)` of its extent.
pub fn shrink_box(gt: &BBox, confidence: f64) -> BBox {
    let keep = confidence.clamp(MIN_BOX_FRACTION, 1.0);
    let dx = 0.5 * (1.0 - keep) * gt.width();
    let dy = 0.5 * (1.0 - keep) * gt.height();
    BBox::new(gt.x_min() + dx, gt.y_min() + dy, gt.x_max() - dx, gt.y_max() - dy)
        .unwrap_or(*gt)
}

fn find_scene<'a>(spec: &'a SynthSceneSpec, t: &Transformation) -> Result<&'a SynthScene> {
    spec.scenes
        .iter()
        .find(|s| s.transformation.key() == t.key())
        .ok_or_else(|| {
            Error::Scorer(format!(
                "transformation (location {}, orientation {}) is not part of the synthetic scene",
                t.location_id, t.orientation_id
            ))
        })
}

fn score_in_scene(
    spec: &SynthSceneSpec,
    scene: &SynthScene,
    pattern: &CamouflagePattern,
) -> SceneScore {
    let t = &scene.transformation;
    let linear = linear_term(spec, scene, pattern);
    let mut noise = (spec.noise_std > 0.0).then(|| SplitMix64(noise_seed(spec.seed, t, pattern)));
    let mut detections = Vec::with_capacity(scene.vehicles.len() + 1);
    let mut ground_truth = Vec::with_capacity(scene.vehicles.len() + 1);
    for v in &scene.vehicles {
        let eps = noise
            .as_mut()
            .map_or(0.0, |rng| spec.noise_std * rng.next_gaussian());
        let confidence = logistic(v.bias + linear + eps);
        detections.push(Detection {
            confidence,
            bbox: shrink_box(&v.bbox, confidence),
            is_camouflaged: false,
        });
        ground_truth.push(GroundTruth {
            vehicle_id: v.vehicle_id,
            bbox: v.bbox,
            is_camouflaged: false,
        });
    }
    detections.push(Detection {
        confidence: CAMOUFLAGED_CONFIDENCE,
        bbox: scene.camouflaged_box,
        is_camouflaged: true,
    });
    ground_truth.push(GroundTruth {
        vehicle_id: 0,
        bbox: scene.camouflaged_box,
        is_camouflaged: true,
    });
    SceneScore {
        detections,
        ground_truth,
    }
}

/// Scores `pattern` under transformation `t`.
pub fn synth_score(
    spec: &SynthSceneSpec,
    pattern: &CamouflagePattern,
    t: &Transformation,
) -> Result<SceneScore> {
    Ok(score_in_scene(spec, find_scene(spec, t)?, pattern))
}

/// The pattern minimizing every vehicle's confidence under `t`: each pattern
/// channel goes to 0 where its folded weight is positive and to 255 where it
/// is negative. Only defined for a noiseless spec.
pub fn analytic_optimum(spec: &SynthSceneSpec, t: &Transformation) -> Result<CamouflagePattern> {
    if spec.noise_std != 0.0 {
        return Err(Error::OracleUnavailable(format!(
            "closed-form optimum requires noise_std = 0, spec has {}",
            spec.noise_std
        )));
    }
    let scene = find_scene(spec, t)?;
    let folded = folded_weights(spec, scene);
    let channels = folded
        .iter()
        .map(|&w| if w < 0.0 { CHANNEL_MAX } else { 0.0 })
        .collect();
    CamouflagePattern::from_channels(spec.pattern_width, spec.pattern_height, channels)
}

/// Weights summed over every tile copy of each pattern channel.
pub fn folded_weights(spec: &SynthSceneSpec, scene: &SynthScene) -> Vec<f64> {
    let (pw, ph) = (spec.pattern_width, spec.pattern_height);
    let mut folded = vec![0.0; pw * ph * 3];
    for y in 0..spec.tile_height {
        for x in 0..spec.tile_width {
            let src = (y * spec.tile_width + x) * 3;
            let dst = ((y % ph) * pw + x % pw) * 3;
            for c in 0..3 {
                folded[dst + c] += scene.weights[src + c];
            }
        }
    }
    folded
}

/// [`SceneScorer`] backed by a [`SynthSceneSpec`].
#[derive(Debug, Clone)]
pub struct SynthScorer {
    spec: SynthSceneSpec,
    index: HashMap<(u32, u32), usize>,
}

impl SynthScorer {
    pub fn new(spec: SynthSceneSpec) -> Result<Self> {
        spec.validate()?;
        let index = spec
            .scenes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.transformation.key(), i))
            .collect();
        Ok(Self { spec, index })
    }

    pub fn spec(&self) -> &SynthSceneSpec {
        &self.spec
    }
}

impl SceneScorer for SynthScorer {
    fn score_scene(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<SceneScore> {
        let i = self.index.get(&t.key()).ok_or_else(|| {
            Error::Scorer(format!(
                "transformation (location {}, orientation {}) is not part of the synthetic scene",
                t.location_id, t.orientation_id
            ))
        })?;
        Ok(score_in_scene(&self.spec, &self.spec.scenes[*i], pattern))
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
}
