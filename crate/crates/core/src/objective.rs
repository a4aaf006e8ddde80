//! Score aggregation and shaping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard keeping `bce_zero` finite when a detector reports exactly 1.0.
pub const BCE_EPSILON: f64 = 1e-6;

/// Score reported for a scene in which no unpainted vehicle was detected.
pub const NO_DETECTION_SCORE: f64 = 0.0;

/// Mean unpainted-vehicle score for one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleScore {
    pub value: f64,
    /// Set when the scene had no unpainted detections and `value` is the convention.
    pub no_detection: bool,
}

pub fn mean_vehicle_score(scores: &[f64]) -> VehicleScore {
    if scores.is_empty() {
        return VehicleScore {
            value: NO_DETECTION_SCORE,
            no_detection: true,
        };
    }
    VehicleScore {
        value: scores.iter().sum::<f64>() / scores.len() as f64,
        no_detection: false,
    }
}

/// Binary cross-entropy against a zero target: `-ln(1 - s)`.
pub fn bce_zero(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("score {s} outside [0, 1]")));
    }
    Ok(-(1.0 - s.min(1.0 - BCE_EPSILON)).ln())
}

/// Z-scores with the Bessel-corrected standard deviation.
///
/// A zero-variance population maps to all zeros.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InsufficientPopulation(values.len()));
    }
    // Spread at rounding level counts as zero; otherwise rounding noise in the
    // mean would be blown up to unit scale.
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 8.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
        return Ok(vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// Scores of one candidate across the transformation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_index: usize,
    /// `(transformation index, mean vehicle score)` pairs.
    pub per_transformation: Vec<(usize, f64)>,
    pub mean_over_transformations: f64,
}

impl CandidateScore {
    pub fn new(candidate_index: usize, per_transformation: Vec<(usize, f64)>) -> Self {
        let mean_over_transformations = if per_transformation.is_empty() {
            0.0
        } else {
            per_transformation.iter().map(|(_, s)| s).sum::<f64>()
                / per_transformation.len() as f64
        };
        Self {
            candidate_index,
            per_transformation,
            mean_over_transformations,
        }
    }
}
