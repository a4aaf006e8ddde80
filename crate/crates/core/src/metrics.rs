//! Detection metrics: IoU, per-image best IoU, mIoU, P@0.5 and mean confidence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{map_scored, BBox, SceneScorer, Split, Transformation};
use crate::texture::CamouflagePattern;

/// An image counts as localized when its IoU is strictly above this.
pub const IOU_SUCCESS_THRESHOLD: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let ih = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Best IoU over all prediction/ground-truth pairs; 0 without predictions.
pub fn image_iou(predictions: &[BBox], ground_truth: &[BBox]) -> Result<f64> {
    if ground_truth.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    Ok(predictions
        .iter()
        .flat_map(|p| ground_truth.iter().map(move |g| iou(p, g)))
        .fold(0.0, f64::max))
}

/// Per-image inputs to [`aggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub mean_confidence: f64,
    pub iou: f64,
    pub no_detection: bool,
}

/// One row of a comparison table. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub camouflage_label: String,
    pub split: Split,
    pub detection_confidence: f64,
    pub miou: f64,
    pub p_at_05: f64,
    pub image_count: usize,
    pub no_detection_count: usize,
}

pub fn aggregate(per_image: &[ImageResult], split: Split, label: &str) -> Result<EvalReport> {
    if per_image.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = per_image.len() as f64;
    let conf = per_image.iter().map(|r| r.mean_confidence).sum::<f64>() / n;
    let miou = per_image.iter().map(|r| r.iou).sum::<f64>() / n;
    let hits = per_image
        .iter()
        .filter(|r| r.iou > IOU_SUCCESS_THRESHOLD)
        .count();
    Ok(EvalReport {
        camouflage_label: label.to_string(),
        split,
        detection_confidence: 100.0 * conf,
        miou: 100.0 * miou,
        p_at_05: 100.0 * hits as f64 / n,
        image_count: per_image.len(),
        no_detection_count: per_image.iter().filter(|r| r.no_detection).count(),
    })
}

/// Scores `pattern` on every transformation of `split` and aggregates the images.
pub fn evaluate_pattern<S: SceneScorer + ?Sized>(
    scorer: &S,
    pattern: &CamouflagePattern,
    transformations: &[Transformation],
    split: Split,
    label: &str,
) -> Result<EvalReport> {
    let selected: Vec<Transformation> = transformations
        .iter()
        .filter(|t| t.split == split)
        .copied()
        .collect();
    let images = map_scored(scorer.concurrency(), &selected, |t| {
        let scene = scorer.score_scene(pattern, t)?;
        scene.validate()?;
        let vs = scene.vehicle_score();
        Ok(ImageResult {
            mean_confidence: vs.value,
            iou: image_iou(&scene.unpainted_predictions(), &scene.unpainted_ground_truth())?,
            no_detection: vs.no_detection,
        })
    })?;
    aggregate(&images, split, label)
}

/// Row-wise mean of several reports on the same split, under a new label.
pub fn mean_of_reports(reports: &[EvalReport], label: &str) -> Result<EvalReport> {
    let first = reports.first().ok_or(Error::EmptyEvaluation)?;
    if reports.iter().any(|r| r.split != first.split) {
        return Err(Error::Config("cannot average reports from different splits".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        camouflage_label: label.to_string(),
        split: first.split,
        detection_confidence: mean(|r| r.detection_confidence),
        miou: mean(|r| r.miou),
        p_at_05: mean(|r| r.p_at_05),
        image_count: first.image_count,
        no_detection_count: reports.iter().map(|r| r.no_detection_count).sum(),
    })
}

pub const REPORT_CSV_HEADER: [&str; 6] = [
    "Camouflages",
    "Split",
    "Detection confidence(%)",
    "mIOU(%)",
    "P@0.5(%)",
    "Images",
];

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.camouflage_label.clone(),
            r.split.to_string(),
            format!("{:.2}", r.detection_confidence),
            format!("{:.2}", r.miou),
            format!("{:.2}", r.p_at_05),
            r.image_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_reports(reports: &[EvalReport], csv_path: &Path, json_path: &Path) -> Result<()> {
    let file = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    write_reports_csv(reports, file)?;
    let json = serde_json::to_string_pretty(reports)?;
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))
}
