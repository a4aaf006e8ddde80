//! Reference camouflages and the comparison table.

use crate::distribution::derive_seed;
use crate::error::Result;
use crate::metrics::{evaluate_pattern, mean_of_reports, EvalReport};
use crate::scene::{SceneScorer, Split, Transformation};
use crate::texture::CamouflagePattern;

/// Common vehicle paint colors.
pub const BASIC_COLORS: [(&str, [f64; 3]); 6] = [
    ("red", [255.0, 0.0, 0.0]),
    ("black", [0.0, 0.0, 0.0]),
    ("silver", [192.0, 192.0, 192.0]),
    ("grey", [128.0, 128.0, 128.0]),
    ("blue", [0.0, 0.0, 255.0]),
    ("white", [255.0, 255.0, 255.0]),
];

pub const RANDOM_BASELINES: usize = 5;

pub const LABEL_COLORS: &str = "basic-colors";
pub const LABEL_RANDOM: &str = "random";
pub const LABEL_OURS: &str = "ours";

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSuite {
    pub basic_colors: Vec<(String, CamouflagePattern)>,
    pub random_patterns: Vec<CamouflagePattern>,
}

impl BaselineSuite {
    pub fn build(width: usize, height: usize, seed: u64) -> Result<Self> {
        let basic_colors = BASIC_COLORS
            .iter()
            .map(|(name, rgb)| Ok((name.to_string(), CamouflagePattern::solid(width, height, *rgb)?)))
            .collect::<Result<_>>()?;
        let random_patterns = (0..RANDOM_BASELINES as u64)
            .map(|i| CamouflagePattern::new_random(width, height, derive_seed(&[seed, 0xBA5E, i])))
            .collect::<Result<_>>()?;
        Ok(Self {
            basic_colors,
            random_patterns,
        })
    }

    pub fn len(&self) -> usize {
        self.basic_colors.len() + self.random_patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-pattern reports behind one comparison, kept for inspection.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub split: Split,
    pub color_reports: Vec<EvalReport>,
    pub random_reports: Vec<EvalReport>,
    /// Rows in table order: basic colors, random, then ours when supplied.
    pub rows: Vec<EvalReport>,
}

impl Comparison {
    pub fn row(&self, label: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.camouflage_label == label)
    }
}

/// Evaluates every baseline (and the learned pattern, if any) on the same
/// transformations of `split`. The color and random rows are means of the
/// per-pattern reports.
pub fn evaluate_all<S: SceneScorer + ?Sized>(
    suite: &BaselineSuite,
    ours: Option<&CamouflagePattern>,
    scorer: &S,
    grid: &[Transformation],
    split: Split,
) -> Result<Comparison> {
    let color_reports = suite
        .basic_colors
        .iter()
        .map(|(name, p)| evaluate_pattern(scorer, p, grid, split, name))
        .collect::<Result<Vec<_>>>()?;
    let random_reports = suite
        .random_patterns
        .iter()
        .enumerate()
        .map(|(i, p)| evaluate_pattern(scorer, p, grid, split, &format!("random-{i}")))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![
        mean_of_reports(&color_reports, LABEL_COLORS)?,
        mean_of_reports(&random_reports, LABEL_RANDOM)?,
    ];
    if let Some(p) = ours {
        rows.push(evaluate_pattern(scorer, p, grid, split, LABEL_OURS)?);
    }
    Ok(Comparison {
        split,
        color_reports,
        random_reports,
        rows,
    })
}
