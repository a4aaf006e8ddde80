//! Command orchestration behind the `cca` binary.
//!
//! Configuration resolves in three layers: built-in defaults, an optional
//! JSON file (`--config`, which may also be a previous run's manifest), then
//! command-line flags. The resolved form is written to `manifest.json` so a
//! run can be repeated exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_all, BaselineSuite};
use crate::bridge::{BridgeConfig, BridgeScorer, PROTOCOL_VERSION};
use crate::distribution::derive_seed;
use crate::error::{Error, Result};
use crate::evolve::{save_history_csv, Mode, Optimizer, OptimizerConfig, RunOutcome};
use crate::metrics::{evaluate_pattern, save_reports, EvalReport};
use crate::scene::{
    build_transformation_grid, export_grid_json, filter_split, subsample, SceneScorer, Split,
    Transformation, NUM_ORIENTATIONS, NUM_TRAIN_LOCATIONS,
};
use crate::synthsim::{SynthParams, SynthSceneSpec, SynthScorer};
use crate::texture::CamouflagePattern;

pub const PATTERN_FILE: &str = "pattern.ppm";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRID_FILE: &str = "grid.json";
pub const SCENE_FILE: &str = "scene.json";

const INIT_SEED_TAG: u64 = 0x1A17;
const BASELINE_SEED_TAG: u64 = 0xBA5E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Attack,
    Enhance,
    Eval,
    Baselines,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Synth,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Test,
    Both,
}

impl SplitChoice {
    pub fn splits(self) -> Vec<Split> {
        match self {
            SplitChoice::Train => vec![Split::Train],
            SplitChoice::Test => vec![Split::Test],
            SplitChoice::Both => vec![Split::Train, Split::Test],
        }
    }
}

/// Every knob a run can take. All fields optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Scene scorer backend.
    #[arg(long, value_enum)]
    pub scorer: Option<ScorerKind>,
    /// Bridge service base URL (required with --scorer bridge).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Bridge request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Bridge retries on transport failure.
    #[arg(long)]
    pub retries: Option<u32>,
    /// Learning rate.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Search radius in channel units.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Candidates per iteration.
    #[arg(long)]
    pub lambda: Option<usize>,
    /// Iteration budget.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations without improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Base seed for initialization, sampling and baselines.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for the transformation grid and the synthetic world.
    #[arg(long)]
    pub scene_seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<SplitChoice>,
    /// Learned pattern (PPM with optional JSON sidecar) for eval/baselines.
    #[arg(long)]
    pub ours: Option<PathBuf>,
    /// Locations used per split (at most 18).
    #[arg(long)]
    pub locations: Option<u32>,
    /// Camera orientations used per location (at most 20).
    #[arg(long)]
    pub orientations: Option<u32>,
    /// Synthetic scorer noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Synthetic world JSON to use instead of generating one.
    #[arg(long)]
    pub scene: Option<PathBuf>,
}

impl Overrides {
    /// `other` wins wherever it sets a value.
    pub fn merged_with(self, other: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            scorer, endpoint, timeout, retries, alpha, sigma, lambda, iters, patience, seed,
            scene_seed, width, height, out, split, ours, locations, orientations, noise, scene
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub bridge: Option<BridgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub scene_seed: u64,
    pub locations_per_split: u32,
    pub orientations: u32,
    pub noise_std: f64,
    pub scene_file: Option<PathBuf>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub scorer: ScorerConfig,
    pub alpha: f64,
    pub sigma: f64,
    pub lambda: usize,
    pub max_iterations: usize,
    pub patience: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub out: PathBuf,
    pub split: SplitChoice,
    pub ours: Option<PathBuf>,
    pub scene: SceneConfig,
}

impl RunConfig {
    pub fn resolve(command: Command, o: Overrides) -> Result<Self> {
        let kind = o.scorer.unwrap_or(ScorerKind::Synth);
        let bridge = match (kind, &o.endpoint) {
            (ScorerKind::Bridge, None) => {
                return Err(Error::Config("--scorer bridge requires --endpoint".into()))
            }
            (_, Some(endpoint)) => {
                let mut b = BridgeConfig::new(endpoint.clone());
                if let Some(t) = o.timeout {
                    b.timeout_secs = t;
                }
                if let Some(r) = o.retries {
                    b.retry_limit = r;
                }
                b.validate()?;
                Some(b)
            }
            (_, None) => None,
        };
        let cfg = RunConfig {
            command,
            scorer: ScorerConfig { kind, bridge },
            alpha: o.alpha.unwrap_or(OptimizerConfig::DEFAULT_ALPHA),
            sigma: o.sigma.unwrap_or(OptimizerConfig::DEFAULT_SIGMA),
            lambda: o.lambda.unwrap_or(OptimizerConfig::DEFAULT_LAMBDA),
            max_iterations: o.iters.unwrap_or(OptimizerConfig::DEFAULT_MAX_ITERATIONS),
            patience: o.patience.unwrap_or(OptimizerConfig::DEFAULT_PATIENCE),
            seed: o.seed.unwrap_or(0),
            width: o.width.unwrap_or(16),
            height: o.height.unwrap_or(16),
            out: o.out.unwrap_or_else(|| PathBuf::from("cca-out")),
            split: o.split.unwrap_or(SplitChoice::Both),
            ours: o.ours,
            scene: SceneConfig {
                scene_seed: o.scene_seed.unwrap_or(0),
                locations_per_split: o.locations.unwrap_or(NUM_TRAIN_LOCATIONS),
                orientations: o.orientations.unwrap_or(NUM_ORIENTATIONS),
                noise_std: o.noise.unwrap_or(0.02),
                scene_file: o.scene,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidDimension(format!(
                "pattern must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        let s = &self.scene;
        if s.locations_per_split == 0 || s.locations_per_split > NUM_TRAIN_LOCATIONS {
            return Err(Error::Config(format!(
                "--locations must be in 1..={NUM_TRAIN_LOCATIONS}"
            )));
        }
        if s.orientations == 0 || s.orientations > NUM_ORIENTATIONS {
            return Err(Error::Config(format!("--orientations must be in 1..={NUM_ORIENTATIONS}")));
        }
        if self.command == Command::Eval && self.ours.is_none() {
            return Err(Error::Config("eval requires --ours PATH".into()));
        }
        Ok(())
    }
}

/// Written next to every run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub protocol: String,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
}

impl Manifest {
    /// Flag layer that reproduces this run.
    pub fn to_overrides(&self) -> Overrides {
        let c = &self.config;
        let bridge = c.scorer.bridge.as_ref();
        Overrides {
            scorer: Some(c.scorer.kind),
            endpoint: bridge.map(|b| b.endpoint.clone()),
            timeout: bridge.map(|b| b.timeout_secs),
            retries: bridge.map(|b| b.retry_limit),
            alpha: Some(c.alpha),
            sigma: Some(c.sigma),
            lambda: Some(c.lambda),
            iters: Some(c.max_iterations),
            patience: Some(c.patience),
            seed: Some(c.seed),
            scene_seed: Some(c.scene.scene_seed),
            width: Some(c.width),
            height: Some(c.height),
            out: Some(c.out.clone()),
            split: Some(c.split),
            ours: c.ours.clone(),
            locations: Some(c.scene.locations_per_split),
            orientations: Some(c.scene.orientations),
            noise: Some(c.scene.noise_std),
            scene: c.scene.scene_file.clone(),
        }
    }
}

/// Reads a JSON config file: either a bare override set or a run manifest.
pub fn load_config_file(path: &Path) -> Result<Overrides> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("config").is_some() && value.get("tool").is_some() {
        let manifest: Manifest = serde_json::from_value(value)?;
        return Ok(manifest.to_overrides());
    }
    Ok(serde_json::from_value(value)?)
}

/// The transformations used by a run (both splits).
pub fn transformation_set(cfg: &RunConfig) -> Result<Vec<Transformation>> {
    if let Some(path) = &cfg.scene.scene_file {
        return Ok(SynthSceneSpec::load_json(path)?.transformations());
    }
    let grid = build_transformation_grid(cfg.scene.scene_seed);
    Ok(subsample(&grid, cfg.scene.locations_per_split, cfg.scene.orientations))
}

pub fn synth_spec(cfg: &RunConfig, transformations: &[Transformation]) -> Result<SynthSceneSpec> {
    if let Some(path) = &cfg.scene.scene_file {
        return SynthSceneSpec::load_json(path);
    }
    let params = SynthParams {
        seed: cfg.scene.scene_seed,
        pattern_width: cfg.width,
        pattern_height: cfg.height,
        noise_std: cfg.scene.noise_std,
        ..SynthParams::default()
    };
    SynthSceneSpec::generate(&params, transformations)
}

pub fn build_scorer(
    cfg: &RunConfig,
    transformations: &[Transformation],
) -> Result<Box<dyn SceneScorer>> {
    match cfg.scorer.kind {
        ScorerKind::Synth => Ok(Box::new(SynthScorer::new(synth_spec(cfg, transformations)?)?)),
        ScorerKind::Bridge => {
            let bridge = cfg
                .scorer
                .bridge
                .clone()
                .ok_or_else(|| Error::Config("bridge scorer requires an endpoint".into()))?;
            let scorer = BridgeScorer::new(bridge)?;
            scorer.healthcheck()?;
            Ok(Box::new(scorer))
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_manifest(cfg: &RunConfig, artifacts: &[&str]) -> Result<()> {
    let manifest = Manifest {
        tool: "cca".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        protocol: PROTOCOL_VERSION.into(),
        config: cfg.clone(),
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    let path = cfg.out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
}

fn load_ours(cfg: &RunConfig) -> Result<Option<CamouflagePattern>> {
    cfg.ours
        .as_ref()
        .map(|p| {
            let loaded = CamouflagePattern::load(p)?;
            if loaded.precision == crate::texture::Precision::Rounded {
                log::warn!("{}: no JSON sidecar, using 8-bit channels", p.display());
            }
            Ok(loaded.pattern)
        })
        .transpose()
}

fn evaluate_splits(
    scorer: &dyn SceneScorer,
    pattern: &CamouflagePattern,
    grid: &[Transformation],
    split: SplitChoice,
    label: &str,
) -> Result<Vec<EvalReport>> {
    split
        .splits()
        .into_iter()
        .filter(|s| !filter_split(grid, *s).is_empty())
        .map(|s| evaluate_pattern(scorer, pattern, grid, s, label))
        .collect()
}

/// Result of an attack or enhance command.
#[derive(Debug)]
pub struct SearchRun {
    pub outcome: RunOutcome,
    pub reports: Vec<EvalReport>,
}

/// Runs the optimizer on the training split and writes pattern, curve, reports and manifest.
pub fn cmd_search(cfg: &RunConfig, mode: Mode) -> Result<SearchRun> {
    prepare_out(&cfg.out)?;
    let grid = transformation_set(cfg)?;
    let scorer = build_scorer(cfg, &grid)?;
    let train = filter_split(&grid, Split::Train);
    let opt_cfg = OptimizerConfig {
        mode,
        alpha: cfg.alpha,
        sigma: cfg.sigma,
        lambda: cfg.lambda,
        max_iterations: cfg.max_iterations,
        patience: cfg.patience,
        tolerance: OptimizerConfig::DEFAULT_TOLERANCE,
        base_seed: cfg.seed,
        transformations: train,
    };
    let initial =
        CamouflagePattern::new_random(cfg.width, cfg.height, derive_seed(&[cfg.seed, INIT_SEED_TAG]))?;
    let optimizer = Optimizer::new(opt_cfg, &*scorer)?;
    let outcome = optimizer.run(initial)?;
    log::info!(
        "{:?} finished after {} iterations ({:?}); best objective {:.6}",
        mode,
        outcome.final_state.iteration,
        outcome.stop_reason,
        outcome.best.objective
    );

    outcome.best.pattern.save(cfg.out.join(PATTERN_FILE))?;
    save_history_csv(&outcome.history, &cfg.out.join(CURVE_FILE))?;
    let reports = evaluate_splits(&*scorer, &outcome.best.pattern, &grid, SplitChoice::Both, "ours")?;
    save_reports(&reports, &cfg.out.join(REPORT_CSV), &cfg.out.join(REPORT_JSON))?;
    write_manifest(
        cfg,
        &[PATTERN_FILE, "pattern.json", CURVE_FILE, REPORT_CSV, REPORT_JSON],
    )?;
    Ok(SearchRun { outcome, reports })
}

pub fn cmd_attack(cfg: &RunConfig) -> Result<SearchRun> {
    cmd_search(cfg, Mode::Attack)
}

pub fn cmd_enhance(cfg: &RunConfig) -> Result<SearchRun> {
    cmd_search(cfg, Mode::Enhance)
}

/// Evaluates `--ours` on the selected split(s).
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    prepare_out(&cfg.out)?;
    let ours = load_ours(cfg)?.ok_or_else(|| Error::Config("eval requires --ours PATH".into()))?;
    let grid = transformation_set(cfg)?;
    let scorer = build_scorer(cfg, &grid)?;
    let reports = evaluate_splits(&*scorer, &ours, &grid, cfg.split, "ours")?;
    save_reports(&reports, &cfg.out.join(REPORT_CSV), &cfg.out.join(REPORT_JSON))?;
    write_manifest(cfg, &[REPORT_CSV, REPORT_JSON])?;
    Ok(reports)
}

/// Writes the baseline comparison table, one block per split.
pub fn cmd_baselines(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    prepare_out(&cfg.out)?;
    let ours = load_ours(cfg)?;
    let grid = transformation_set(cfg)?;
    let scorer = build_scorer(cfg, &grid)?;
    let suite = BaselineSuite::build(cfg.width, cfg.height, derive_seed(&[cfg.seed, BASELINE_SEED_TAG]))?;
    let mut rows = Vec::new();
    for split in cfg.split.splits() {
        if filter_split(&grid, split).is_empty() {
            continue;
        }
        let cmp = evaluate_all(&suite, ours.as_ref(), &*scorer, &grid, split)?;
        rows.extend(cmp.rows);
    }
    save_reports(&rows, &cfg.out.join(COMPARISON_CSV), &cfg.out.join(COMPARISON_JSON))?;
    write_manifest(cfg, &[COMPARISON_CSV, COMPARISON_JSON])?;
    Ok(rows)
}

/// Writes the transformation grid and the synthetic world for an external service.
pub fn cmd_export(cfg: &RunConfig) -> Result<()> {
    prepare_out(&cfg.out)?;
    let grid = transformation_set(cfg)?;
    export_grid_json(&grid, cfg.out.join(GRID_FILE))?;
    synth_spec(cfg, &grid)?.save_json(cfg.out.join(SCENE_FILE))?;
    write_manifest(cfg, &[GRID_FILE, SCENE_FILE])
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        Command::Attack => cmd_attack(cfg).map(drop),
        Command::Enhance => cmd_enhance(cfg).map(drop),
        Command::Eval => cmd_eval(cfg).map(drop),
        Command::Baselines => cmd_baselines(cfg).map(drop),
        Command::Export => cmd_export(cfg),
    }
}
