//! The evolution-strategy search loop.
//!
//! Each iteration draws `lambda` candidates from the truncated normal around
//! the current pattern, scores every candidate on every transformation,
//! turns the scores into a search-gradient estimate and takes one plain
//! gradient step. The loop stops once the best objective has not improved by
//! more than `tolerance` for `patience` consecutive iterations.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{derive_seed, score_gradient, SearchDistribution};
use crate::error::{Error, Result};
use crate::objective::{bce_zero, standardize};
use crate::scene::{map_scored, SceneScorer, Transformation};
use crate::texture::CamouflagePattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Minimize the unpainted vehicles' mean score.
    Attack,
    /// Maximize it.
    Enhance,
}

impl Mode {
    /// Whether `candidate` beats `incumbent` by more than `tol`.
    fn improves(self, candidate: f64, incumbent: f64, tol: f64) -> bool {
        match self {
            Mode::Attack => candidate < incumbent - tol,
            Mode::Enhance => candidate > incumbent + tol,
        }
    }

    fn better(self, candidate: f64, incumbent: f64) -> bool {
        self.improves(candidate, incumbent, 0.0)
    }

    /// Gradient of this mode's objective given the attack-mode estimate.
    pub fn orient(self, attack_gradient: Vec<f64>) -> Vec<f64> {
        match self {
            Mode::Attack => attack_gradient,
            Mode::Enhance => attack_gradient.into_iter().map(|g| -g).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub mode: Mode,
    /// Learning rate, in channel units per unit of estimated gradient.
    pub alpha: f64,
    /// Search radius in channel units.
    pub sigma: f64,
    /// Candidates per iteration.
    pub lambda: usize,
    pub max_iterations: usize,
    pub patience: usize,
    /// Minimum change of the best objective that counts as progress.
    pub tolerance: f64,
    pub base_seed: u64,
    pub transformations: Vec<Transformation>,
}

impl OptimizerConfig {
    pub const DEFAULT_ALPHA: f64 = 1000.0;
    pub const DEFAULT_SIGMA: f64 = 10.0;
    pub const DEFAULT_LAMBDA: usize = 20;
    pub const DEFAULT_MAX_ITERATIONS: usize = 300;
    pub const DEFAULT_PATIENCE: usize = 10;
    pub const DEFAULT_TOLERANCE: f64 = 1e-4;

    pub fn new(mode: Mode, transformations: Vec<Transformation>) -> Self {
        Self {
            mode,
            alpha: Self::DEFAULT_ALPHA,
            sigma: Self::DEFAULT_SIGMA,
            lambda: Self::DEFAULT_LAMBDA,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            patience: Self::DEFAULT_PATIENCE,
            tolerance: Self::DEFAULT_TOLERANCE,
            base_seed: 0,
            transformations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.lambda < 2 {
            return Err(Error::InsufficientPopulation(self.lambda));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be >= 0, got {}", self.tolerance)));
        }
        if self.transformations.is_empty() {
            return Err(Error::Config("transformation set is empty".into()));
        }
        crate::scene::check_unique(&self.transformations)
    }
}

/// Mean vehicle scores indexed by `(transformation, candidate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    transformations: usize,
    candidates: usize,
    cells: Vec<Option<f64>>,
}

impl EvaluationGrid {
    pub fn new(transformations: usize, candidates: usize) -> Self {
        Self {
            transformations,
            candidates,
            cells: vec![None; transformations * candidates],
        }
    }

    /// Builds a complete grid from rows of per-candidate scores, one row per transformation.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let candidates = rows.first().map_or(0, Vec::len);
        let mut grid = Self::new(rows.len(), candidates);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != candidates {
                return Err(Error::DimensionMismatch {
                    expected: format!("{candidates} candidates"),
                    got: format!("{} in row {t}", row.len()),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                grid.set(t, k, v);
            }
        }
        Ok(grid)
    }

    pub fn set(&mut self, transformation: usize, candidate: usize, score: f64) {
        self.cells[transformation * self.candidates + candidate] = Some(score);
    }

    pub fn get(&self, transformation: usize, candidate: usize) -> Result<f64> {
        self.cells
            .get(transformation * self.candidates + candidate)
            .copied()
            .flatten()
            .ok_or(Error::IncompleteEvaluation {
                transformation,
                candidate,
            })
    }

    pub fn transformations(&self) -> usize {
        self.transformations
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }
}

/// Search-gradient estimate of the attack objective:
///
/// `1 / (lambda |T| sigma^2) * sum_t sum_k beta_k * H(S_t(z_k)) * (z_k - c)`
///
/// with `beta` the z-scored transformation-averaged candidate scores and
/// `H(s) = -ln(1 - s)`.
pub fn estimate_gradient(
    dist: &SearchDistribution,
    evaluations: &EvaluationGrid,
    candidates: &[CamouflagePattern],
) -> Result<Vec<f64>> {
    let lambda = candidates.len();
    if lambda < 2 {
        return Err(Error::InsufficientPopulation(lambda));
    }
    if evaluations.candidates() != lambda || evaluations.transformations() == 0 {
        return Err(Error::DimensionMismatch {
            expected: format!("evaluations for {lambda} candidates"),
            got: format!(
                "{} transformations x {} candidates",
                evaluations.transformations(),
                evaluations.candidates()
            ),
        });
    }
    let n_t = evaluations.transformations();

    // per-candidate mean over T, and sum over T of shaped scores
    let mut means = vec![0.0; lambda];
    let mut shaped = vec![0.0; lambda];
    for t in 0..n_t {
        for k in 0..lambda {
            let s = evaluations.get(t, k)?;
            means[k] += s;
            shaped[k] += bce_zero(s)?;
        }
    }
    means.iter_mut().for_each(|m| *m /= n_t as f64);
    let beta = standardize(&means)?;

    let mean = dist.mean();
    let mut grad = vec![0.0; mean.len()];
    for (k, z) in candidates.iter().enumerate() {
        let weight = beta[k] * shaped[k];
        if weight == 0.0 {
            continue;
        }
        // score_gradient already divides by sigma^2
        let factor = score_gradient(mean, z, dist.sigma())?;
        for (g, f) in grad.iter_mut().zip(factor) {
            *g += weight * f;
        }
    }
    let scale = 1.0 / (lambda * n_t) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub objective: f64,
    pub best_objective: f64,
    pub stall_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRecord {
    pub pattern: CamouflagePattern,
    pub objective: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub iteration: usize,
    pub current: CamouflagePattern,
    pub current_objective: f64,
    pub best: BestRecord,
    pub stall_count: usize,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    IterationBudget,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: BestRecord,
    pub history: Vec<HistoryEntry>,
    pub final_state: SearchState,
    pub stop_reason: StopReason,
}

/// Drives a [`SceneScorer`] through the search loop.
pub struct Optimizer<S> {
    config: OptimizerConfig,
    scorer: S,
}

impl<S: SceneScorer> Optimizer<S> {
    pub fn new(config: OptimizerConfig, scorer: S) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, scorer })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn scorer(&self) -> &S {
        &self.scorer
    }

    /// Mean over the configured transformations of the mean unpainted-vehicle score.
    pub fn objective(&self, pattern: &CamouflagePattern) -> Result<f64> {
        let scores = map_scored(
            self.scorer.concurrency(),
            &self.config.transformations,
            |t| self.scene_score(pattern, t),
        )?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    }

    fn scene_score(&self, pattern: &CamouflagePattern, t: &Transformation) -> Result<f64> {
        let scene = self.scorer.score_scene(pattern, t)?;
        scene.validate()?;
        Ok(scene.vehicle_score().value)
    }

    pub fn init(&self, initial: CamouflagePattern) -> Result<SearchState> {
        let objective = self.objective(&initial)?;
        Ok(SearchState {
            iteration: 0,
            current: initial.clone(),
            current_objective: objective,
            best: BestRecord {
                pattern: initial,
                objective,
                iteration: 0,
            },
            stall_count: 0,
            history: vec![HistoryEntry {
                iteration: 0,
                objective,
                best_objective: objective,
                stall_count: 0,
            }],
        })
    }

    /// Seed shared by all candidates of iteration `iteration`.
    pub fn iteration_seed(&self, iteration: usize) -> u64 {
        derive_seed(&[self.config.base_seed, iteration as u64])
    }

    /// Candidates and their scores for the iteration following `state`.
    pub fn evaluate_population(
        &self,
        state: &SearchState,
    ) -> Result<(SearchDistribution, Vec<CamouflagePattern>, EvaluationGrid)> {
        let dist = SearchDistribution::new(
            state.current.clone(),
            self.config.sigma,
            self.config.lambda,
        )?;
        let candidates = dist.sample_population(self.iteration_seed(state.iteration));
        let n_t = self.config.transformations.len();
        let cells: Vec<(usize, usize)> = (0..n_t)
            .flat_map(|t| (0..candidates.len()).map(move |k| (t, k)))
            .collect();
        let scores = map_scored(self.scorer.concurrency(), &cells, |&(t, k)| {
            self.scene_score(&candidates[k], &self.config.transformations[t])
        })?;
        let mut grid = EvaluationGrid::new(n_t, candidates.len());
        for (&(t, k), s) in cells.iter().zip(scores) {
            grid.set(t, k, s);
        }
        Ok((dist, candidates, grid))
    }

    /// One iteration. On error the input state is untouched.
    pub fn step(&self, state: &SearchState) -> Result<SearchState> {
        let (dist, candidates, grid) = self.evaluate_population(state)?;
        let attack = estimate_gradient(&dist, &grid, &candidates)?;
        let grad = self.config.mode.orient(attack);
        let values = state
            .current
            .channels()
            .iter()
            .zip(&grad)
            .map(|(c, g)| c - self.config.alpha * g)
            .collect();
        let current = CamouflagePattern::clamp(state.current.width(), state.current.height(), values)?;
        let objective = self.objective(&current)?;

        let iteration = state.iteration + 1;
        let mode = self.config.mode;
        let mut best = state.best.clone();
        let stall_count = if mode.improves(objective, best.objective, self.config.tolerance) {
            0
        } else {
            state.stall_count + 1
        };
        if mode.better(objective, best.objective) {
            best = BestRecord {
                pattern: current.clone(),
                objective,
                iteration,
            };
        }
        let mut history = state.history.clone();
        history.push(HistoryEntry {
            iteration,
            objective,
            best_objective: best.objective,
            stall_count,
        });
        log::debug!(
            "iteration {iteration}: objective {objective:.6}, best {:.6}, stall {stall_count}",
            best.objective
        );
        Ok(SearchState {
            iteration,
            current,
            current_objective: objective,
            best,
            stall_count,
            history,
        })
    }

    /// Iterates until the stall budget or the iteration budget is exhausted.
    /// Returns the best pattern seen, not the last one.
    pub fn run(&self, initial: CamouflagePattern) -> Result<RunOutcome> {
        let mut state = self.init(initial)?;
        let stop_reason = loop {
            if state.stall_count >= self.config.patience {
                break StopReason::Converged;
            }
            if state.iteration >= self.config.max_iterations {
                break StopReason::IterationBudget;
            }
            state = self.step(&state)?;
        };
        Ok(RunOutcome {
            best: state.best.clone(),
            history: state.history.clone(),
            final_state: state,
            stop_reason,
        })
    }
}

pub const HISTORY_CSV_HEADER: &str = "iteration,objective,best_objective,stall_count";

pub fn write_history_csv<W: Write>(history: &[HistoryEntry], mut out: W) -> Result<()> {
    let mut text = String::with_capacity(history.len() * 48);
    text.push_str(HISTORY_CSV_HEADER);
    text.push('\n');
    for h in history {
        text.push_str(&format!(
            "{},{},{},{}\n",
            h.iteration, h.objective, h.best_objective, h.stall_count
        ));
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<history>", e))
}

pub fn save_history_csv(history: &[HistoryEntry], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_history_csv(history, file)
}
