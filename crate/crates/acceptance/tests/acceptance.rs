//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cca::baseline::{LABEL_COLORS, LABEL_OURS, LABEL_RANDOM};
use cca::cli::{self, Command, Overrides, RunConfig, CURVE_FILE, MANIFEST_FILE, PATTERN_FILE, REPORT_CSV, REPORT_JSON};
use cca::distribution::{derive_seed, SearchDistribution};
use cca::evolve::{estimate_gradient, EvaluationGrid, Mode, Optimizer, OptimizerConfig};
use cca::metrics::{aggregate, image_iou, iou, EvalReport, ImageResult};
use cca::objective::{bce_zero, standardize};
use cca::scene::{build_transformation_grid, BBox, Detection, GroundTruth, SceneScore, SceneScorer, Split, Transformation};
use cca::synthsim::{analytic_optimum, SynthParams, SynthSceneSpec, SynthScorer};
use cca::texture::CamouflagePattern;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- convergence

fn convergence() -> Check {
    let started = Instant::now();
    let t = build_transformation_grid(11)[0];
    let params = SynthParams { seed: 11, pattern_width: 16, pattern_height: 16, noise_std: 0.0, ..Default::default() };
    let spec = SynthSceneSpec::generate(&params, &[t]).map_err(fail)?;
    let optimum = analytic_optimum(&spec, &t).map_err(fail)?;
    let scorer = SynthScorer::new(spec).map_err(fail)?;
    let cfg = OptimizerConfig {
        alpha: 5.0,
        sigma: 10.0,
        lambda: 20,
        max_iterations: 300,
        patience: 300,
        base_seed: 11,
        ..OptimizerConfig::new(Mode::Attack, vec![t])
    };
    let opt = Optimizer::new(cfg, &scorer).map_err(fail)?;
    let target = opt.objective(&optimum).map_err(fail)?;
    let initial = CamouflagePattern::new_random(16, 16, 11).map_err(fail)?;
    let out = opt.run(initial).map_err(fail)?;
    let elapsed = started.elapsed();
    let gap = out.best.objective - target;
    ensure(
        gap <= 0.05 && elapsed < Duration::from_secs(60),
        format!(
            "start {:.4} -> best {:.4} after {} iterations, optimum {:.4}, gap {:.4} (need <= 0.05), {:.1}s",
            out.history[0].objective,
            out.best.objective,
            out.final_state.iteration,
            target,
            gap,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------- table comparisons

fn six_transformation_overrides(seed: u64, out: &Path) -> Overrides {
    Overrides {
        seed: Some(seed),
        scene_seed: Some(seed),
        width: Some(16),
        height: Some(16),
        locations: Some(3),
        orientations: Some(1),
        noise: Some(0.02),
        patience: Some(300),
        out: Some(out.to_path_buf()),
        ..Default::default()
    }
}

/// Runs a search, then the baseline table with the learned pattern.
fn table_for(command: Command, seed: u64, out: &Path) -> Result<Vec<EvalReport>, String> {
    let cfg = RunConfig::resolve(command, six_transformation_overrides(seed, out)).map_err(fail)?;
    cli::run(&cfg).map_err(fail)?;
    let mut o = six_transformation_overrides(seed, out);
    o.ours = Some(out.join(PATTERN_FILE));
    let cfg = RunConfig::resolve(Command::Baselines, o).map_err(fail)?;
    cli::cmd_baselines(&cfg).map_err(fail)
}

fn row<'a>(rows: &'a [EvalReport], split: Split, label: &str) -> Result<&'a EvalReport, String> {
    rows.iter()
        .find(|r| r.split == split && r.camouflage_label == label)
        .ok_or_else(|| format!("missing {label} row for {split:?}"))
}

fn relative_ordering() -> Check {
    let started = Instant::now();
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 1..=3u64 {
        let dir = tempfile::tempdir().map_err(fail)?;
        let rows = table_for(Command::Attack, seed, dir.path())?;
        let mut ok = true;
        for split in [Split::Train, Split::Test] {
            let ours = row(&rows, split, LABEL_OURS)?;
            for label in [LABEL_RANDOM, LABEL_COLORS] {
                let base = row(&rows, split, label)?;
                ok &= ours.detection_confidence <= base.detection_confidence
                    && ours.miou <= base.miou
                    && ours.p_at_05 <= base.p_at_05;
            }
            notes.push(format!(
                "s{seed}/{}: ours {:.1}/{:.1}/{:.1} random {:.1}/{:.1}/{:.1} colors {:.1}/{:.1}/{:.1}",
                split.as_str(),
                ours.detection_confidence,
                ours.miou,
                ours.p_at_05,
                row(&rows, split, LABEL_RANDOM)?.detection_confidence,
                row(&rows, split, LABEL_RANDOM)?.miou,
                row(&rows, split, LABEL_RANDOM)?.p_at_05,
                row(&rows, split, LABEL_COLORS)?.detection_confidence,
                row(&rows, split, LABEL_COLORS)?.miou,
                row(&rows, split, LABEL_COLORS)?.p_at_05,
            ));
        }
        passed += usize::from(ok);
    }
    let elapsed = started.elapsed();
    ensure(
        passed == 3 && elapsed < Duration::from_secs(300),
        format!("{passed}/3 seeds, {:.1}s; conf/mIoU/P@0.5: {}", elapsed.as_secs_f64(), notes.join("; ")),
    )
}

fn enhance_mode() -> Check {
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 1..=3u64 {
        let dir = tempfile::tempdir().map_err(fail)?;
        let rows = table_for(Command::Enhance, seed, dir.path())?;
        let mut ok = true;
        for split in [Split::Train, Split::Test] {
            let ours = row(&rows, split, LABEL_OURS)?.detection_confidence;
            let random = row(&rows, split, LABEL_RANDOM)?.detection_confidence;
            ok &= ours > random;
            notes.push(format!("s{seed}/{}: {ours:.2} vs {random:.2}", split.as_str()));
        }
        passed += usize::from(ok);
    }
    ensure(passed == 3, format!("{passed}/3 seeds; enhanced vs random confidence: {}", notes.join(", ")))
}

// ------------------------------------------------------------ gradient oracle

/// `f(c) = logistic(a + sum_j h_j (c_j / 255 - m_j)^2)` over a 2x2 pattern.
struct QuadLogistic {
    a: f64,
    h: Vec<f64>,
    m: Vec<f64>,
}

impl QuadLogistic {
    fn logit(&self, c: &[f64]) -> f64 {
        self.a
            + c.iter()
                .zip(&self.h)
                .zip(&self.m)
                .map(|((c, h), m)| h * (c / 255.0 - m).powi(2))
                .sum::<f64>()
    }

    fn score(&self, c: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.logit(c)).exp())
    }

    /// `-ln(1 - f)` written as softplus of the logit.
    fn shaped(&self, c: &[f64]) -> f64 {
        let q = self.logit(c);
        q.max(0.0) + (-q.abs()).exp().ln_1p()
    }
}

fn gradient_descent_property() -> Check {
    const SIGMA: f64 = 4.0;
    const LAMBDA: usize = 8;
    const ESTIMATES: u64 = 2000;
    const MC: usize = 100_000;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = 2 * 2 * 3;
    let f = QuadLogistic {
        a: -1.0,
        h: (0..d).map(|_| rng.random_range(1.0..4.0)).collect(),
        m: (0..d).map(|_| rng.random_range(0.1..0.9)).collect(),
    };
    let center: Vec<f64> = (0..d).map(|_| 255.0 * rng.random_range(0.3..0.7)).collect();
    let mean = CamouflagePattern::from_channels(2, 2, center.clone()).map_err(fail)?;
    let dist = SearchDistribution::new(mean, SIGMA, LAMBDA).map_err(fail)?;

    let mut avg = vec![0.0; d];
    for i in 0..ESTIMATES {
        let candidates = dist.sample_population(derive_seed(&[77, i]));
        let row: Vec<f64> = candidates.iter().map(|z| f.score(z.channels())).collect();
        let grid = EvaluationGrid::from_rows(&[row]).map_err(fail)?;
        let g = estimate_gradient(&dist, &grid, &candidates).map_err(fail)?;
        avg.iter_mut().zip(g).for_each(|(a, g)| *a += g / ESTIMATES as f64);
    }

    // Gaussian-smoothed shaped objective, central differences with common random numbers.
    let mut mc_rng = ChaCha8Rng::seed_from_u64(99);
    let noise: Vec<f64> = (0..MC * d).map(|_| mc_rng.sample(StandardNormal)).collect();
    let smoothed = |c: &[f64]| {
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        for z in noise.chunks(d) {
            for j in 0..d {
                point[j] = (c[j] + SIGMA * z[j]).clamp(0.0, 255.0);
            }
            total += f.shaped(&point);
        }
        total / MC as f64
    };
    let step = 1e-2 * SIGMA;
    let truth: Vec<f64> = (0..d)
        .map(|j| {
            let mut plus = center.clone();
            let mut minus = center.clone();
            plus[j] += step;
            minus[j] -= step;
            (smoothed(&plus) - smoothed(&minus)) / (2.0 * step)
        })
        .collect();

    let dot: f64 = avg.iter().zip(&truth).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&avg) * norm(&truth));
    ensure(
        cosine > 0.9,
        format!("cosine {cosine:.5} (angle {:.2} deg), need > 0.9", cosine.clamp(-1.0, 1.0).acos().to_degrees()),
    )
}

// ------------------------------------------------------------- metric oracles

fn rasterized_iou(a: [i64; 4], b: [i64; 4]) -> (u64, u64) {
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0, 0);
    for y in 0..64 {
        for x in 0..64 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    (inter, union)
}

fn random_box(rng: &mut ChaCha8Rng) -> [i64; 4] {
    let (x0, y0) = (rng.random_range(0..63), rng.random_range(0..63));
    [x0, y0, rng.random_range(x0 + 1..=64), rng.random_range(y0 + 1..=64)]
}

fn to_bbox(r: [i64; 4]) -> BBox {
    BBox::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64).unwrap()
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        let (inter, union) = rasterized_iou(a, b);
        if iou(&to_bbox(a), &to_bbox(b)) != inter as f64 / union as f64 {
            mismatches += 1;
        }
    }
    // (0,0,2,1) against (0,0,1,1): IoU is exactly one half.
    let half = image_iou(&[to_bbox([0, 0, 2, 1])], &[to_bbox([0, 0, 1, 1])]).map_err(fail)?;
    let image = |iou| ImageResult { mean_confidence: 0.5, iou, no_detection: false };
    let at_half = aggregate(&[image(half)], Split::Test, "x").map_err(fail)?.p_at_05;
    let above = aggregate(&[image(0.5 + 1e-12)], Split::Test, "x").map_err(fail)?.p_at_05;
    ensure(
        mismatches == 0 && half == 0.5 && at_half == 0.0 && above == 100.0,
        format!("{mismatches}/1000 rasterization mismatches; IoU {half} -> P@0.5 {at_half}%, just above -> {above}%"),
    )
}

// --------------------------------------------------- standardization, shaping

struct Constant;

impl SceneScorer for Constant {
    fn score_scene(&self, _: &CamouflagePattern, _: &Transformation) -> cca::Result<SceneScore> {
        let bbox = BBox::new(0.0, 0.0, 10.0, 10.0)?;
        Ok(SceneScore {
            detections: vec![Detection { confidence: 0.3, bbox, is_camouflaged: false }],
            ground_truth: vec![GroundTruth { vehicle_id: 1, bbox, is_camouflaged: false }],
        })
    }
}

fn standardization_and_shaping() -> Check {
    let z = standardize(&[0.2, 0.4, 0.6]).map_err(fail)?;
    let z_ok = z.iter().zip([-1.0, 0.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12);
    let bce = bce_zero(0.5).map_err(fail)?;
    let bce_ok = (bce - std::f64::consts::LN_2).abs() <= 1e-12;

    let t = build_transformation_grid(0)[0];
    let cfg = OptimizerConfig::new(Mode::Attack, vec![t]);
    let opt = Optimizer::new(cfg, Constant).map_err(fail)?;
    let start = opt.init(CamouflagePattern::new_random(4, 4, 3).map_err(fail)?).map_err(fail)?;
    let next = opt.step(&start).map_err(fail)?;
    let null_step = next.current == start.current;
    ensure(
        z_ok && bce_ok && null_step,
        format!("standardize {z:?}, bce(0.5) - ln2 = {:.1e}, null step {null_step}", bce - std::f64::consts::LN_2),
    )
}

// ------------------------------------------------------------- sampler bounds

fn sampler_bounds() -> Check {
    const SIGMA: f64 = 10.0;
    let means = [0.0, 5.0, 128.0, 250.0, 255.0];
    let per_mean = 1_000_000 / means.len() / 3 + 1;
    let mut total = 0usize;
    let mut out_of_range = 0usize;
    let mut interior = Vec::new();
    for (i, &m) in means.iter().enumerate() {
        let pattern = CamouflagePattern::solid(1, 1, [m; 3]).map_err(fail)?;
        let dist = SearchDistribution::new(pattern, SIGMA, 2).map_err(fail)?;
        for k in 0..per_mean as u64 {
            for &v in dist.sample(i as u64, k).channels() {
                total += 1;
                out_of_range += usize::from(!(0.0..=255.0).contains(&v));
                if m == 128.0 {
                    interior.push(v);
                }
            }
        }
    }
    let n = interior.len() as f64;
    let mean = interior.iter().sum::<f64>() / n;
    let sd = (interior.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mean_z = (mean - 128.0) / (SIGMA / n.sqrt());
    let sd_z = (sd - SIGMA) / (SIGMA / (2.0 * n).sqrt());
    ensure(
        out_of_range == 0 && total >= 1_000_000 && mean_z.abs() < 3.0 && sd_z.abs() < 3.0,
        format!("{total} draws, {out_of_range} out of range; mean 128: {mean:.4} ({mean_z:+.2} SE), sd {sd:.4} ({sd_z:+.2} SE)"),
    )
}

// ---------------------------------------------------------------- determinism

const ARTIFACTS: [&str; 6] = [PATTERN_FILE, "pattern.json", CURVE_FILE, REPORT_CSV, REPORT_JSON, MANIFEST_FILE];

fn snapshot(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    ARTIFACTS.iter().map(|f| fs::read(dir.join(f)).map_err(fail)).collect()
}

fn run_in_pool(threads: usize, cfg: &RunConfig) -> Result<(), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(fail)?;
    pool.install(|| cli::cmd_attack(cfg)).map(drop).map_err(fail)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(fail)?;
    let out: PathBuf = dir.path().join("run");
    let first = Overrides {
        seed: Some(21),
        scene_seed: Some(21),
        width: Some(8),
        height: Some(8),
        locations: Some(2),
        orientations: Some(2),
        iters: Some(25),
        out: Some(out.clone()),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(Command::Attack, first).map_err(fail)?;
    run_in_pool(4, &cfg)?;
    let a = snapshot(&out)?;
    let replay = cli::load_config_file(&out.join(MANIFEST_FILE)).map_err(fail)?;
    let cfg2 = RunConfig::resolve(Command::Attack, replay).map_err(fail)?;
    run_in_pool(3, &cfg2)?;
    let b = snapshot(&out)?;
    let differing: Vec<&str> = ARTIFACTS.iter().zip(a.iter().zip(&b)).filter(|(_, (x, y))| x != y).map(|(n, _)| *n).collect();
    ensure(
        differing.is_empty() && cfg == cfg2,
        format!("{} artifacts compared across 4- and 3-thread pools; differing: {differing:?}", ARTIFACTS.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("convergence", convergence),
        ("relative ordering", relative_ordering),
        ("enhance mode", enhance_mode),
        ("gradient descent property", gradient_descent_property),
        ("metric oracles", metric_oracles),
        ("standardization and shaping", standardization_and_shaping),
        ("sampler bounds", sampler_bounds),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
