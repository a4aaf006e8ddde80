// Average many search-gradient estimates on a smooth toy scorer and compare
// their direction with a finite-difference gradient.

use cca::distribution::derive_seed;
use cca::prelude::*;

fn score(c: &[f64]) -> f64 {
    let q: f64 = c.iter().enumerate().map(|(j, v)| (j as f64 - 2.5) * (v - 128.0) / 255.0).sum();
    1.0 / (1.0 + (-q).exp())
}

pub fn run_example() -> anyhow::Result<()> {
    let mean = CamouflagePattern::solid(2, 1, [128.0; 3])?;
    let dist = SearchDistribution::new(mean.clone(), 10.0, 20)?;
    let n = 500;
    let mut avg = vec![0.0; mean.len()];
    for i in 0..n {
        let candidates = dist.sample_population(derive_seed(&[42, i]));
        let row: Vec<f64> = candidates.iter().map(|z| score(z.channels())).collect();
        let g = estimate_gradient(&dist, &EvaluationGrid::from_rows(&[row])?, &candidates)?;
        avg.iter_mut().zip(g).for_each(|(a, g)| *a += g / n as f64);
    }

    let c = mean.channels();
    let fd: Vec<f64> = (0..c.len())
        .map(|j| {
            let (mut up, mut down) = (c.to_vec(), c.to_vec());
            up[j] += 0.1;
            down[j] -= 0.1;
            (score(&up) - score(&down)) / 0.2
        })
        .collect();
    let dot: f64 = avg.iter().zip(&fd).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&avg) * norm(&fd));
    println!("estimate    {:?}", avg.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>());
    println!("finite diff {:?}", fd.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>());
    println!("cosine {cosine:.4}");
    anyhow::ensure!(cosine > 0.9, "estimate points away from the gradient");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
