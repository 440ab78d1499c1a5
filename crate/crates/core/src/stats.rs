//! Small statistics helpers used by aggregation and the verification suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (ddof = 1); zero for fewer than two points.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Fraction of bootstrap resamples in which `mean(a) > mean(b)`.
/// Deterministic for a fixed seed.
pub fn bootstrap_mean_greater(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wins = 0usize;
    for _ in 0..resamples {
        let ma = resample_mean(a, &mut rng);
        let mb = resample_mean(b, &mut rng);
        if ma > mb {
            wins += 1;
        }
    }
    wins as f64 / resamples as f64
}

fn resample_mean(xs: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = xs.len();
    let mut sum = 0.0;
    for _ in 0..n {
        sum += xs[rng.gen_range(0..n)];
    }
    sum / n as f64
}

/// Spearman rank correlation. Assumes distinct values within each slice
/// (the sweeps this crate runs never produce ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "need at least two points");
    let rx = ranks(x);
    let ry = ranks(y);
    let d2: f64 = rx
        .iter()
        .zip(ry.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    1.0 - 6.0 * d2 / (n as f64 * (n as f64 * n as f64 - 1.0))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = rank as f64 + 1.0;
    }
    out
}
