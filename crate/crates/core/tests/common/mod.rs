//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the crate's posterior code: weights are rebuilt from
//! the model definition with plain products and sums.
#![allow(dead_code)]

use ebmeans::{DataVector, ModelConfig, SizePrior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Binomial coefficient by repeated multiplication.
pub fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Unnormalized size prior `f_n(s)` for `s = 0..=n`, built from the
/// successive ratios `f(s)/f(s-1)`.
pub fn size_prior_weights(prior: &SizePrior, n: usize) -> Vec<f64> {
    let mut f = vec![1.0];
    for s in 1..=n {
        let ratio = match *prior {
            SizePrior::Complexity { a, c } => 1.0 / (c * (n as f64).powf(a)),
            SizePrior::BetaBinomial { xi } => {
                let b = (n as f64).powf(xi);
                (n - s + 1) as f64 / (n as f64 + b - s as f64)
            }
        };
        f.push(f[s - 1] * ratio);
    }
    f
}

/// Normalized posterior over all `2^n` masks (bit `k-1` for index `k`), in
/// mask order.
pub fn brute_force_posterior(cfg: &ModelConfig, prior: &SizePrior, y: &[f64]) -> Vec<f64> {
    let n = cfg.n;
    let f = size_prior_weights(prior, n);
    let log_w: Vec<f64> = (0u64..1 << n)
        .map(|mask| {
            let s = mask.count_ones() as usize;
            let rss: f64 = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| y[i] * y[i]).sum();
            (f[s] / choose(n, s)).ln() - s as f64 / 2.0 * (1.0 + cfg.alpha / cfg.tau).ln()
                - cfg.alpha / (2.0 * cfg.sigma2) * rss
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

pub fn mask_of(indices: &[usize]) -> u64 {
    indices.iter().fold(0, |m, &k| m | 1 << (k - 1))
}

pub fn brute_force_inclusion(post: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            post.iter()
                .enumerate()
                .filter(|(m, _)| m >> i & 1 == 1)
                .map(|(_, p)| p)
                .sum()
        })
        .collect()
}

pub fn default_cfg(n: usize) -> ModelConfig {
    ModelConfig::new(n, 1.0, 0.95, 0.025).unwrap()
}

/// A random sparse truth for `n` coordinates and data drawn around it:
/// each mean is zero with probability 0.5, otherwise `±U(1, 7)`.
pub fn random_case(n: usize, seed: u64) -> (Vec<f64>, DataVector) {
    let mut rng = ChaCha20Rng::seed_from_u64(0xACCE_0000 + seed);
    let theta: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.5 {
                0.0
            } else {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * rng.random_range(1.0..7.0)
            }
        })
        .collect();
    let y: Vec<f64> = theta
        .iter()
        .map(|t| t + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (theta, DataVector::new(y).unwrap())
}

/// Standard normal CDF via the error function complement series-free route:
/// numerical integration of the density, accurate to ~1e-13 on |x| < 12.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x < 0.0 {
        simpson(phi, -14.0, x, 20_000)
    } else {
        0.5 + simpson(phi, 0.0, x, 20_000)
    }
}
