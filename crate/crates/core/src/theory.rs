//! Signal-strength thresholds and diagnostic bounds from the asymptotic
//! theory, as computable checks.

use crate::error::{Error, Result};
use crate::model::{log_size_prior, Configuration, ModelConfig, SizePrior};

/// True support and the subset of means strong enough for selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPartition {
    pub s_star: usize,
    pub s_dagger: usize,
    pub strong_indices: Configuration,
    pub true_support: Configuration,
}

/// Empirical range of `f_n(s) / f_n(s-1)` with the exponents it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBoundReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `-log(min_ratio) / log(n)`
    pub implied_a1: f64,
    /// `-log(max_ratio) / log(n)`
    pub implied_a2: f64,
}

impl RatioBoundReport {
    /// Whether every scanned ratio lies strictly inside (0, 1).
    pub fn ratios_in_unit_interval(&self) -> bool {
        self.min_ratio > 0.0 && self.max_ratio < 1.0
    }
}

pub(crate) fn rho_squared(sigma2: f64, alpha: f64, m: f64, log_n: f64) -> f64 {
    2.0 * sigma2 * (1.0 + alpha) * m * log_n / alpha
}

/// Default `M` for the selection threshold: the explicit `1 + a1` branch.
pub fn default_m(a1: f64) -> f64 {
    1.0 + a1
}

/// Selection threshold `rho_n = sqrt(2 sigma2 (1 + alpha) M log n / alpha)`.
pub fn rho_threshold(cfg: &ModelConfig, m: f64) -> Result<f64> {
    if cfg.n < 2 {
        return Err(Error::Domain(format!(
            "rho threshold needs n >= 2, got {}",
            cfg.n
        )));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("M must be positive, got {m}")));
    }
    Ok(rho_squared(cfg.sigma2, cfg.alpha, m, (cfg.n as f64).ln()).sqrt())
}

/// Weaker single-coordinate threshold `zeta_n`.
pub fn zeta_threshold(cfg: &ModelConfig, a1: f64, s_star: usize, s_dagger: usize) -> Result<f64> {
    let n = cfg.n;
    if !(s_dagger < s_star && s_star <= n) {
        return Err(Error::InvalidParameter(format!(
            "zeta threshold needs s_dagger < s_star <= n, got s_dagger = {s_dagger}, s_star = {s_star}, n = {n}"
        )));
    }
    let bracket = a1 * (n as f64).ln()
        + ((n - s_dagger) as f64 / (s_dagger + 1) as f64).ln()
        + (s_star - s_dagger - 1) as f64 * std::f64::consts::LN_2;
    let sq = 2.0 * cfg.sigma2 * (1.0 + cfg.alpha) / cfg.alpha * bracket;
    if sq < 0.0 {
        return Err(Error::Domain(format!(
            "zeta threshold has negative square {sq}"
        )));
    }
    Ok(sq.sqrt())
}

/// `S* = {i : theta_i != 0}` and `S† = {i : |theta_i| > rho}`.
pub fn strong_signal_partition(theta_star: &[f64], rho: f64) -> Result<SignalPartition> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must be non-negative, got {rho}"
        )));
    }
    let support: Vec<usize> = (1..=theta_star.len())
        .filter(|&i| theta_star[i - 1] != 0.0)
        .collect();
    let strong: Vec<usize> = support
        .iter()
        .copied()
        .filter(|&i| theta_star[i - 1].abs() > rho)
        .collect();
    Ok(SignalPartition {
        s_star: support.len(),
        s_dagger: strong.len(),
        strong_indices: Configuration::from_sorted_unchecked(strong),
        true_support: Configuration::from_sorted_unchecked(support),
    })
}

pub fn size_prior_ratio_report(prior: &SizePrior, n: usize, s_max: usize) -> Result<RatioBoundReport> {
    if !(1 <= s_max && s_max <= n) {
        return Err(Error::InvalidParameter(format!(
            "s_max must lie in 1..={n}, got {s_max}"
        )));
    }
    prior.validate_for(n)?;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut prev = log_size_prior(prior, 0, n)?;
    for s in 1..=s_max {
        let cur = log_size_prior(prior, s, n)?;
        let ratio = (cur - prev).exp();
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        prev = cur;
    }
    let log_n = (n as f64).ln();
    Ok(RatioBoundReport {
        min_ratio,
        max_ratio,
        implied_a1: -min_ratio.ln() / log_n,
        implied_a2: -max_ratio.ln() / log_n,
    })
}

/// Total-variation bound `2 (1 - pi^n(S*))` between the posterior and its
/// normal-times-point-mass approximation on the true configuration.
pub fn tv_upper_bound(pi_star: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi_star) {
        return Err(Error::InvalidParameter(format!(
            "pi_star must lie in [0, 1], got {pi_star}"
        )));
    }
    Ok(2.0 * (1.0 - pi_star))
}
