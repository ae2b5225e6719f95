//! Model parameters, configuration-size priors and the marginal posterior
//! over configurations.
//!
//! With the data-centred conjugate slab `theta_S | S ~ N(Y_S, sigma2 / tau)`
//! and the likelihood raised to the power `alpha`, integrating out `theta_S`
//! leaves
//!
//! ```text
//! log pi^n(S) = log pi(S) - |S|/2 * log(1 + alpha/tau) - alpha/(2 sigma2) * ||Y_{S^c}||^2 + const
//! ```
//!
//! where `pi(S) = f_n(|S|) / C(n, |S|)`. Everything here works in log space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_choose, ln_gamma};

/// Problem dimension, noise variance, fractional power and slab precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub sigma2: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl ModelConfig {
    pub const DEFAULT_ALPHA: f64 = 0.95;
    pub const DEFAULT_TAU: f64 = 0.025;

    pub fn new(n: usize, sigma2: f64, alpha: f64, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(Self {
            n,
            sigma2,
            alpha,
            tau,
        })
    }

    /// `alpha + tau <= 1`, i.e. the slab variance is at least the noise variance.
    pub fn is_coverage_safe(&self) -> bool {
        self.alpha + self.tau <= 1.0
    }

    /// Conditional posterior variance of each included mean, `sigma2 / (alpha + tau)`.
    pub fn posterior_variance(&self) -> f64 {
        self.sigma2 / (self.alpha + self.tau)
    }

    /// `1/2 * log(1 + alpha/tau)`, the per-coordinate cost of inclusion.
    pub fn log_slab_penalty(&self) -> f64 {
        0.5 * (self.alpha / self.tau).ln_1p()
    }

    /// `alpha / (2 sigma2)`, the weight on the excluded residual sum of squares.
    pub fn residual_weight(&self) -> f64 {
        self.alpha / (2.0 * self.sigma2)
    }
}

pub fn posterior_variance(cfg: &ModelConfig) -> f64 {
    cfg.posterior_variance()
}

/// A set of coordinates declared non-zero, stored as strictly increasing
/// 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Configuration {
    indices: Vec<usize>,
}

impl Configuration {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "configuration indices must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
        Ok(Self { indices })
    }

    /// Sorts and deduplicates before validating the range.
    pub fn from_unsorted(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, n)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (1..=n).collect(),
        }
    }

    /// Bit `k - 1` of `mask` marks index `k`.
    pub(crate) fn from_mask(mask: u64, n: usize) -> Self {
        Self {
            indices: (1..=n).filter(|k| mask >> (k - 1) & 1 == 1).collect(),
        }
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.indices.iter().all(|&k| other.contains(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

/// Semicolon-separated 1-based indices; the empty set prints as nothing.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.indices.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    /// Parses the `Display` form. Range checks need `n`, so only ordering is
    /// validated here.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let indices = s
            .split(';')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad index {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices, usize::MAX)
    }
}

/// Prior on the configuration size `|S|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SizePrior {
    /// `f_n(s) ∝ (c n^a)^{-s}`, a truncated geometric law.
    Complexity { a: f64, c: f64 },
    /// `W ~ Beta(b_n, 1)`, `|S| | W ~ Bin(n, 1 - W)` with `b_n = n^xi`.
    BetaBinomial { xi: f64 },
}

impl SizePrior {
    pub const DEFAULT_XI: f64 = 1.01;

    pub fn complexity(a: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "complexity prior needs a > 0 and c > 0, got a = {a}, c = {c}"
            )));
        }
        Ok(SizePrior::Complexity { a, c })
    }

    pub fn beta_binomial(xi: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta-binomial prior needs xi > 1, got {xi}"
            )));
        }
        Ok(SizePrior::BetaBinomial { xi })
    }

    /// Checks the invariants that depend on the dimension.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        match *self {
            SizePrior::Complexity { a, c } => {
                Self::complexity(a, c)?;
                if c * (n as f64).powf(a) <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "complexity prior needs c * n^a > 1, got {} for n = {n}",
                        c * (n as f64).powf(a)
                    )));
                }
                Ok(())
            }
            SizePrior::BetaBinomial { xi } => Self::beta_binomial(xi).map(|_| ()),
        }
    }

    /// `b_n = n^xi` for the beta-binomial prior.
    pub fn b_n(&self, n: usize) -> Option<f64> {
        match *self {
            SizePrior::BetaBinomial { xi } => Some((n as f64).powf(xi)),
            SizePrior::Complexity { .. } => None,
        }
    }
}

/// `log f_n(s)`. The complexity prior uses the convention `log f_n(0) = 0`;
/// the beta-binomial prior is exactly normalized.
pub fn log_size_prior(prior: &SizePrior, s: usize, n: usize) -> Result<f64> {
    if s > n {
        return Err(Error::Domain(format!("size {s} exceeds dimension {n}")));
    }
    Ok(match *prior {
        SizePrior::Complexity { a, c } => -(s as f64) * (c.ln() + a * (n as f64).ln()),
        SizePrior::BetaBinomial { xi } => {
            let b = (n as f64).powf(xi);
            let nf = n as f64;
            let sf = s as f64;
            b.ln() + ln_choose(n, s) + ln_gamma(nf + b - sf) + ln_gamma(sf + 1.0)
                - ln_gamma(nf + b + 1.0)
        }
    })
}

/// `log f_n(|S|) - log C(n, |S|)`: size prior spread uniformly over subsets.
pub fn log_config_prior(prior: &SizePrior, config: &Configuration, n: usize) -> Result<f64> {
    Ok(log_size_prior(prior, config.len(), n)? - ln_choose(n, config.len()))
}

/// Observation vector `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    y: Vec<f64>,
}

impl DataVector {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidParameter("data vector is empty".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "data entry {} is not finite",
                i + 1
            )));
        }
        Ok(Self { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// 1-based access.
    pub fn get(&self, k: usize) -> f64 {
        self.y[k - 1]
    }

    pub fn check_dimension(&self, n: usize) -> Result<()> {
        if self.y.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.y.len(),
            });
        }
        Ok(())
    }

    /// Whitespace-separated decimal reals.
    pub fn parse(text: &str) -> Result<Self> {
        let y = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad data value {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(y)
    }
}

/// Model, prior and data bundled with per-size prior terms cached, so that
/// configuration weights cost `O(n)` and single-coordinate moves `O(1)`.
#[derive(Debug, Clone)]
pub struct ConfigPosterior<'a> {
    cfg: ModelConfig,
    prior: SizePrior,
    y: &'a DataVector,
    /// `log pi(S) - |S| * slab_penalty`, indexed by `|S|`.
    size_terms: Vec<f64>,
    residual_weight: f64,
}

impl<'a> ConfigPosterior<'a> {
    pub fn new(cfg: &ModelConfig, prior: &SizePrior, y: &'a DataVector) -> Result<Self> {
        y.check_dimension(cfg.n)?;
        prior.validate_for(cfg.n)?;
        let n = cfg.n;
        let penalty = cfg.log_slab_penalty();
        let size_terms = (0..=n)
            .map(|s| Ok(log_size_prior(prior, s, n)? - ln_choose(n, s) - s as f64 * penalty))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: *cfg,
            prior: *prior,
            y,
            size_terms,
            residual_weight: cfg.residual_weight(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn prior(&self) -> &SizePrior {
        &self.prior
    }

    pub fn data(&self) -> &DataVector {
        self.y
    }

    pub fn size_term(&self, s: usize) -> f64 {
        self.size_terms[s]
    }

    pub fn log_weight(&self, config: &Configuration) -> f64 {
        let mut members = config.iter().peekable();
        let mut rss = 0.0;
        for (i, &v) in self.y.values().iter().enumerate() {
            if members.peek() == Some(&(i + 1)) {
                members.next();
            } else {
                rss += v * v;
            }
        }
        self.size_terms[config.len()] - self.residual_weight * rss
    }

    pub(crate) fn log_weight_mask(&self, mask: u64) -> f64 {
        let rss: f64 = self
            .y
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 0)
            .map(|(_, v)| v * v)
            .sum();
        self.size_terms[mask.count_ones() as usize] - self.residual_weight * rss
    }

    /// Change in log weight from adding index `k` to a configuration of size `s`.
    pub fn log_ratio_add(&self, s: usize, k: usize) -> f64 {
        let yk = self.y.get(k);
        self.size_terms[s + 1] - self.size_terms[s] + self.residual_weight * yk * yk
    }

    /// Change in log weight from swapping member `out` for non-member `inn`.
    pub fn log_ratio_swap(&self, out: usize, inn: usize) -> f64 {
        let (yo, yi) = (self.y.get(out), self.y.get(inn));
        self.residual_weight * (yi * yi - yo * yo)
    }
}

/// Unnormalized log posterior of a configuration; the additive constant is
/// shared across all configurations for fixed data.
pub fn log_unnorm_posterior(
    cfg: &ModelConfig,
    prior: &SizePrior,
    y: &DataVector,
    config: &Configuration,
) -> Result<f64> {
    if let Some(&k) = config.indices().last() {
        if k > cfg.n {
            return Err(Error::IndexOutOfRange { index: k, n: cfg.n });
        }
    }
    Ok(ConfigPosterior::new(cfg, prior, y)?.log_weight(config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_cfg(n: usize) -> ModelConfig {
        ModelConfig::new(n, 1.0, 0.95, 0.025).unwrap()
    }

    #[test]
    fn model_config_validation() {
        assert!(ModelConfig::new(0, 1.0, 0.5, 0.1).is_err());
        assert!(ModelConfig::new(3, 0.0, 0.5, 0.1).is_err());
        assert!(ModelConfig::new(3, 1.0, 1.0, 0.1).is_err());
        assert!(ModelConfig::new(3, 1.0, 0.0, 0.1).is_err());
        assert!(ModelConfig::new(3, 1.0, 0.5, 0.0).is_err());
        assert!(default_cfg(3).is_coverage_safe());
        // allowed, but flagged
        let unsafe_cfg = ModelConfig::new(3, 1.0, 0.95, 0.1).unwrap();
        assert!(!unsafe_cfg.is_coverage_safe());
    }

    #[test]
    fn posterior_variance_examples() {
        assert!((default_cfg(1).posterior_variance() - 1.0 / 0.975).abs() < 1e-15);
        assert!((default_cfg(1).posterior_variance() - 1.025641025641025641).abs() < 1e-15);
        let boundary = ModelConfig::new(1, 1.0, 0.75, 0.25).unwrap();
        assert_eq!(boundary.posterior_variance(), 1.0);
        let scaled = ModelConfig::new(1, 4.0, 0.5, 0.5).unwrap();
        assert_eq!(posterior_variance(&scaled), 4.0);
    }

    #[test]
    fn configuration_invariants() {
        assert!(Configuration::new(vec![1, 3, 5], 5).is_ok());
        assert!(Configuration::new(vec![3, 1], 5).is_err());
        assert!(Configuration::new(vec![1, 1], 5).is_err());
        assert!(matches!(
            Configuration::new(vec![0], 5),
            Err(Error::IndexOutOfRange { index: 0, .. })
        ));
        assert!(Configuration::new(vec![6], 5).is_err());
        let s = Configuration::from_unsorted(vec![4, 2, 2], 5).unwrap();
        assert_eq!(s.indices(), &[2, 4]);
        assert_eq!(s.to_string(), "2;4");
        assert_eq!("2;4".parse::<Configuration>().unwrap(), s);
        assert_eq!("".parse::<Configuration>().unwrap(), Configuration::empty());
        assert_eq!(Configuration::from_mask(0b1010, 4).indices(), &[2, 4]);
    }

    #[test]
    fn complexity_log_ratio() {
        let p = SizePrior::complexity(1.0, 1.0).unwrap();
        let r = log_size_prior(&p, 1, 100).unwrap() - log_size_prior(&p, 0, 100).unwrap();
        assert!((r + 100f64.ln()).abs() < 1e-12);
        assert!((r + 4.60517).abs() < 1e-5);
        for n in [1, 7, 100] {
            assert_eq!(log_size_prior(&p, 0, n).unwrap(), 0.0);
        }
        assert!(matches!(log_size_prior(&p, 4, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn prior_constructors_reject_bad_parameters() {
        assert!(SizePrior::beta_binomial(0.5).is_err());
        assert!(SizePrior::beta_binomial(1.0).is_err());
        assert!(SizePrior::complexity(-1.0, 1.0).is_err());
        assert!(SizePrior::complexity(1.0, 0.0).is_err());
        // c n^a = 1 is not a valid geometric success probability
        let p = SizePrior::complexity(1.0, 0.5).unwrap();
        assert!(p.validate_for(2).is_err());
        assert!(p.validate_for(3).is_ok());
    }

    #[test]
    fn beta_binomial_is_normalized() {
        let p = SizePrior::beta_binomial(1.01).unwrap();
        for n in [1, 5, 40] {
            let total: f64 = (0..=n).map(|s| log_size_prior(&p, s, n).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "n = {n}: {total}");
        }
    }

    #[test]
    fn beta_binomial_ratio_closed_form() {
        // f(s)/f(s-1) collapses to (n - s + 1)/(n + b_n - s).
        let p = SizePrior::beta_binomial(1.3).unwrap();
        let n = 25;
        let b = p.b_n(n).unwrap();
        for s in 1..=n {
            let r = (log_size_prior(&p, s, n).unwrap() - log_size_prior(&p, s - 1, n).unwrap()).exp();
            let expected = (n - s + 1) as f64 / (n as f64 + b - s as f64);
            assert!((r - expected).abs() < 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn beta_binomial_ratio_decreases_in_n() {
        // (n - s + 1)/(n + n^xi - s) falls with n only while s/n dominates the
        // n^(xi - 1) growth; with xi = 1.01 that is s <= 2 on this grid.
        let p = SizePrior::beta_binomial(1.01).unwrap();
        for s in [1, 2] {
            let ratios: Vec<f64> = [10, 50, 200]
                .iter()
                .map(|&n| {
                    (log_size_prior(&p, s, n).unwrap() - log_size_prior(&p, s - 1, n).unwrap())
                        .exp()
                })
                .collect();
            assert!(ratios.iter().all(|&r| r > 0.0));
            assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
        }
    }

    #[test]
    fn config_prior_examples() {
        let p = SizePrior::complexity(1.0, 1.0).unwrap();
        let one = Configuration::new(vec![1], 2).unwrap();
        let two = Configuration::new(vec![2], 2).unwrap();
        let v1 = log_config_prior(&p, &one, 2).unwrap();
        assert!((v1 + 4f64.ln()).abs() < 1e-14);
        assert_eq!(v1, log_config_prior(&p, &two, 2).unwrap());
        let bb = SizePrior::beta_binomial(1.5).unwrap();
        assert_eq!(
            log_config_prior(&bb, &Configuration::empty(), 9).unwrap(),
            log_size_prior(&bb, 0, 9).unwrap()
        );
    }

    #[test]
    fn unnormalized_posterior_examples() {
        let cfg = default_cfg(2);
        let p = SizePrior::complexity(1.0, 1.0).unwrap();
        let y = DataVector::new(vec![3.0, 0.0]).unwrap();
        let empty = log_unnorm_posterior(&cfg, &p, &y, &Configuration::empty()).unwrap();
        assert!((empty + 4.275).abs() < 1e-12);
        let one = log_unnorm_posterior(&cfg, &p, &y, &Configuration::new(vec![1], 2).unwrap())
            .unwrap();
        assert!((one - (0.25f64.ln() - 0.5 * 39f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn incremental_ratios_match_full_weights() {
        let cfg = default_cfg(5);
        let p = SizePrior::beta_binomial(1.01).unwrap();
        let y = DataVector::new(vec![0.3, -2.0, 4.1, 0.0, 1.7]).unwrap();
        let post = ConfigPosterior::new(&cfg, &p, &y).unwrap();
        let s = Configuration::new(vec![2, 3], 5).unwrap();
        let s_add = Configuration::new(vec![2, 3, 5], 5).unwrap();
        let s_swap = Configuration::new(vec![1, 3], 5).unwrap();
        let base = post.log_weight(&s);
        assert!((post.log_weight(&s_add) - base - post.log_ratio_add(2, 5)).abs() < 1e-12);
        assert!((post.log_weight(&s_swap) - base - post.log_ratio_swap(2, 1)).abs() < 1e-12);
        assert!((post.log_weight_mask(0b00110) - base).abs() < 1e-12);
    }

    #[test]
    fn data_vector_parsing() {
        let y = DataVector::parse("3.0 0.0\n -1e-3\t2").unwrap();
        assert_eq!(y.values(), &[3.0, 0.0, -0.001, 2.0]);
        assert!(DataVector::parse("1.0 abc").is_err());
        assert!(DataVector::parse("   ").is_err());
        assert!(DataVector::new(vec![f64::NAN]).is_err());
        assert!(y.check_dimension(3).is_err());
    }
}
