//! Exhaustive enumeration of the configuration posterior for small `n`.
//!
//! This is the ground truth that every sampler and every interval routine is
//! checked against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{fmt_sig6, log_sum_exp};
use crate::mixture::{MixtureBuilder, MixtureCdf};
use crate::model::{ConfigPosterior, Configuration, DataVector, ModelConfig, SizePrior};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;
/// Subsets are stored as `u64` bit masks.
const MAX_ENUMERABLE: usize = 63;

/// Every configuration with its log posterior weight, ordered by size and then
/// lexicographically by index list.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    cfg: ModelConfig,
    masks: Vec<u64>,
    log_weights: Vec<f64>,
    normalized: bool,
}

/// Coefficients of `psi = x^T theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    x: Vec<f64>,
}

impl LinearFunctional {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "functional coefficients must be finite".into(),
            ));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter(
                "functional coefficients must not all be zero".into(),
            ));
        }
        Ok(Self { x })
    }

    /// The coordinate functional `e_k` (1-based).
    pub fn unit(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let mut x = vec![0.0; n];
        x[k - 1] = 1.0;
        Ok(Self { x })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `(x_S^T Y_S, ||x_S||^2)` for one configuration.
    pub fn restricted(&self, y: &DataVector, config: &Configuration) -> (f64, f64) {
        config.iter().fold((0.0, 0.0), |(m, q), k| {
            let xk = self.x[k - 1];
            (m + xk * y.get(k), q + xk * xk)
        })
    }

    fn restricted_mask(&self, y: &[f64], mask: u64) -> (f64, f64) {
        let mut m = 0.0;
        let mut q = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            m += self.x[i] * y[i];
            q += self.x[i] * self.x[i];
            bits &= bits - 1;
        }
        (m, q)
    }
}

/// All size-`s` subsets of `{0..n}` as masks, in lexicographic order of their
/// sorted index lists.
fn combinations_lex(n: usize, s: usize, out: &mut Vec<u64>) {
    if s == 0 {
        out.push(0);
        return;
    }
    let mut c: Vec<usize> = (0..s).collect();
    loop {
        out.push(c.iter().fold(0u64, |m, &i| m | 1 << i));
        let Some(i) = (0..s).rev().find(|&i| c[i] < n - s + i) else {
            return;
        };
        c[i] += 1;
        for j in i + 1..s {
            c[j] = c[j - 1] + 1;
        }
    }
}

pub fn enumerate_posterior(cfg: &ModelConfig, prior: &SizePrior, y: &DataVector) -> Result<PosteriorTable> {
    enumerate_posterior_with_cap(cfg, prior, y, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_posterior_with_cap(
    cfg: &ModelConfig,
    prior: &SizePrior,
    y: &DataVector,
    cap: usize,
) -> Result<PosteriorTable> {
    let n = cfg.n;
    let cap = cap.min(MAX_ENUMERABLE);
    if n > cap {
        return Err(Error::Capacity { n, cap });
    }
    let post = ConfigPosterior::new(cfg, prior, y)?;
    let mut masks = Vec::with_capacity(1usize << n);
    for s in 0..=n {
        combinations_lex(n, s, &mut masks);
    }
    let log_weights: Vec<f64> = masks.par_iter().map(|&m| post.log_weight_mask(m)).collect();
    let mut table = PosteriorTable {
        cfg: *cfg,
        masks,
        log_weights,
        normalized: false,
    };
    table.normalize();
    Ok(table)
}

impl PosteriorTable {
    pub fn n(&self) -> usize {
        self.cfg.n
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration::from_mask(self.masks[i], self.cfg.n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Configuration, f64)> + '_ {
        self.masks
            .iter()
            .zip(&self.log_weights)
            .map(|(&m, &w)| (Configuration::from_mask(m, self.cfg.n), w))
    }

    /// Normalized probabilities in table order.
    pub fn probabilities(&self) -> Vec<f64> {
        let shift = if self.normalized {
            0.0
        } else {
            log_sum_exp(&self.log_weights)
        };
        self.log_weights.iter().map(|w| (w - shift).exp()).collect()
    }

    pub fn probability_of(&self, config: &Configuration) -> Option<f64> {
        let mask = config
            .iter()
            .try_fold(0u64, |m, k| (k <= self.cfg.n).then(|| m | 1 << (k - 1)))?;
        let i = self.masks.iter().position(|&m| m == mask)?;
        Some(self.probabilities()[i])
    }

    /// A copy with every log weight moved by `delta`, marked unnormalized.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            cfg: self.cfg,
            masks: self.masks.clone(),
            log_weights: self.log_weights.iter().map(|w| w + delta).collect(),
            normalized: false,
        }
    }

    /// Subtracts the log-sum-exp so that the weights sum to one.
    pub fn normalize(&mut self) {
        let lse = log_sum_exp(&self.log_weights);
        for w in &mut self.log_weights {
            *w -= lse;
        }
        self.normalized = true;
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::InvalidParameter("posterior table is not normalized".into()))
        }
    }

    /// Plain-text serialization: header then `size,indices,log_weight` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::from("size,indices,log_weight\n");
        for (c, w) in self.iter() {
            out.push_str(&format!("{},{},{}\n", c.len(), c, fmt_sig6(w)));
        }
        out
    }
}

/// `p_k = sum over S containing k of pi^n(S)`.
pub fn inclusion_probability(table: &PosteriorTable, k: usize) -> Result<f64> {
    table.require_normalized()?;
    let n = table.n();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    let bit = 1u64 << (k - 1);
    let matching: Vec<f64> = table
        .masks
        .iter()
        .zip(&table.log_weights)
        .filter(|(&m, _)| m & bit != 0)
        .map(|(_, &w)| w)
        .collect();
    Ok(log_sum_exp(&matching).exp().min(1.0))
}

pub fn inclusion_probabilities(table: &PosteriorTable) -> Result<Vec<f64>> {
    (1..=table.n()).map(|k| inclusion_probability(table, k)).collect()
}

/// Marginal posterior of `x^T theta` as a point mass plus normal mixture.
/// Configurations with `||x_S|| = 0` contribute a unit step at zero.
pub fn functional_mixture(
    table: &PosteriorTable,
    cfg: &ModelConfig,
    y: &DataVector,
    x: &LinearFunctional,
) -> Result<MixtureCdf> {
    table.require_normalized()?;
    y.check_dimension(table.n())?;
    if x.len() != table.n() {
        return Err(Error::Dimension {
            expected: table.n(),
            got: x.len(),
        });
    }
    let v = cfg.posterior_variance();
    let mut builder = MixtureBuilder::new();
    for (&mask, &lw) in table.masks.iter().zip(&table.log_weights) {
        let (mean, norm2) = x.restricted_mask(y.values(), mask);
        builder.add(lw.exp(), mean, (v * norm2).sqrt());
    }
    Ok(builder.build())
}

pub fn functional_cdf(
    table: &PosteriorTable,
    cfg: &ModelConfig,
    y: &DataVector,
    x: &LinearFunctional,
    t: f64,
) -> Result<f64> {
    Ok(functional_mixture(table, cfg, y, x)?.cdf(t))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1/2), got {gamma}"
        )))
    }
}

/// `t_gamma = inf{t : H_n(t) >= 1 - gamma}`.
pub fn upper_credible_bound(
    table: &PosteriorTable,
    cfg: &ModelConfig,
    y: &DataVector,
    x: &LinearFunctional,
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(functional_mixture(table, cfg, y, x)?.quantile(1.0 - gamma))
}

/// `(inf{t : H_n(t) >= gamma/2}, inf{t : H_n(t) >= 1 - gamma/2})`.
pub fn equal_tailed_interval(
    table: &PosteriorTable,
    cfg: &ModelConfig,
    y: &DataVector,
    x: &LinearFunctional,
    gamma: f64,
) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    let h = functional_mixture(table, cfg, y, x)?;
    Ok((h.quantile(gamma / 2.0), h.quantile(1.0 - gamma / 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> (ModelConfig, SizePrior, DataVector) {
        (
            ModelConfig::new(2, 1.0, 0.95, 0.025).unwrap(),
            SizePrior::complexity(1.0, 1.0).unwrap(),
            DataVector::new(vec![3.0, 0.0]).unwrap(),
        )
    }

    #[test]
    fn lexicographic_order() {
        let mut masks = Vec::new();
        combinations_lex(4, 2, &mut masks);
        let lists: Vec<String> = masks
            .iter()
            .map(|&m| Configuration::from_mask(m, 4).to_string())
            .collect();
        assert_eq!(lists, ["1;2", "1;3", "1;4", "2;3", "2;4", "3;4"]);
    }

    #[test]
    fn table_order_and_size() {
        let cfg = ModelConfig::new(3, 1.0, 0.95, 0.025).unwrap();
        let y = DataVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let t = enumerate_posterior(&cfg, &SizePrior::beta_binomial(1.01).unwrap(), &y).unwrap();
        assert_eq!(t.len(), 8);
        let order: Vec<String> = t.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(order, ["", "1", "2", "3", "1;2", "1;3", "2;3", "1;2;3"]);
    }

    #[test]
    fn capacity_error() {
        let cfg = ModelConfig::new(21, 1.0, 0.95, 0.025).unwrap();
        let y = DataVector::new(vec![0.0; 21]).unwrap();
        let err = enumerate_posterior(&cfg, &SizePrior::complexity(1.0, 1.0).unwrap(), &y).unwrap_err();
        assert!(matches!(err, Error::Capacity { n: 21, cap: 20 }));
        assert!(err.to_string().contains("20"));
        let small = ModelConfig::new(4, 1.0, 0.95, 0.025).unwrap();
        let y4 = DataVector::new(vec![0.0; 4]).unwrap();
        assert!(enumerate_posterior_with_cap(&small, &SizePrior::complexity(1.0, 1.0).unwrap(), &y4, 3).is_err());
    }

    #[test]
    fn single_coordinate_ratio() {
        let cfg = ModelConfig::new(1, 1.0, 0.95, 0.025).unwrap();
        let prior = SizePrior::complexity(0.5, 3.0).unwrap();
        let y = DataVector::new(vec![0.0]).unwrap();
        let t = enumerate_posterior(&cfg, &prior, &y).unwrap();
        let lw = t.log_weights();
        // f(1)/f(0) = 1/(c n^a) = 1/3 with n = 1
        let expected = (1.0f64 / 3.0) * (1.0 + 0.95 / 0.025f64).powf(-0.5);
        assert!(((lw[1] - lw[0]).exp() - expected).abs() < 1e-14);
    }

    #[test]
    fn inclusion_checks_range_and_normalization() {
        let (cfg, prior, y) = worked_example();
        let t = enumerate_posterior(&cfg, &prior, &y).unwrap();
        assert!(inclusion_probability(&t, 0).is_err());
        assert!(inclusion_probability(&t, 3).is_err());
        assert!(inclusion_probability(&t.shifted(1.0), 1).is_err());
        let text = t.to_text();
        assert_eq!(text.lines().next(), Some("size,indices,log_weight"));
        assert_eq!(text.lines().nth(2), Some("1,1,-0.419738"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn gamma_range_enforced() {
        let (cfg, prior, y) = worked_example();
        let t = enumerate_posterior(&cfg, &prior, &y).unwrap();
        let x = LinearFunctional::unit(1, 2).unwrap();
        assert!(upper_credible_bound(&t, &cfg, &y, &x, 0.5).is_err());
        assert!(equal_tailed_interval(&t, &cfg, &y, &x, 0.0).is_err());
        assert!(LinearFunctional::new(vec![0.0, 0.0]).is_err());
        assert!(LinearFunctional::unit(3, 2).is_err());
    }
}
