//! Inclusion probabilities, credible intervals, posterior means and the
//! median probability model, from either an exact table or MCMC draws.

use std::fmt;

use crate::error::{Error, Result};
use crate::math::fmt_sig6;
use crate::mixture::{MixtureBuilder, MixtureCdf};
use crate::model::{Configuration, DataVector, ModelConfig};
use crate::oracle::{check_gamma, functional_mixture, inclusion_probabilities, LinearFunctional, PosteriorTable};
use crate::rng::rng_from_seed;
use crate::samplers::{draw_theta_given_config, ConfigurationSamples};

#[derive(Debug, Clone, PartialEq)]
pub enum IntervalTarget {
    /// A single mean, 1-based.
    Index(usize),
    Functional(LinearFunctional),
}

impl IntervalTarget {
    fn functional(&self, n: usize) -> Result<LinearFunctional> {
        match self {
            IntervalTarget::Index(k) => LinearFunctional::unit(*k, n),
            IntervalTarget::Functional(x) if x.len() == n => Ok(x.clone()),
            IntervalTarget::Functional(x) => Err(Error::Dimension {
                expected: n,
                got: x.len(),
            }),
        }
    }
}

impl fmt::Display for IntervalTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalTarget::Index(k) => write!(f, "theta_{k}"),
            IntervalTarget::Functional(_) => f.write_str("functional"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalSide {
    /// `(-inf, t_gamma]`
    Upper,
    /// Equal-tailed, `gamma/2` in each tail.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRequest {
    pub target: IntervalTarget,
    pub gamma: f64,
    pub side: IntervalSide,
}

impl IntervalRequest {
    pub fn new(target: IntervalTarget, gamma: f64, side: IntervalSide) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { target, gamma, side })
    }

    pub fn two_sided(k: usize, gamma: f64) -> Result<Self> {
        Self::new(IntervalTarget::Index(k), gamma, IntervalSide::TwoSided)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub target: IntervalTarget,
    /// `-inf` for an upper bound.
    pub lower: f64,
    pub upper: f64,
    pub gamma: f64,
    pub jump_mass_at_zero: f64,
    /// Inclusion probability of the target index; `None` for general functionals.
    pub estimated_inclusion: Option<f64>,
}

impl IntervalResult {
    pub const CSV_HEADER: &'static str = "target,gamma,lower,upper,length,jump_mass,inclusion";

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// One CSV row matching [`Self::CSV_HEADER`]; the inclusion column is
    /// empty for functionals.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.target,
            fmt_sig6(self.gamma),
            fmt_sig6(self.lower),
            fmt_sig6(self.upper),
            fmt_sig6(self.length()),
            fmt_sig6(self.jump_mass_at_zero),
            self.estimated_inclusion.map(fmt_sig6).unwrap_or_default()
        )
    }
}

fn interval_from_mixture(h: &MixtureCdf, request: &IntervalRequest, inclusion: Option<f64>) -> IntervalResult {
    let (lower, upper) = match request.side {
        IntervalSide::Upper => (f64::NEG_INFINITY, h.quantile(1.0 - request.gamma)),
        IntervalSide::TwoSided => (
            h.quantile(request.gamma / 2.0),
            h.quantile(1.0 - request.gamma / 2.0),
        ),
    };
    IntervalResult {
        target: request.target.clone(),
        lower,
        upper,
        gamma: request.gamma,
        jump_mass_at_zero: h.jump_at_zero(),
        estimated_inclusion: inclusion,
    }
}

fn check_samples(samples: &ConfigurationSamples) -> Result<()> {
    if samples.draws.is_empty() {
        Err(Error::EmptyChain)
    } else {
        Ok(())
    }
}

/// Fraction of retained draws that contain `k`.
pub fn inclusion_from_samples(samples: &ConfigurationSamples, k: usize) -> Result<f64> {
    check_samples(samples)?;
    if k == 0 || k > samples.n {
        return Err(Error::IndexOutOfRange { index: k, n: samples.n });
    }
    let hits = samples.draws.iter().filter(|d| d.contains(k)).count();
    Ok(hits as f64 / samples.draws.len() as f64)
}

/// Rao–Blackwellized estimate of the functional's posterior CDF: the average
/// over draws of each configuration's conditional CDF.
pub fn mixture_from_samples(
    samples: &ConfigurationSamples,
    cfg: &ModelConfig,
    y: &DataVector,
    x: &LinearFunctional,
) -> Result<MixtureCdf> {
    check_samples(samples)?;
    y.check_dimension(samples.n)?;
    let v = cfg.posterior_variance();
    let mut builder = MixtureBuilder::new();
    for d in &samples.draws {
        let (mean, norm2) = x.restricted(y, d);
        builder.add(1.0, mean, (v * norm2).sqrt());
    }
    Ok(builder.build())
}

pub fn interval_from_samples(
    samples: &ConfigurationSamples,
    cfg: &ModelConfig,
    y: &DataVector,
    request: &IntervalRequest,
) -> Result<IntervalResult> {
    check_samples(samples)?;
    check_gamma(request.gamma)?;
    let x = request.target.functional(samples.n)?;
    let h = mixture_from_samples(samples, cfg, y, &x)?;
    let inclusion = match request.target {
        IntervalTarget::Index(k) => Some(inclusion_from_samples(samples, k)?),
        IntervalTarget::Functional(_) => None,
    };
    Ok(interval_from_mixture(&h, request, inclusion))
}

/// Same request answered from the exact posterior table.
pub fn interval_from_table(
    table: &PosteriorTable,
    cfg: &ModelConfig,
    y: &DataVector,
    request: &IntervalRequest,
) -> Result<IntervalResult> {
    check_gamma(request.gamma)?;
    let x = request.target.functional(table.n())?;
    let h = functional_mixture(table, cfg, y, &x)?;
    let inclusion = match request.target {
        IntervalTarget::Index(k) => Some(crate::oracle::inclusion_probability(table, k)?),
        IntervalTarget::Functional(_) => None,
    };
    Ok(interval_from_mixture(&h, request, inclusion))
}

/// Empirical quantiles of `x^T theta` with one `theta` drawn per retained
/// configuration. Noisier than [`interval_from_samples`]; kept for comparison.
pub fn interval_from_theta_draws(
    samples: &ConfigurationSamples,
    cfg: &ModelConfig,
    y: &DataVector,
    request: &IntervalRequest,
    seed: u64,
) -> Result<IntervalResult> {
    check_samples(samples)?;
    check_gamma(request.gamma)?;
    let x = request.target.functional(samples.n)?;
    let mut rng = rng_from_seed(seed);
    let mut degenerate = 0usize;
    let mut psi: Vec<f64> = samples
        .draws
        .iter()
        .map(|d| {
            if x.restricted(y, d).1 == 0.0 {
                degenerate += 1;
            }
            let theta = draw_theta_given_config(cfg, y, d, &mut rng);
            x.coefficients().iter().zip(&theta).map(|(a, b)| a * b).sum()
        })
        .collect();
    psi.sort_by(f64::total_cmp);
    let total = psi.len();
    let quantile = |q: f64| {
        let idx = ((q * total as f64).ceil() as usize).clamp(1, total) - 1;
        psi[idx]
    };
    let (lower, upper) = match request.side {
        IntervalSide::Upper => (f64::NEG_INFINITY, quantile(1.0 - request.gamma)),
        IntervalSide::TwoSided => (quantile(request.gamma / 2.0), quantile(1.0 - request.gamma / 2.0)),
    };
    let estimated_inclusion = match request.target {
        IntervalTarget::Index(k) => Some(inclusion_from_samples(samples, k)?),
        IntervalTarget::Functional(_) => None,
    };
    Ok(IntervalResult {
        target: request.target.clone(),
        lower,
        upper,
        gamma: request.gamma,
        jump_mass_at_zero: degenerate as f64 / total as f64,
        estimated_inclusion,
    })
}

/// Anything that yields (estimated) inclusion probabilities.
#[derive(Debug, Clone, Copy)]
pub enum PosteriorSource<'a> {
    Table(&'a PosteriorTable),
    Samples(&'a ConfigurationSamples),
}

impl PosteriorSource<'_> {
    pub fn inclusion_probabilities(&self) -> Result<Vec<f64>> {
        match self {
            PosteriorSource::Table(t) => inclusion_probabilities(t),
            PosteriorSource::Samples(s) => (1..=s.n).map(|k| inclusion_from_samples(s, k)).collect(),
        }
    }
}

/// `theta_hat_k = p_k * Y_k`.
pub fn posterior_mean(source: PosteriorSource<'_>, y: &DataVector) -> Result<Vec<f64>> {
    let p = source.inclusion_probabilities()?;
    y.check_dimension(p.len())?;
    Ok(p.iter().zip(y.values()).map(|(p, y)| p * y).collect())
}

/// `{k : p_k > 1/2}`; exact ties at one half are excluded.
pub fn median_probability_model(p: &[f64]) -> Result<Configuration> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "inclusion probability {bad} outside [0, 1]"
        )));
    }
    Configuration::new(
        (1..=p.len()).filter(|&k| p[k - 1] > 0.5).collect(),
        p.len(),
    )
}
