//! Flag groups shared between subcommands, and their conversion into model
//! types.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use ebmeans::experiments::generate_data;
use ebmeans::samplers::{ChainSettings, DEFAULT_FLIP_PROBABILITY};
use ebmeans::{DataVector, ModelConfig, SizePrior};

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of means.
    #[arg(long)]
    pub n: usize,
    /// Fractional-likelihood power.
    #[arg(long, default_value_t = ModelConfig::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Slab precision offset.
    #[arg(long, default_value_t = ModelConfig::DEFAULT_TAU)]
    pub tau: f64,
    /// Known noise variance.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

impl ModelArgs {
    pub fn config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig::new(self.n, self.sigma2, self.alpha, self.tau)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorKind {
    Complexity,
    BetaBinomial,
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value_t = PriorKind::Complexity)]
    pub prior: PriorKind,
    /// Complexity prior exponent.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Complexity prior scale.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Beta-binomial exponent, b_n = n^xi.
    #[arg(long, default_value_t = SizePrior::DEFAULT_XI)]
    pub xi: f64,
}

impl PriorArgs {
    pub fn prior(&self, n: usize) -> Result<SizePrior> {
        let prior = match self.prior {
            PriorKind::Complexity => SizePrior::complexity(self.a, self.c)?,
            PriorKind::BetaBinomial => SizePrior::beta_binomial(self.xi)?,
        };
        prior.validate_for(n)?;
        Ok(prior)
    }
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = true)]
pub struct DataArgs {
    /// File of whitespace-separated observations.
    #[arg(long, conflicts_with_all = ["theta", "seed"])]
    pub data: Option<PathBuf>,
    /// Simulate data around a mean vector given as VALUE:COUNT blocks,
    /// e.g. "7:5,2:5"; remaining means are zero.
    #[arg(long, requires = "seed")]
    pub theta: Option<String>,
    /// Seed for simulated data.
    #[arg(long, requires = "theta")]
    pub seed: Option<u64>,
}

impl DataArgs {
    pub fn load(&self, cfg: &ModelConfig) -> Result<DataVector> {
        let y = match (&self.data, &self.theta, self.seed) {
            (Some(path), _, _) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                DataVector::parse(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(spec), Some(seed)) => {
                let theta = parse_theta(spec, cfg.n)?;
                generate_data(&theta, cfg.sigma2, seed)?
            }
            _ => bail!("give either --data or both --theta and --seed"),
        };
        y.check_dimension(cfg.n)?;
        Ok(y)
    }
}

/// Expands "VALUE:COUNT,..." into a vector of length `n`, zero padded.
pub fn parse_theta(spec: &str, n: usize) -> Result<Vec<f64>> {
    let mut theta = Vec::with_capacity(n);
    for block in spec.split(',').map(str::trim).filter(|b| !b.is_empty()) {
        let (value, count) = block
            .split_once(':')
            .with_context(|| format!("theta block {block:?} is not VALUE:COUNT"))?;
        let value: f64 = value.trim().parse().with_context(|| format!("bad value in {block:?}"))?;
        let count: usize = count.trim().parse().with_context(|| format!("bad count in {block:?}"))?;
        ensure!(value.is_finite(), "theta value in {block:?} is not finite");
        theta.extend(std::iter::repeat_n(value, count));
    }
    ensure!(theta.len() <= n, "theta blocks cover {} means but n = {n}", theta.len());
    theta.resize(n, 0.0);
    Ok(theta)
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Total chain iterations, burn-in included.
    #[arg(long, default_value_t = 25_000)]
    pub iterations: usize,
    /// Discarded initial iterations [default: 10% of iterations].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Probability of a toggle move (MH only).
    #[arg(long, default_value_t = DEFAULT_FLIP_PROBABILITY)]
    pub flip_probability: f64,
    /// Seed of the chain.
    #[arg(long, default_value_t = 1)]
    pub chain_seed: u64,
}

impl ChainArgs {
    pub fn settings(&self) -> Result<ChainSettings> {
        let s = ChainSettings {
            iterations: self.iterations,
            burn_in: self.burn_in.unwrap_or(self.iterations / 10),
            seed: self.chain_seed,
            flip_probability: self.flip_probability,
        };
        s.validate()?;
        if s.below_recommended_length() {
            eprintln!(
                "warning: {} iterations is below the recommended minimum of {}",
                s.iterations,
                ebmeans::samplers::RECOMMENDED_MIN_ITERATIONS
            );
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Mh,
    Gibbs,
}
