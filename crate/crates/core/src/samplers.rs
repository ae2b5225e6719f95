//! MCMC over configurations.
//!
//! [`mh_chain`] runs a Metropolis–Hastings walk that mixes single-index
//! toggles with member/non-member swaps. [`gibbs_chain`] exploits the latent
//! `W` of the beta-binomial prior: given `W = w` the indices are included
//! independently, and given `S` the latent is beta distributed. Both start
//! from the empty configuration.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ConfigPosterior, Configuration, DataVector, ModelConfig, SizePrior};
use crate::rng::{rng_from_seed, SimRng};

pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.9;
pub const RECOMMENDED_MIN_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSettings {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Probability of a toggle move; the remainder proposes swaps.
    pub flip_probability: f64,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            iterations: 25_000,
            burn_in: 2_500,
            seed: 0,
            flip_probability: DEFAULT_FLIP_PROBABILITY,
        }
    }
}

impl ChainSettings {
    /// Burn-in defaults to 10% of the iterations.
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 10,
            seed,
            flip_probability: DEFAULT_FLIP_PROBABILITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "no iterations remain after burn-in ({} iterations, burn-in {})",
                self.iterations, self.burn_in
            )));
        }
        if !(self.flip_probability > 0.0 && self.flip_probability <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "flip probability must lie in (0, 1], got {}",
                self.flip_probability
            )));
        }
        Ok(())
    }

    pub fn below_recommended_length(&self) -> bool {
        self.iterations < RECOMMENDED_MIN_ITERATIONS
    }
}

/// Retained draws of a chain plus its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationSamples {
    pub n: usize,
    pub draws: Vec<Configuration>,
    /// Latent `W` after each retained Gibbs sweep.
    pub w_draws: Option<Vec<f64>>,
    /// Accepted MH proposals over all iterations, burn-in included.
    pub accept_count: Option<usize>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl ConfigurationSamples {
    /// Wraps externally produced draws, e.g. for tests or imported chains.
    pub fn from_draws(n: usize, draws: Vec<Configuration>) -> Self {
        let iterations = draws.len();
        Self {
            n,
            draws,
            w_draws: None,
            accept_count: None,
            iterations,
            burn_in: 0,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Plain-text dump, one row per retained draw: `iteration,size,indices`.
    /// Iterations are counted from 1 and include burn-in.
    pub fn to_text(&self) -> String {
        let mut out = String::from("iteration,size,indices\n");
        for (i, d) in self.draws.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.burn_in + i + 1, d.len(), d));
        }
        out
    }
}

/// A proposed MH move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Toggle(usize),
    Swap { out: usize, inn: usize },
    /// Swap proposed from the empty or full configuration.
    Stay,
}

fn move_log_ratio(post: &ConfigPosterior<'_>, size: usize, contains: impl Fn(usize) -> bool, mv: Move) -> f64 {
    match mv {
        Move::Toggle(k) if contains(k) => -post.log_ratio_add(size - 1, k),
        Move::Toggle(k) => post.log_ratio_add(size, k),
        Move::Swap { out, inn } => post.log_ratio_swap(out, inn),
        Move::Stay => 0.0,
    }
}

/// Membership with O(1) uniform draws from members and non-members.
struct SubsetState {
    members: Vec<usize>,
    others: Vec<usize>,
    /// Position of each index (1-based) in whichever list holds it.
    slot: Vec<usize>,
    inside: Vec<bool>,
}

impl SubsetState {
    fn empty(n: usize) -> Self {
        Self {
            members: Vec::with_capacity(n),
            others: (1..=n).collect(),
            slot: std::iter::once(0).chain(0..n).collect(),
            inside: vec![false; n + 1],
        }
    }

    fn n(&self) -> usize {
        self.inside.len() - 1
    }

    fn remove_from(list: &mut Vec<usize>, slot: &mut [usize], k: usize) {
        let pos = slot[k];
        let last = *list.last().expect("non-empty list");
        list.swap_remove(pos);
        if last != k {
            slot[last] = pos;
        }
    }

    fn insert(&mut self, k: usize) {
        Self::remove_from(&mut self.others, &mut self.slot, k);
        self.slot[k] = self.members.len();
        self.members.push(k);
        self.inside[k] = true;
    }

    fn remove(&mut self, k: usize) {
        Self::remove_from(&mut self.members, &mut self.slot, k);
        self.slot[k] = self.others.len();
        self.others.push(k);
        self.inside[k] = false;
    }

    fn apply(&mut self, mv: Move) {
        match mv {
            Move::Toggle(k) if self.inside[k] => self.remove(k),
            Move::Toggle(k) => self.insert(k),
            Move::Swap { out, inn } => {
                self.remove(out);
                self.insert(inn);
            }
            Move::Stay => {}
        }
    }

    fn propose(&self, flip_probability: f64, rng: &mut SimRng) -> Move {
        let n = self.n();
        if rng.random::<f64>() < flip_probability {
            Move::Toggle(rng.random_range(1..=n))
        } else if self.members.is_empty() || self.others.is_empty() {
            Move::Stay
        } else {
            let out = self.members[rng.random_range(0..self.members.len())];
            let inn = self.others[rng.random_range(0..self.others.len())];
            Move::Swap { out, inn }
        }
    }

    fn snapshot(&self) -> Configuration {
        let mut v = self.members.clone();
        v.sort_unstable();
        Configuration::from_sorted_unchecked(v)
    }
}

pub fn mh_chain(
    cfg: &ModelConfig,
    prior: &SizePrior,
    y: &DataVector,
    settings: &ChainSettings,
) -> Result<ConfigurationSamples> {
    settings.validate()?;
    let post = ConfigPosterior::new(cfg, prior, y)?;
    let mut rng = rng_from_seed(settings.seed);
    let mut state = SubsetState::empty(cfg.n);
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(settings.iterations - settings.burn_in);
    for it in 0..settings.iterations {
        let mv = state.propose(settings.flip_probability, &mut rng);
        if mv != Move::Stay {
            let lr = move_log_ratio(&post, state.members.len(), |k| state.inside[k], mv);
            if lr >= 0.0 || rng.random::<f64>().ln() < lr {
                state.apply(mv);
                accepted += 1;
            }
        }
        if it >= settings.burn_in {
            draws.push(state.snapshot());
        }
    }
    Ok(ConfigurationSamples {
        n: cfg.n,
        draws,
        w_draws: None,
        accept_count: Some(accepted),
        iterations: settings.iterations,
        burn_in: settings.burn_in,
        seed: settings.seed,
    })
}

/// One row of the exact MH transition kernel: every configuration reachable
/// from `from` in one step, with its probability (the stay probability
/// included). Built from the same proposal and acceptance rules as [`mh_chain`].
pub fn mh_transition_row(
    post: &ConfigPosterior<'_>,
    flip_probability: f64,
    from: &Configuration,
) -> Vec<(Configuration, f64)> {
    let n = post.config().n;
    let size = from.len();
    let contains = |k: usize| from.contains(k);
    let accept = |mv: Move| move_log_ratio(post, size, contains, mv).min(0.0).exp();
    let mut row = Vec::new();
    let mut moved = 0.0;

    for k in 1..=n {
        let p = flip_probability / n as f64 * accept(Move::Toggle(k));
        let mut next: Vec<usize> = from.iter().filter(|&j| j != k).collect();
        if !from.contains(k) {
            next.push(k);
            next.sort_unstable();
        }
        moved += p;
        row.push((Configuration::from_sorted_unchecked(next), p));
    }
    if size > 0 && size < n {
        let pair = (1.0 - flip_probability) / (size * (n - size)) as f64;
        for out in from.iter() {
            for inn in (1..=n).filter(|&j| !from.contains(j)) {
                let p = pair * accept(Move::Swap { out, inn });
                let mut next: Vec<usize> = from.iter().filter(|&j| j != out).collect();
                next.push(inn);
                next.sort_unstable();
                moved += p;
                row.push((Configuration::from_sorted_unchecked(next), p));
            }
        }
    }
    row.push((from.clone(), 1.0 - moved));
    row
}

/// Log-odds of including index `k` given the latent `W = w`:
/// `log((1 - w)/w) - 1/2 log(1 + alpha/tau) + alpha y_k^2 / (2 sigma2)`.
pub fn gibbs_inclusion_logit(cfg: &ModelConfig, w: f64, y_k: f64) -> f64 {
    (-w).ln_1p() - w.ln() - cfg.log_slab_penalty() + cfg.residual_weight() * y_k * y_k
}

/// Shape parameters of `W | S ~ Beta(b_n + n - |S|, |S| + 1)`.
pub fn gibbs_latent_parameters(b_n: f64, n: usize, size: usize) -> (f64, f64) {
    (b_n + (n - size) as f64, size as f64 + 1.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn gibbs_chain(
    cfg: &ModelConfig,
    prior: &SizePrior,
    y: &DataVector,
    settings: &ChainSettings,
) -> Result<ConfigurationSamples> {
    let b_n = prior.b_n(cfg.n).ok_or(Error::WrongPrior)?;
    settings.validate()?;
    prior.validate_for(cfg.n)?;
    y.check_dimension(cfg.n)?;
    let n = cfg.n;
    let mut rng = rng_from_seed(settings.seed);
    let keep = settings.iterations - settings.burn_in;
    let mut draws = Vec::with_capacity(keep);
    let mut w_draws = Vec::with_capacity(keep);
    let mut current: Vec<usize> = Vec::new();

    for it in 0..settings.iterations {
        let (a, b) = gibbs_latent_parameters(b_n, n, current.len());
        let beta = Beta::new(a, b)
            .map_err(|e| Error::InvalidParameter(format!("latent beta({a}, {b}): {e}")))?;
        let w = loop {
            let w: f64 = beta.sample(&mut rng);
            if w > 0.0 && w < 1.0 {
                break w;
            }
        };
        current.clear();
        for k in 1..=n {
            let p = sigmoid(gibbs_inclusion_logit(cfg, w, y.get(k)));
            if rng.random::<f64>() < p {
                current.push(k);
            }
        }
        if it >= settings.burn_in {
            draws.push(Configuration::from_sorted_unchecked(current.clone()));
            w_draws.push(w);
        }
    }
    Ok(ConfigurationSamples {
        n,
        draws,
        w_draws: Some(w_draws),
        accept_count: None,
        iterations: settings.iterations,
        burn_in: settings.burn_in,
        seed: settings.seed,
    })
}

/// `theta_k ~ N(Y_k, v_alpha)` independently for `k` in `S`, zero elsewhere.
pub fn draw_theta_given_config<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    y: &DataVector,
    config: &Configuration,
    rng: &mut R,
) -> Vec<f64> {
    let sd = cfg.posterior_variance().sqrt();
    let mut theta = vec![0.0; y.len()];
    for k in config.iter() {
        let z: f64 = StandardNormal.sample(rng);
        theta[k - 1] = y.get(k) + sd * z;
    }
    theta
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    /// `accept_count / iterations`; MH only.
    pub acceptance_rate: Option<f64>,
    pub mean_size: f64,
    /// Counts of `|S|` for sizes `0..=n`.
    pub size_histogram: Vec<usize>,
    pub inclusion_frequencies: Vec<f64>,
}

pub fn chain_summary(samples: &ConfigurationSamples) -> Result<ChainSummary> {
    if samples.draws.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = samples.n;
    let total = samples.draws.len() as f64;
    let mut hist = vec![0usize; n + 1];
    let mut counts = vec![0usize; n];
    for d in &samples.draws {
        hist[d.len()] += 1;
        for k in d.iter() {
            counts[k - 1] += 1;
        }
    }
    let mean_size = hist.iter().enumerate().map(|(s, &c)| (s * c) as f64).sum::<f64>() / total;
    Ok(ChainSummary {
        acceptance_rate: samples
            .accept_count
            .map(|a| a as f64 / samples.iterations as f64),
        mean_size,
        size_histogram: hist,
        inclusion_frequencies: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}
