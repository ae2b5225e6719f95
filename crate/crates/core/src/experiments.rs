//! Data generation and the Monte Carlo coverage harness.
//!
//! For each value `v` on the signal grid the true mean vector is built from a
//! template with one coordinate set to `v`; each replicate draws fresh data,
//! runs the chosen posterior computation and records whether the two-sided
//! interval for that coordinate covers `v`, and its length.
//!
//! Replicate `(g, r)` draws its data from seed `child_seed(master, [g, r, 0])`
//! and its chain from `child_seed(master, [g, r, 1])`, so every row is a
//! function of the master seed alone.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{interval_from_samples, interval_from_table, IntervalRequest};
use crate::math::fmt_sig6;
use crate::model::{DataVector, ModelConfig, SizePrior};
use crate::oracle::{enumerate_posterior, DEFAULT_ENUMERATION_CAP};
use crate::rng::{child_seed, rng_from_seed};
use crate::samplers::{gibbs_chain, mh_chain, ChainSettings, DEFAULT_FLIP_PROBABILITY};

/// `theta*`: consecutive blocks of equal values starting at index 1, zeros
/// elsewhere, and one coordinate that the experiment varies.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTemplate {
    /// `(count, value)` pairs.
    pub blocks: Vec<(usize, f64)>,
    pub varying_index: usize,
}

impl ThetaTemplate {
    pub fn build(&self, n: usize, varying_value: f64) -> Vec<f64> {
        let mut theta: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|&(count, value)| std::iter::repeat_n(value, count))
            .collect();
        theta.resize(n, 0.0);
        theta[self.varying_index - 1] = varying_value;
        theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mh,
    Gibbs,
    /// Exact enumeration in place of MCMC; small `n` only.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub theta_template: ThetaTemplate,
    pub signal_grid: Vec<f64>,
    pub replicates: usize,
    pub gamma: f64,
    pub method: Method,
    pub prior: SizePrior,
    pub cfg: ModelConfig,
    pub chain: ChainSettings,
    pub master_seed: u64,
    /// Test mode: data equal `theta*` exactly.
    pub noise_free: bool,
}

/// Grid `start, start + step, ..., stop`, computed by index to avoid drift.
pub fn regular_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidParameter(format!(
            "bad grid: start {start}, stop {stop}, step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

impl ExperimentSpec {
    /// Five means at 7, five at 2, the eleventh varying over 0..=10 in steps
    /// of 0.25, zeros elsewhere; 500 replicates of the MH sampler with the
    /// complexity prior, `alpha = 0.95`, `tau = 0.025`, `gamma = 0.05`.
    pub fn standard_design(n: usize) -> Result<Self> {
        Ok(Self {
            n,
            theta_template: ThetaTemplate {
                blocks: vec![(5, 7.0), (5, 2.0)],
                varying_index: 11,
            },
            signal_grid: regular_grid(0.0, 10.0, 0.25)?,
            replicates: 500,
            gamma: 0.05,
            method: Method::Mh,
            prior: SizePrior::complexity(1.0, 1.0)?,
            cfg: ModelConfig::new(n, 1.0, ModelConfig::DEFAULT_ALPHA, ModelConfig::DEFAULT_TAU)?,
            chain: ChainSettings::default(),
            master_seed: 20_190_101,
            noise_free: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.cfg.n != self.n {
            return bad(format!("model dimension {} differs from n = {}", self.cfg.n, self.n));
        }
        let idx = self.theta_template.varying_index;
        if idx == 0 || idx > self.n {
            return Err(Error::IndexOutOfRange { index: idx, n: self.n });
        }
        let filled: usize = self.theta_template.blocks.iter().map(|b| b.0).sum();
        if filled > self.n {
            return bad(format!("theta blocks fill {filled} coordinates but n = {}", self.n));
        }
        if self.theta_template.blocks.iter().any(|b| !b.1.is_finite()) {
            return bad("theta block values must be finite".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.signal_grid.is_empty() {
            return bad("signal grid is empty".into());
        }
        if self.signal_grid.iter().any(|v| !v.is_finite())
            || self.signal_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("signal grid must be finite and strictly increasing".into());
        }
        crate::oracle::check_gamma(self.gamma)?;
        self.prior.validate_for(self.n)?;
        match self.method {
            Method::Mh => self.chain.validate()?,
            Method::Gibbs => {
                if self.prior.b_n(self.n).is_none() {
                    return Err(Error::WrongPrior);
                }
                self.chain.validate()?;
            }
            Method::Exact => {
                if self.n > DEFAULT_ENUMERATION_CAP {
                    return Err(Error::Capacity { n: self.n, cap: DEFAULT_ENUMERATION_CAP });
                }
            }
        }
        Ok(())
    }

    /// Parses a `key = value` config file (TOML syntax). Keys mirror the
    /// field names; anything unrecognized is rejected. Unset keys fall back
    /// to [`ExperimentSpec::standard_design`].
    pub fn from_config_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_spec()
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: Option<usize>,
    sigma2: Option<f64>,
    alpha: Option<f64>,
    tau: Option<f64>,
    prior: Option<String>,
    a: Option<f64>,
    c: Option<f64>,
    xi: Option<f64>,
    theta_counts: Option<Vec<usize>>,
    theta_values: Option<Vec<f64>>,
    varying_index: Option<usize>,
    signal_grid: Option<Vec<f64>>,
    grid_start: Option<f64>,
    grid_stop: Option<f64>,
    grid_step: Option<f64>,
    replicates: Option<usize>,
    gamma: Option<f64>,
    method: Option<Method>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    flip_probability: Option<f64>,
    master_seed: Option<u64>,
    noise_free: Option<bool>,
}

impl RawSpec {
    fn into_spec(self) -> Result<ExperimentSpec> {
        let n = self.n.unwrap_or(200);
        let mut spec = ExperimentSpec::standard_design(n)?;
        spec.cfg = ModelConfig::new(
            n,
            self.sigma2.unwrap_or(1.0),
            self.alpha.unwrap_or(ModelConfig::DEFAULT_ALPHA),
            self.tau.unwrap_or(ModelConfig::DEFAULT_TAU),
        )?;
        spec.prior = match self.prior.as_deref().unwrap_or("complexity") {
            "complexity" => SizePrior::complexity(self.a.unwrap_or(1.0), self.c.unwrap_or(1.0))?,
            "beta-binomial" | "beta_binomial" => {
                SizePrior::beta_binomial(self.xi.unwrap_or(SizePrior::DEFAULT_XI))?
            }
            other => return Err(Error::Parse(format!("unknown prior {other:?}"))),
        };
        match (self.theta_counts, self.theta_values) {
            (Some(counts), Some(values)) => {
                if counts.len() != values.len() {
                    return Err(Error::Parse(
                        "theta_counts and theta_values differ in length".into(),
                    ));
                }
                spec.theta_template.blocks = counts.into_iter().zip(values).collect();
            }
            (None, None) => {}
            _ => {
                return Err(Error::Parse(
                    "theta_counts and theta_values must be given together".into(),
                ))
            }
        }
        if let Some(i) = self.varying_index {
            spec.theta_template.varying_index = i;
        }
        let stepped = self.grid_start.is_some() || self.grid_stop.is_some() || self.grid_step.is_some();
        spec.signal_grid = match (self.signal_grid, stepped) {
            (Some(_), true) => {
                return Err(Error::Parse(
                    "give either signal_grid or grid_start/grid_stop/grid_step".into(),
                ))
            }
            (Some(g), false) => g,
            (None, _) => regular_grid(
                self.grid_start.unwrap_or(0.0),
                self.grid_stop.unwrap_or(10.0),
                self.grid_step.unwrap_or(0.25),
            )?,
        };
        if let Some(r) = self.replicates {
            spec.replicates = r;
        }
        if let Some(g) = self.gamma {
            spec.gamma = g;
        }
        if let Some(m) = self.method {
            spec.method = m;
        }
        let iterations = self.iterations.unwrap_or(spec.chain.iterations);
        spec.chain = ChainSettings {
            iterations,
            burn_in: self.burn_in.unwrap_or(iterations / 10),
            seed: 0,
            flip_probability: self.flip_probability.unwrap_or(DEFAULT_FLIP_PROBABILITY),
        };
        if let Some(s) = self.master_seed {
            spec.master_seed = s;
        }
        spec.noise_free = self.noise_free.unwrap_or(false);
        spec.validate()?;
        Ok(spec)
    }
}

/// `Y_i = theta_i + sqrt(sigma2) Z_i`. `sigma2 = 0` is accepted as a
/// noiseless test mode.
pub fn generate_data(theta_star: &[f64], sigma2: f64, seed: u64) -> Result<DataVector> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be non-negative, got {sigma2}"
        )));
    }
    if sigma2 == 0.0 {
        return DataVector::new(theta_star.to_vec());
    }
    let sd = sigma2.sqrt();
    let mut rng = rng_from_seed(seed);
    DataVector::new(
        theta_star
            .iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                t + sd * z
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub signal_value: f64,
    pub replicates: usize,
    pub coverage: f64,
    pub mean_length: f64,
    #[serde(rename = "mc_se")]
    pub mc_standard_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub grid_index: usize,
    pub replicate: usize,
    pub covered: bool,
    pub length: f64,
}

/// Runs one replicate of one grid point.
pub fn run_replicate(spec: &ExperimentSpec, grid_index: usize, replicate: usize) -> Result<ReplicateOutcome> {
    let wrap = |e: Error| Error::Replicate {
        grid_index,
        replicate,
        source: Box::new(e),
    };
    let value = *spec.signal_grid.get(grid_index).ok_or_else(|| {
        Error::InvalidParameter(format!("grid index {grid_index} out of range"))
    })?;
    let (g, r) = (grid_index as u64, replicate as u64);
    let theta = spec.theta_template.build(spec.n, value);
    let noise = if spec.noise_free { 0.0 } else { spec.cfg.sigma2 };
    let y = generate_data(&theta, noise, child_seed(spec.master_seed, &[g, r, 0])).map_err(wrap)?;
    let request = IntervalRequest::two_sided(spec.theta_template.varying_index, spec.gamma).map_err(wrap)?;
    let chain = ChainSettings {
        seed: child_seed(spec.master_seed, &[g, r, 1]),
        ..spec.chain
    };
    let interval = match spec.method {
        Method::Mh => mh_chain(&spec.cfg, &spec.prior, &y, &chain)
            .and_then(|s| interval_from_samples(&s, &spec.cfg, &y, &request)),
        Method::Gibbs => gibbs_chain(&spec.cfg, &spec.prior, &y, &chain)
            .and_then(|s| interval_from_samples(&s, &spec.cfg, &y, &request)),
        Method::Exact => enumerate_posterior(&spec.cfg, &spec.prior, &y)
            .and_then(|t| interval_from_table(&t, &spec.cfg, &y, &request)),
    }
    .map_err(wrap)?;
    Ok(ReplicateOutcome {
        grid_index,
        replicate,
        covered: interval.contains(value),
        length: interval.length(),
    })
}

/// Collapses outcomes into one row per grid point. Input order is irrelevant;
/// every `(grid point, replicate)` pair must appear exactly once.
pub fn aggregate(spec: &ExperimentSpec, outcomes: &[ReplicateOutcome]) -> Result<Vec<CoverageRow>> {
    let mut slots: Vec<Vec<Option<ReplicateOutcome>>> =
        vec![vec![None; spec.replicates]; spec.signal_grid.len()];
    for o in outcomes {
        let slot = slots
            .get_mut(o.grid_index)
            .and_then(|g| g.get_mut(o.replicate))
            .ok_or_else(|| Error::InvalidParameter(format!("stray outcome {o:?}")))?;
        if slot.replace(*o).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate outcome {o:?}")));
        }
    }
    slots
        .iter()
        .enumerate()
        .map(|(g, reps)| {
            let reps = reps
                .iter()
                .enumerate()
                .map(|(r, o)| {
                    o.ok_or_else(|| {
                        Error::InvalidParameter(format!("missing replicate {r} at grid point {g}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(row_from_outcomes(spec.n, spec.signal_grid[g], &reps))
        })
        .collect()
}

fn row_from_outcomes(n: usize, signal_value: f64, reps: &[ReplicateOutcome]) -> CoverageRow {
    let count = reps.len() as f64;
    let coverage = reps.iter().filter(|o| o.covered).count() as f64 / count;
    let mean_length = reps.iter().map(|o| o.length).sum::<f64>() / count;
    CoverageRow {
        n,
        signal_value,
        replicates: reps.len(),
        coverage,
        mean_length,
        mc_standard_error: (coverage * (1.0 - coverage) / count).sqrt(),
    }
}

pub fn coverage_experiment(spec: &ExperimentSpec) -> Result<Vec<CoverageRow>> {
    coverage_experiment_with_progress(spec, |_, _| {})
}

/// Grid points run in order; the replicates of each run in parallel. After
/// each grid point `progress(grid_index, row)` is called.
pub fn coverage_experiment_with_progress<F>(spec: &ExperimentSpec, mut progress: F) -> Result<Vec<CoverageRow>>
where
    F: FnMut(usize, &CoverageRow),
{
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.signal_grid.len());
    for g in 0..spec.signal_grid.len() {
        let results: Vec<Result<ReplicateOutcome>> = (0..spec.replicates)
            .into_par_iter()
            .map(|r| run_replicate(spec, g, r))
            .collect();
        // first failure in replicate order aborts the run
        let reps = results.into_iter().collect::<Result<Vec<_>>>()?;
        let row = row_from_outcomes(spec.n, spec.signal_grid[g], &reps);
        progress(g, &row);
        rows.push(row);
    }
    Ok(rows)
}

pub const COVERAGE_CSV_HEADER: &str = "n,signal_value,replicates,coverage,mean_length,mc_se";

pub fn coverage_csv_string(rows: &[CoverageRow]) -> String {
    let mut out = String::from(COVERAGE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            fmt_sig6(r.signal_value),
            r.replicates,
            fmt_sig6(r.coverage),
            fmt_sig6(r.mean_length),
            fmt_sig6(r.mc_standard_error)
        );
    }
    out
}

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so a failed write never leaves a partial file at `path`.
pub fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_coverage_csv(rows: &[CoverageRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no coverage rows to write".into()));
    }
    write_atomically(path, &coverage_csv_string(rows))
}

pub fn read_coverage_csv(path: &Path) -> Result<Vec<CoverageRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlotMetric {
    /// Coverage with a reference line at `1 - gamma`.
    Coverage { gamma: f64 },
    MeanLength,
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

pub fn plot_svg_string(rows: &[CoverageRow], which: PlotMetric) -> Result<String> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("a plot needs at least two rows".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.signal_value).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| match which {
            PlotMetric::Coverage { .. } => r.coverage,
            PlotMetric::MeanLength => r.mean_length,
        })
        .collect();
    let (x_min, x_max) = (xs[0].min(xs[xs.len() - 1]), xs[0].max(xs[xs.len() - 1]));
    let (y_min, y_max, title, y_label) = match which {
        PlotMetric::Coverage { .. } => (0.0, 1.0, "Coverage probability", "coverage"),
        PlotMetric::MeanLength => {
            let top = ys.iter().copied().fold(0.0, f64::max);
            (0.0, if top > 0.0 { top * 1.1 } else { 1.0 }, "Mean interval length", "mean length")
        }
    };
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{title}, n = {}</text>"#,
        SVG_WIDTH / 2.0,
        rows[0].n
    );
    // axes
    let (x0, x1, y0, y1) = (px(x_min), px(x_min + x_span), py(y_min), py(y_max));
    let _ = writeln!(
        s,
        r#"<path d="M {x0:.2} {y1:.2} L {x0:.2} {y0:.2} L {x1:.2} {y0:.2}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=5 {
        let xv = x_min + x_span * i as f64 / 5.0;
        let yv = y_min + (y_max - y_min) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            px(xv),
            y0 + 18.0,
            fmt_sig6((xv * 1000.0).round() / 1000.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            x0 - 6.0,
            py(yv) + 4.0,
            fmt_sig6((yv * 1000.0).round() / 1000.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">signal</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.2})">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    if let PlotMetric::Coverage { gamma } = which {
        let level = py(1.0 - gamma);
        let _ = writeln!(
            s,
            r#"<line class="nominal" x1="{x0:.2}" y1="{level:.2}" x2="{x1:.2}" y2="{level:.2}" stroke="gray" stroke-dasharray="6 4"/>"#
        );
    }
    let points: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="series" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot_svg(rows: &[CoverageRow], path: &Path, which: PlotMetric) -> Result<()> {
    write_atomically(path, &plot_svg_string(rows, which)?)
}
