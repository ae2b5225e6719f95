mod args;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ebmeans::experiments::{
    coverage_csv_string, coverage_experiment_with_progress, plot_svg_string, regular_grid,
    write_atomically, ExperimentSpec, Method, PlotMetric,
};
use ebmeans::inference::{
    interval_from_samples, interval_from_table, IntervalRequest, IntervalResult, IntervalSide,
    IntervalTarget,
};
use ebmeans::math::fmt_sig6;
use ebmeans::oracle::{enumerate_posterior, inclusion_probabilities, LinearFunctional};
use ebmeans::samplers::{chain_summary, gibbs_chain, mh_chain};
use ebmeans::theory::{default_m, rho_threshold, size_prior_ratio_report, zeta_threshold};
use ebmeans::ModelConfig;

use args::{ChainArgs, DataArgs, ModelArgs, PriorArgs, SamplerKind};

/// Empirical-prior posterior inference for sparse normal means.
#[derive(Debug, Parser)]
#[command(name = "ebmeans", version)]
struct Cli {
    /// Worker threads for parallel work [default: all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact posterior over all configurations, with inclusion probabilities.
    Oracle(OracleArgs),
    /// Run an MCMC chain over configurations and dump its draws.
    Sample(SampleArgs),
    /// Credible interval for one mean or a linear functional.
    Interval(IntervalArgs),
    /// Monte Carlo coverage study of the marginal intervals.
    Coverage(CoverageArgs),
    /// Scan successive size-prior ratios f(s)/f(s-1).
    CheckPrior(CheckPriorArgs),
    /// Signal-strength thresholds rho_n and zeta_n.
    Thresholds(ThresholdArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Output file [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = SamplerKind::Mh)]
    method: SamplerKind,
    /// Output file for the draws [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Exact,
    Mh,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    TwoSided,
    Upper,
}

#[derive(Debug, Args)]
struct IntervalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    chain: ChainArgs,
    /// 1-based index of the mean.
    #[arg(long, conflicts_with = "functional", required_unless_present = "functional")]
    index: Option<usize>,
    /// Comma-separated coefficients x of the functional x^T theta.
    #[arg(long)]
    functional: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = Side::TwoSided)]
    side: Side,
    /// Posterior representation [default: exact when n is within the
    /// enumeration cap, otherwise mh].
    #[arg(long, value_enum)]
    source: Option<Source>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Start from the standard design at this n (ignored with --spec unless
    /// given explicitly, in which case it must agree).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<CoverageMethod>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    grid_start: Option<f64>,
    #[arg(long)]
    grid_stop: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Coverage CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Coverage plot.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Mean-length plot.
    #[arg(long)]
    length_svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoverageMethod {
    Mh,
    Gibbs,
    Exact,
}

#[derive(Debug, Args)]
struct CheckPriorArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long)]
    n: usize,
    /// Largest size s to scan.
    #[arg(long)]
    smax: usize,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Lower prior-decay exponent a1.
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    /// Constant M of rho_n [default: 1 + a1].
    #[arg(long)]
    m: Option<f64>,
    /// True support size, for zeta_n.
    #[arg(long, requires = "s_dagger")]
    s_star: Option<usize>,
    /// Number of strong signals, for zeta_n.
    #[arg(long, requires = "s_star")]
    s_dagger: Option<usize>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomically(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_oracle(a: &OracleArgs) -> Result<()> {
    let cfg = a.model.config()?;
    let prior = a.prior.prior(cfg.n)?;
    let y = a.data.load(&cfg)?;
    let table = enumerate_posterior(&cfg, &prior, &y)?;
    let p = inclusion_probabilities(&table)?;
    let mut text = table.to_text();
    text.push_str("\nindex,inclusion\n");
    for (k, pk) in p.iter().enumerate() {
        let _ = writeln!(text, "{},{}", k + 1, fmt_sig6(*pk));
    }
    emit(a.out.as_deref(), &text)
}

fn run_sample(a: &SampleArgs) -> Result<()> {
    let cfg = a.model.config()?;
    let prior = a.prior.prior(cfg.n)?;
    let y = a.data.load(&cfg)?;
    let settings = a.chain.settings()?;
    let samples = match a.method {
        SamplerKind::Mh => mh_chain(&cfg, &prior, &y, &settings)?,
        SamplerKind::Gibbs => gibbs_chain(&cfg, &prior, &y, &settings)?,
    };
    let summary = chain_summary(&samples)?;
    emit(a.out.as_deref(), &samples.to_text())?;
    if let Some(rate) = summary.acceptance_rate {
        eprintln!("acceptance rate: {}", fmt_sig6(rate));
    }
    eprintln!("mean size: {}", fmt_sig6(summary.mean_size));
    let freqs: Vec<String> = summary.inclusion_frequencies.iter().map(|f| fmt_sig6(*f)).collect();
    eprintln!("inclusion frequencies: {}", freqs.join(" "));
    Ok(())
}

fn parse_functional(text: &str) -> Result<LinearFunctional> {
    let x = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coefficient {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearFunctional::new(x)?)
}

fn run_interval(a: &IntervalArgs) -> Result<()> {
    let cfg = a.model.config()?;
    let prior = a.prior.prior(cfg.n)?;
    let target = match (a.index, &a.functional) {
        (Some(k), _) => IntervalTarget::Index(k),
        (None, Some(x)) => IntervalTarget::Functional(parse_functional(x)?),
        (None, None) => bail!("give --index or --functional"),
    };
    let side = match a.side {
        Side::TwoSided => IntervalSide::TwoSided,
        Side::Upper => IntervalSide::Upper,
    };
    let request = IntervalRequest::new(target, a.gamma, side)?;
    let y = a.data.load(&cfg)?;
    let source = a.source.unwrap_or(if cfg.n <= ebmeans::oracle::DEFAULT_ENUMERATION_CAP {
        Source::Exact
    } else {
        Source::Mh
    });
    let result: IntervalResult = match source {
        Source::Exact => interval_from_table(&enumerate_posterior(&cfg, &prior, &y)?, &cfg, &y, &request)?,
        Source::Mh => {
            let s = mh_chain(&cfg, &prior, &y, &a.chain.settings()?)?;
            interval_from_samples(&s, &cfg, &y, &request)?
        }
        Source::Gibbs => {
            let s = gibbs_chain(&cfg, &prior, &y, &a.chain.settings()?)?;
            interval_from_samples(&s, &cfg, &y, &request)?
        }
    };
    let text = format!("{}\n{}\n", IntervalResult::CSV_HEADER, result.to_csv_row());
    emit(a.out.as_deref(), &text)
}

fn coverage_spec(a: &CoverageArgs) -> Result<ExperimentSpec> {
    let mut spec = match &a.spec {
        Some(path) => {
            let spec = ExperimentSpec::from_config_file(path)
                .with_context(|| format!("loading {}", path.display()))?;
            if let Some(n) = a.n {
                if n != spec.n {
                    bail!("--n {n} disagrees with n = {} in {}", spec.n, path.display());
                }
            }
            spec
        }
        None => ExperimentSpec::standard_design(a.n.unwrap_or(200))?,
    };
    if let Some(r) = a.replicates {
        spec.replicates = r;
    }
    if let Some(g) = a.gamma {
        spec.gamma = g;
    }
    if let Some(m) = a.method {
        spec.method = match m {
            CoverageMethod::Mh => Method::Mh,
            CoverageMethod::Gibbs => Method::Gibbs,
            CoverageMethod::Exact => Method::Exact,
        };
    }
    if let Some(s) = a.master_seed {
        spec.master_seed = s;
    }
    if let Some(it) = a.iterations {
        spec.chain.iterations = it;
        spec.chain.burn_in = it / 10;
    }
    if a.grid_start.is_some() || a.grid_stop.is_some() || a.grid_step.is_some() {
        let current = &spec.signal_grid;
        let step = match a.grid_step {
            Some(s) => s,
            None if current.len() >= 2 => current[1] - current[0],
            None => 1.0,
        };
        spec.signal_grid = regular_grid(
            a.grid_start.unwrap_or(current[0]),
            a.grid_stop.unwrap_or(current[current.len() - 1]),
            step,
        )?;
    }
    spec.validate()?;
    Ok(spec)
}

fn run_coverage(a: &CoverageArgs) -> Result<()> {
    let spec = coverage_spec(a)?;
    if matches!(spec.method, Method::Gibbs | Method::Mh) && spec.chain.below_recommended_length() {
        eprintln!("warning: {} iterations is below the recommended minimum", spec.chain.iterations);
    }
    let total = spec.signal_grid.len();
    let rows = coverage_experiment_with_progress(&spec, |g, row| {
        eprintln!(
            "[{}/{total}] signal {}: coverage {}, mean length {}",
            g + 1,
            fmt_sig6(row.signal_value),
            fmt_sig6(row.coverage),
            fmt_sig6(row.mean_length)
        );
    })?;
    let coverage_svg = match &a.svg {
        Some(_) => Some(plot_svg_string(&rows, PlotMetric::Coverage { gamma: spec.gamma })?),
        None => None,
    };
    let length_svg = match &a.length_svg {
        Some(_) => Some(plot_svg_string(&rows, PlotMetric::MeanLength)?),
        None => None,
    };
    emit(Some(&a.out), &coverage_csv_string(&rows))?;
    if let (Some(path), Some(svg)) = (&a.svg, coverage_svg) {
        emit(Some(path), &svg)?;
    }
    if let (Some(path), Some(svg)) = (&a.length_svg, length_svg) {
        emit(Some(path), &svg)?;
    }
    Ok(())
}

fn run_check_prior(a: &CheckPriorArgs) -> Result<bool> {
    let prior = a.prior.prior(a.n)?;
    let r = size_prior_ratio_report(&prior, a.n, a.smax)?;
    println!("min_ratio,max_ratio,implied_a1,implied_a2");
    println!(
        "{},{},{},{}",
        fmt_sig6(r.min_ratio),
        fmt_sig6(r.max_ratio),
        fmt_sig6(r.implied_a1),
        fmt_sig6(r.implied_a2)
    );
    let ok = r.ratios_in_unit_interval();
    if !ok {
        eprintln!("size-prior ratios leave the interval (0, 1)");
    }
    Ok(ok)
}

fn run_thresholds(a: &ThresholdArgs) -> Result<()> {
    let cfg: ModelConfig = a.model.config()?;
    let m = a.m.unwrap_or_else(|| default_m(a.a1));
    let rho = rho_threshold(&cfg, m)?;
    println!("rho,{}", fmt_sig6(rho));
    if let (Some(s_star), Some(s_dagger)) = (a.s_star, a.s_dagger) {
        let zeta = zeta_threshold(&cfg, a.a1, s_star, s_dagger)?;
        println!("zeta,{}", fmt_sig6(zeta));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Oracle(a) => run_oracle(a)?,
        Command::Sample(a) => run_sample(a)?,
        Command::Interval(a) => run_interval(a)?,
        Command::Coverage(a) => run_coverage(a)?,
        Command::CheckPrior(a) => return run_check_prior(a),
        Command::Thresholds(a) => run_thresholds(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
