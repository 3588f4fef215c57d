//! Command-line interface.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use genco_core::backtest::BacktestReport;
use genco_core::curves::{discretize, discretize_dp, SteppedSupplyCurve};
use genco_core::optimizer::{efficient_frontier, OfferingProblem};
use genco_core::regression::PosteriorSummary;
use genco_core::scenarios::generate;
use log::info;

use crate::config::{parse_grid, PipelineConfig, Sampling};
use crate::data::{ingest_curves, write_covariates, write_curves};
use crate::pipeline::{
    day_problem, day_seed, fit, load_market, optimize_days, periods, replay, solve_options, strategy_offers, FitOutput,
    Market,
};
use crate::report;
use crate::synth::{generate_synthetic, SyntheticMarketSpec};

#[derive(Debug, Parser)]
#[command(name = "genco", version, about = "Day-ahead offering strategy for a price-making generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market with a known price response.
    Synth(SynthArgs),
    /// Discretize every hourly curve of a curves file.
    Discretize(DiscretizeArgs),
    /// Fit the price-response regression on the training period.
    Fit(Common),
    /// Sample block-coefficient scenarios for one day.
    Scenarios(DayArgs),
    /// Optimize offers for one day or the whole test period.
    Optimize(OptimizeArgs),
    /// Expected profit against CVaR over a grid of risk weights.
    Frontier(FrontierArgs),
    /// Replay offers against the recorded market.
    Backtest(BacktestArgs),
    /// Fit, optimize every test day and replay.
    Pipeline(Common),
}

/// Settings shared by the pipeline commands. Flags override the file.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Reuse a posterior table instead of fitting.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Genco blocks, the zero-price renewable block included.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub competitor_blocks: Option<usize>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Risk weight: 0 maximizes expected profit, 1 maximizes CVaR.
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Allowed offer deviation as a fraction of cost.
    #[arg(long)]
    pub flexibility: Option<f64>,
    #[arg(long)]
    pub window_days: Option<u32>,
    #[arg(long)]
    pub price_cap: Option<f64>,
    #[arg(long)]
    pub train_start: Option<NaiveDate>,
    #[arg(long)]
    pub train_end: Option<NaiveDate>,
    #[arg(long)]
    pub test_start: Option<NaiveDate>,
    #[arg(long)]
    pub test_end: Option<NaiveDate>,
    #[arg(long)]
    pub test_days: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,
    /// Relative optimality gap.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Seconds per optimization.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone().into(); })*
            };
        }
        set!(curves, covariates, output, blocks, competitor_blocks, scenarios, seed, chi, alpha, flexibility);
        set!(window_days, price_cap, test_days, draws, burn_in, sampling, gap, time_limit, threads);
        macro_rules! set_opt {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { cfg.$field = self.$field; })*
            };
        }
        set_opt!(train_start, train_end, test_start, test_end);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for curves.csv, covariates.csv, truth.csv and genco.toml.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML market specification; defaults otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<usize>,
    /// Standard deviation of the price noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Test days written into genco.toml.
    #[arg(long, default_value_t = 30)]
    pub test_days: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OwnerChoice {
    Genco,
    Competitor,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Exact dynamic program.
    Dp,
    /// Mixed-integer program.
    Milp,
}

#[derive(Debug, Args)]
pub struct DiscretizeArgs {
    #[arg(long)]
    pub curves: PathBuf,
    /// Groups per curve (fewer when a curve has fewer bids).
    #[arg(long, default_value_t = 7)]
    pub blocks: usize,
    #[arg(long, value_enum, default_value_t = OwnerChoice::Both)]
    pub owner: OwnerChoice,
    #[arg(long, value_enum, default_value_t = Method::Dp)]
    pub method: Method,
    #[arg(long, default_value = "discretization.csv")]
    pub out: PathBuf,
    #[arg(long, default_value_t = genco_core::curves::DEFAULT_PRICE_CAP)]
    pub price_cap: f64,
}

#[derive(Debug, Args)]
pub struct DayArgs {
    #[arg(long)]
    pub date: NaiveDate,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Single day; the whole test period otherwise.
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[arg(long)]
    pub date: NaiveDate,
    /// `start:end:step` or a comma-separated list.
    #[arg(long, default_value = "0:1:0.1")]
    pub chi_grid: String,
    /// Restrict to hours `a:b` (half-open) of the day.
    #[arg(long)]
    pub hours: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Offers table from `optimize`.
    #[arg(long)]
    pub offers: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Discretize(a) => discretize_cmd(&a),
        Command::Fit(c) => {
            let cfg = c.resolve()?;
            let market = load_market(&cfg)?;
            let f = fit_stage(&cfg, &market, None)?;
            println!(
                "train rows {} MAE {:.3} RMSE {:.3}; noise sd {:.3}",
                f.train_rows, f.train.mae, f.train.rmse, f.posterior.noise_sd
            );
            Ok(())
        }
        Command::Scenarios(a) => scenarios_cmd(&a),
        Command::Optimize(a) => optimize_cmd(&a),
        Command::Frontier(a) => frontier_cmd(&a),
        Command::Backtest(a) => backtest_cmd(&a),
        Command::Pipeline(c) => {
            let cfg = c.resolve()?;
            let r = run_pipeline(&cfg, c.posterior.as_deref())?;
            print_backtest(&r);
            Ok(())
        }
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => toml::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SyntheticMarketSpec::default(),
    };
    if let Some(d) = a.days {
        spec.days = d;
    }
    if let Some(n) = a.noise {
        spec.price_noise = n;
    }
    let m = generate_synthetic(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let create = |name: &str| {
        let p = a.out.join(name);
        std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
    };
    write_curves(std::io::BufWriter::new(create("curves.csv")?), &m.curves)?;
    write_covariates(std::io::BufWriter::new(create("covariates.csv")?), &m.covariates)?;
    report::write_truth(&a.out.join(report::TRUTH), &m.truth)?;
    let cfg = PipelineConfig {
        test_days: a.test_days,
        blocks: spec.genco_blocks() + 1,
        ..Default::default()
    };
    std::fs::write(a.out.join("genco.toml"), cfg.to_toml())?;
    std::fs::write(a.out.join("market.toml"), toml::to_string(&spec)?)?;
    println!("{} hours written to {}", m.covariates.len(), a.out.display());
    Ok(())
}

fn discretize_cmd(a: &DiscretizeArgs) -> Result<()> {
    ensure!(a.blocks > 0, "blocks must be positive");
    let hours = ingest_curves(&a.curves, a.price_cap)?;
    let mut rows = Vec::new();
    for h in &hours {
        let sets: Vec<(&'static str, &Vec<genco_core::curves::OfferBlock>)> = match a.owner {
            OwnerChoice::Genco => vec![("genco", &h.genco)],
            OwnerChoice::Competitor => vec![("competitor", &h.competitors)],
            OwnerChoice::Both => vec![("genco", &h.genco), ("competitor", &h.competitors)],
        };
        for (owner, bids) in sets {
            if bids.is_empty() {
                continue;
            }
            let curve = SteppedSupplyCurve::from_steps(bids.iter().map(|b| b.step()).collect())?;
            let groups = a.blocks.min(curve.len());
            let r = match a.method {
                Method::Dp => discretize_dp(&curve, groups)?,
                Method::Milp => discretize(&curve, groups)?,
            };
            rows.push((h.timestamp, owner, r));
        }
    }
    report::write_discretization(&a.out, &rows)?;
    println!("{} curves discretized into {}", rows.len(), a.out.display());
    Ok(())
}

/// Fits (or loads) the posterior and writes the fit tables.
pub fn fit_stage(cfg: &PipelineConfig, market: &Market, posterior: Option<&Path>) -> Result<FitOutput> {
    let p = periods(cfg, market)?;
    let t = Instant::now();
    let mut f = fit(market, &p, cfg)?;
    if let Some(path) = posterior {
        let loaded = report::read_posterior(path)?;
        ensure!(loaded.names == f.spec.names, "{} does not match the feature layout", path.display());
        f.posterior = loaded;
    } else {
        info!("regression fitted in {:.1}s", t.elapsed().as_secs_f64());
        report::write_posterior(&cfg.output.join(report::POSTERIOR), &f.posterior)?;
        report::write_fit_metrics(&cfg.output.join(report::FIT_METRICS), &f)?;
    }
    Ok(f)
}

fn load_posterior_only(cfg: &PipelineConfig, market: &Market, path: Option<&Path>) -> Result<(FitOutputLite, Market)> {
    let spec = genco_core::regression::FeatureSpec::new(market.blocks);
    let posterior = match path {
        Some(p) => report::read_posterior(p)?,
        None => fit_stage(cfg, market, None)?.posterior,
    };
    ensure!(posterior.names == spec.names, "posterior does not match the feature layout");
    Ok((FitOutputLite { spec, posterior }, market.clone()))
}

struct FitOutputLite {
    spec: genco_core::regression::FeatureSpec,
    posterior: PosteriorSummary,
}

fn scenarios_cmd(a: &DayArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let market = load_market(&cfg)?;
    let (f, _) = load_posterior_only(&cfg, &market, a.common.posterior.as_deref())?;
    let set = generate(
        &f.posterior,
        market.blocks,
        24,
        cfg.scenarios,
        day_seed(cfg.seed, a.date),
        cfg.sampling.into(),
    )?;
    let path = cfg.output.join(report::SCENARIOS);
    report::write_scenarios(&path, a.date, &set)?;
    println!("{} scenarios for {} written to {}", set.scenarios, a.date, path.display());
    Ok(())
}

fn optimize_cmd(a: &OptimizeArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let market = load_market(&cfg)?;
    let f = fit_stage(&cfg, &market, a.common.posterior.as_deref())?;
    let dates = match a.date {
        Some(d) => vec![d],
        None => periods(&cfg, &market)?.test_days(),
    };
    let days = optimize_days(&market, &f, &dates, &cfg)?;
    report::write_offers(&cfg.output.join(report::OFFERS), &days)?;
    report::write_solutions(&cfg.output.join(report::SOLUTIONS), &days)?;
    report::write_scenario_profits(&cfg.output.join(report::SCENARIO_PROFITS), &days)?;
    let mean = days.iter().map(|d| d.solution.expected_profit).sum::<f64>() / days.len() as f64;
    println!("{} days optimized; mean expected profit {mean:.2}", days.len());
    Ok(())
}

fn parse_hours(s: &str) -> Result<std::ops::Range<usize>> {
    let (a, b) = s.split_once(':').context("hours must look like a:b")?;
    let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
    ensure!(a < b && b <= 24, "hours must satisfy a < b <= 24");
    Ok(a..b)
}

fn frontier_cmd(a: &FrontierArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let grid = parse_grid(&a.chi_grid)?;
    let market = load_market(&cfg)?;
    let (f, _) = load_posterior_only(&cfg, &market, a.common.posterior.as_deref())?;
    let inputs = market.inputs();
    let mut problem = day_problem(&market, &inputs, &f.spec, &f.posterior, a.date, &cfg)?;
    if let Some(h) = &a.hours {
        let r = parse_hours(h)?;
        let mut p = OfferingProblem::new(
            problem.exo.restrict_hours(r.clone()),
            problem.scenarios.restrict_hours(r),
            problem.chi,
            problem.alpha,
        )?;
        p.big_m = problem.big_m;
        problem = p;
    }
    let points = efficient_frontier(&problem, &grid, &solve_options(&cfg))?;
    let path = cfg.output.join(report::FRONTIER);
    report::write_frontier(&path, &points)?;
    println!("{} frontier points written to {}", points.len(), path.display());
    Ok(())
}

fn backtest_cmd(a: &BacktestArgs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let market = load_market(&cfg)?;
    let offers = report::read_offers(&a.offers)?;
    if offers.is_empty() {
        bail!("{} has no offers", a.offers.display());
    }
    let r = replay(&market, &offers, &cfg)?;
    report::write_backtest(&cfg.output, &r)?;
    print_backtest(&r);
    Ok(())
}

/// Fit, optimize every test day, replay, and write every table.
pub fn run_pipeline(cfg: &PipelineConfig, posterior: Option<&Path>) -> Result<BacktestReport> {
    let start = Instant::now();
    let market = load_market(cfg)?;
    info!("{} hours prepared in {:.1}s", market.hours.len(), start.elapsed().as_secs_f64());
    let f = fit_stage(cfg, &market, posterior)?;
    let dates = periods(cfg, &market)?.test_days();
    let days = optimize_days(&market, &f, &dates, cfg)?;
    report::write_offers(&cfg.output.join(report::OFFERS), &days)?;
    report::write_solutions(&cfg.output.join(report::SOLUTIONS), &days)?;
    report::write_scenario_profits(&cfg.output.join(report::SCENARIO_PROFITS), &days)?;
    let r = replay(&market, &strategy_offers(&days), cfg)?;
    report::write_backtest(&cfg.output, &r)?;
    std::fs::write(cfg.output.join("config_used.toml"), cfg.to_toml())?;
    info!("pipeline finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(r)
}

fn print_backtest(r: &BacktestReport) {
    println!("{:<10} {:>14} {:>14} {:>14} {:>10}", "series", "mean", "q1", "q3", "lambda");
    for (label, s, l) in [
        ("strategy", &r.strategy, r.mean_lambda),
        ("baseline", &r.baseline, r.baseline_mean_lambda),
    ] {
        println!("{label:<10} {:>14.2} {:>14.2} {:>14.2} {:>10.2}", s.mean, s.q1, s.q3, l);
    }
    println!(
        "{:<10} {:>14.2} {:>14.2} {:>14.2}",
        "increment", r.increment.mean, r.increment.q1, r.increment.q3
    );
}
