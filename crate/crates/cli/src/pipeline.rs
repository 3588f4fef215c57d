//! Stages shared by the commands: market preparation, regression fit,
//! daily offering problems and the out-of-sample replay.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, bail, ensure, Context, Result};
use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use genco_core::backtest::{
    offers_from_solution, run_period, BacktestReport, DayMarket, DayPlan, HourMarket, HourOffer,
};
use genco_core::curves::{aggregate, discretize_dp, Owner, Step, SteppedSupplyCurve};
use genco_core::market::DisplacementObservation;
use genco_core::optimizer::{optimize, OfferingProblem, OfferingSolution};
use genco_core::regression::{
    build_features, evaluate, feature_row, fit_gibbs_pruned, FeatureSpec, FitMetrics, GibbsConfig, HourlyInputs,
    PosteriorSummary, RegressionDataset, MAX_LAG,
};
use genco_core::scenarios::{compute_exogenous, generate};
use genco_milp::SolveOptions;
use log::{info, warn};

use crate::config::{resolve_periods, PipelineConfig, Periods, Sampling};
use crate::data::{CovariateRow, HourOffers};

/// One hour of prepared market data.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketHour {
    pub timestamp: NaiveDateTime,
    /// Genco zero-price quantity.
    pub renewable: f64,
    /// Discretized genco priced blocks: true costs and capacities.
    pub costs: Vec<f64>,
    pub capacities: Vec<f64>,
    /// Discretized competitor curve.
    pub competitors: SteppedSupplyCurve,
    pub covariates: CovariateRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub hours: Vec<MarketHour>,
    /// Genco priced blocks per hour.
    pub blocks: usize,
}

/// Genco zero-price quantity and the remaining priced curve.
pub fn split_genco(offers: &HourOffers) -> (f64, Vec<Step>) {
    let mut renewable = 0.0;
    let mut priced = Vec::new();
    for b in &offers.genco {
        if b.price <= 0.0 {
            renewable += b.quantity;
        } else {
            priced.push(b.step());
        }
    }
    (renewable, priced)
}

impl Market {
    /// Aligns curves with covariates and discretizes every hour: the genco
    /// into `priced_blocks` groups above its zero-price energy, competitors
    /// into at most `competitor_blocks` groups.
    pub fn prepare(
        curves: &[HourOffers],
        covariates: &[CovariateRow],
        priced_blocks: usize,
        competitor_blocks: usize,
    ) -> Result<Self> {
        ensure!(!curves.is_empty(), "no curve data");
        ensure!(
            curves.len() == covariates.len(),
            "curves cover {} hours, covariates {}",
            curves.len(),
            covariates.len()
        );
        ensure!(curves.len() % 24 == 0, "data must cover whole days");
        let start = curves[0].timestamp;
        ensure!(start.time().hour() == 0 && start.time().minute() == 0, "data must start at midnight");
        let mut hours = Vec::with_capacity(curves.len());
        for (t, (c, cov)) in curves.iter().zip(covariates).enumerate() {
            let expected = start + chrono::Duration::hours(t as i64);
            ensure!(
                c.timestamp == expected && cov.timestamp == expected,
                "hour {t}: expected {expected}, curves have {}, covariates {}",
                c.timestamp,
                cov.timestamp
            );
            let (renewable, priced) = split_genco(c);
            ensure!(
                priced.len() >= priced_blocks,
                "{expected}: genco has {} priced bids, need at least {priced_blocks}",
                priced.len()
            );
            let genco = discretize_dp(&SteppedSupplyCurve::from_steps(priced)?, priced_blocks)?;
            ensure!(!c.competitors.is_empty(), "{expected}: no competitor bids");
            let comp = SteppedSupplyCurve::from_steps(c.competitors.iter().map(|b| b.step()).collect())?;
            let groups = competitor_blocks.min(comp.len());
            let competitors = discretize_dp(&comp, groups)?.to_curve(Owner::Competitor);
            hours.push(MarketHour {
                timestamp: expected,
                renewable,
                costs: genco.prices,
                capacities: genco.quantities,
                competitors,
                covariates: *cov,
            });
        }
        Ok(Self {
            hours,
            blocks: priced_blocks,
        })
    }

    pub fn first_day(&self) -> NaiveDate {
        self.hours[0].timestamp.date()
    }

    pub fn last_day(&self) -> NaiveDate {
        self.hours[self.hours.len() - 1].timestamp.date()
    }

    /// Index of the first hour of `date`.
    pub fn day_start(&self, date: NaiveDate) -> Result<usize> {
        let d = (date - self.first_day()).num_days();
        ensure!(d >= 0 && date <= self.last_day(), "{date} is outside the data");
        Ok(d as usize * 24)
    }

    pub fn inputs(&self) -> HourlyInputs {
        HourlyInputs {
            timestamps: self.hours.iter().map(|h| h.timestamp).collect(),
            demand: self.hours.iter().map(|h| h.covariates.demand).collect(),
            wind: self.hours.iter().map(|h| h.covariates.wind).collect(),
            solar: self.hours.iter().map(|h| h.covariates.solar).collect(),
            price: self.hours.iter().map(|h| h.covariates.price).collect(),
            holiday: self.hours.iter().map(|h| h.covariates.holiday).collect(),
            renewable: self.hours.iter().map(|h| h.renewable).collect(),
            block_prices: self.hours.iter().map(|h| h.costs.clone()).collect(),
        }
    }

    pub fn day_market(&self, date: NaiveDate) -> Result<DayMarket> {
        let s = self.day_start(date)?;
        Ok(DayMarket {
            date,
            hours: self.hours[s..s + 24]
                .iter()
                .map(|h| HourMarket {
                    competitors: h.competitors.clone(),
                    demand: h.covariates.demand,
                })
                .collect(),
        })
    }

    pub fn baseline(&self, date: NaiveDate) -> Result<Vec<HourOffer>> {
        let s = self.day_start(date)?;
        Ok(self.hours[s..s + 24]
            .iter()
            .map(|h| HourOffer::at_cost(h.renewable, h.capacities.clone(), h.costs.clone()))
            .collect())
    }

    /// Observed displacement of every hour with a known price, measured on
    /// the discretized curve with the genco offering at cost.
    pub fn displacement_history(&self) -> Vec<DisplacementObservation> {
        self.hours
            .iter()
            .filter(|h| h.covariates.price.is_finite())
            .map(|h| {
                let mut steps = Vec::with_capacity(self.blocks + 1);
                if h.renewable > 0.0 {
                    steps.push(Step::new(0.0, h.renewable, Owner::Genco));
                }
                steps.extend(h.costs.iter().zip(&h.capacities).map(|(&p, &q)| Step::new(p, q, Owner::Genco)));
                let genco = SteppedSupplyCurve::from_steps(steps).expect("discretized blocks are valid");
                let curve = aggregate(&[genco, h.competitors.clone()]).expect("non-empty");
                DisplacementObservation::from_curve(h.timestamp, &curve, h.covariates.price, h.covariates.demand)
            })
            .collect()
    }
}

/// Loads both input files and prepares the market.
pub fn load_market(cfg: &PipelineConfig) -> Result<Market> {
    let curves = crate::data::ingest_curves(&cfg.curves, cfg.price_cap)
        .with_context(|| format!("reading {}", cfg.curves.display()))?;
    let covariates =
        crate::data::ingest_covariates(&cfg.covariates).with_context(|| format!("reading {}", cfg.covariates.display()))?;
    Market::prepare(&curves, &covariates, cfg.blocks - 1, cfg.competitor_blocks)
}

pub fn periods(cfg: &PipelineConfig, market: &Market) -> Result<Periods> {
    resolve_periods(cfg, market.first_day(), market.last_day())
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub spec: FeatureSpec,
    pub posterior: PosteriorSummary,
    pub dropped: Vec<String>,
    pub train: FitMetrics,
    pub train_rows: usize,
    pub test: Option<FitMetrics>,
    pub test_rows: usize,
}

fn rows_between(data: &RegressionDataset, range: (NaiveDate, NaiveDate)) -> Vec<usize> {
    (0..data.rows())
        .filter(|&i| {
            let d = data.timestamps[i].date();
            d >= range.0 && d <= range.1
        })
        .collect()
}

pub fn gibbs_config(cfg: &PipelineConfig) -> GibbsConfig {
    GibbsConfig {
        draws: cfg.draws,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        keep_draws: cfg.sampling == Sampling::Joint,
        ..Default::default()
    }
}

/// Fits the price response on the training period and scores it on the
/// test period.
pub fn fit(market: &Market, periods: &Periods, cfg: &PipelineConfig) -> Result<FitOutput> {
    let inputs = market.inputs();
    let data = build_features(&inputs)?;
    let train_idx = rows_between(&data, periods.train);
    ensure!(!train_idx.is_empty(), "no training rows with full lag history");
    let train = data.select(&train_idx);
    let (posterior, dropped) = fit_gibbs_pruned(&train, &gibbs_config(cfg))?;
    if !dropped.is_empty() {
        info!("constant predictors dropped: {}", dropped.join(", "));
    }
    let test_idx = rows_between(&data, periods.test);
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(evaluate(&posterior, &data.select(&test_idx))?)
    };
    Ok(FitOutput {
        spec: FeatureSpec::new(market.blocks),
        train: evaluate(&posterior, &train)?,
        train_rows: train_idx.len(),
        test,
        test_rows: test_idx.len(),
        posterior,
        dropped,
    })
}

/// Scenario seed of `date`: independent of which other days are solved.
pub fn day_seed(seed: u64, date: NaiveDate) -> u64 {
    seed.wrapping_add(date.num_days_from_ce() as u64)
}

/// Offering problem of one day: exogenous terms from the posterior means
/// and the day's covariates, block-coefficient scenarios from the posterior.
pub fn day_problem(
    market: &Market,
    inputs: &HourlyInputs,
    spec: &FeatureSpec,
    posterior: &PosteriorSummary,
    date: NaiveDate,
    cfg: &PipelineConfig,
) -> Result<OfferingProblem> {
    let s = market.day_start(date)?;
    ensure!(s >= MAX_LAG, "{date} lacks {MAX_LAG} hours of history");
    let rows: Vec<Vec<f64>> = (s..s + 24).map(|t| feature_row(inputs, t)).collect();
    if let Some(h) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        bail!("{date} hour {h}: lagged inputs missing");
    }
    let day = &market.hours[s..s + 24];
    let renewable: Vec<f64> = day.iter().map(|h| h.renewable).collect();
    let q_max: Vec<Vec<f64>> = day.iter().map(|h| h.capacities.clone()).collect();
    let cost: Vec<Vec<f64>> = day.iter().map(|h| h.costs.clone()).collect();
    let exo = compute_exogenous(posterior, spec, &rows, &renewable, &q_max, &cost, cfg.flexibility)?;
    let scenarios = generate(
        posterior,
        market.blocks,
        24,
        cfg.scenarios,
        day_seed(cfg.seed, date),
        cfg.sampling.into(),
    )?;
    let mut problem = OfferingProblem::new(exo, scenarios, cfg.chi, cfg.alpha)?;
    problem.big_m = cfg.price_cap;
    problem.validate()?;
    Ok(problem)
}

pub fn solve_options(cfg: &PipelineConfig) -> SolveOptions {
    SolveOptions::default()
        .with_gap(cfg.gap)
        .with_time_limit(Duration::from_secs_f64(cfg.time_limit))
}

#[derive(Debug, Clone)]
pub struct DayResult {
    pub date: NaiveDate,
    pub problem: OfferingProblem,
    pub solution: OfferingSolution,
}

fn thread_count(cfg: &PipelineConfig, jobs: usize) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = if cfg.threads == 0 { avail } else { cfg.threads };
    n.clamp(1, jobs.max(1))
}

/// Runs `job` for every index on a small thread pool, keeping input order.
pub fn parallel_map<T: Send>(n: usize, threads: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Builds and solves the offering problem of every date.
pub fn optimize_days(market: &Market, fit: &FitOutput, dates: &[NaiveDate], cfg: &PipelineConfig) -> Result<Vec<DayResult>> {
    let inputs = market.inputs();
    let opts = solve_options(cfg);
    parallel_map(dates.len(), thread_count(cfg, dates.len()), |i| {
        let date = dates[i];
        let problem = day_problem(market, &inputs, &fit.spec, &fit.posterior, date, cfg)?;
        let solution = optimize(&problem, &opts).with_context(|| format!("optimizing {date}"))?;
        if solution.gap > cfg.gap {
            warn!("{date}: stopped with status {:?}, gap {:.2e}", solution.status, solution.gap);
        }
        info!(
            "{date}: expected profit {:.0}, CVaR {:.0}, {} nodes, {:.1}s",
            solution.expected_profit,
            solution.cvar,
            solution.nodes,
            solution.elapsed.as_secs_f64()
        );
        Ok(DayResult {
            date,
            problem,
            solution,
        })
    })
}

/// Replays strategy offers per day against the recorded market, with
/// at-cost offers as the baseline.
pub fn replay(market: &Market, strategy: &[(NaiveDate, Vec<HourOffer>)], cfg: &PipelineConfig) -> Result<BacktestReport> {
    let mut plans = Vec::with_capacity(strategy.len());
    let mut markets = Vec::with_capacity(strategy.len());
    for (date, offers) in strategy {
        plans.push(DayPlan {
            date: *date,
            strategy: offers.clone(),
            baseline: market.baseline(*date)?,
        });
        markets.push(market.day_market(*date)?);
    }
    let history = market.displacement_history();
    run_period(&plans, &markets, &history, cfg.window_days).map_err(|e| anyhow!(e))
}

pub fn strategy_offers(days: &[DayResult]) -> Vec<(NaiveDate, Vec<HourOffer>)> {
    days.iter()
        .map(|d| (d.date, offers_from_solution(&d.solution, &d.problem.exo)))
        .collect()
}
