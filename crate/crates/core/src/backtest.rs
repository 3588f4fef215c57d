//! Out-of-sample replay of offers against recorded competitor curves.
//!
//! Each hour the genco's offer curve (renewable energy at zero price plus
//! the priced blocks) is merged with the competitor curve, the hour's
//! displacement is applied and the market is cleared. Offers at cost on the
//! same data form the baseline.

use chrono::NaiveDate;
use thiserror::Error;

use crate::curves::{aggregate, Owner, Step, SteppedSupplyCurve};
use crate::market::{
    apply_displacement, clear, estimate_displacement, DisplacementObservation, DisplacementProfile, InelasticDemand,
    MarketError,
};
use crate::optimizer::OfferingSolution;
use crate::scenarios::ExogenousForecast;

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum BacktestError {
    #[error("{date} hour {hour}: {source}")]
    Market {
        date: NaiveDate,
        hour: usize,
        #[source]
        source: MarketError,
    },
    #[error("{date}: expected {HOURS_PER_DAY} hours, got {got}")]
    MissingHours { date: NaiveDate, got: usize },
    #[error("no market data for {0}")]
    MissingDay(NaiveDate),
    #[error("invalid offer at hour {hour}: {what}")]
    Offer { hour: usize, what: &'static str },
    #[error("empty period")]
    EmptyPeriod,
}

/// The genco's offer for one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct HourOffer {
    pub renewable: f64,
    pub prices: Vec<f64>,
    pub quantities: Vec<f64>,
    pub costs: Vec<f64>,
}

impl HourOffer {
    pub fn at_cost(renewable: f64, quantities: Vec<f64>, costs: Vec<f64>) -> Self {
        Self {
            renewable,
            prices: costs.clone(),
            quantities,
            costs,
        }
    }

    fn check(&self, hour: usize) -> Result<(), BacktestError> {
        let err = |what| Err(BacktestError::Offer { hour, what });
        if self.prices.len() != self.quantities.len() || self.costs.len() != self.quantities.len() {
            return err("block arrays differ in length");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !self.renewable.is_finite() || !finite(&self.prices) || !finite(&self.quantities) || !finite(&self.costs) {
            return err("non-finite value");
        }
        if self.renewable < 0.0 || self.quantities.iter().any(|&q| q < 0.0) {
            return err("negative quantity");
        }
        Ok(())
    }

    fn steps(&self) -> Vec<Step> {
        let mut steps = Vec::with_capacity(self.prices.len() + 1);
        if self.renewable > 0.0 {
            steps.push(Step::new(0.0, self.renewable, Owner::Genco));
        }
        for (&p, &q) in self.prices.iter().zip(&self.quantities) {
            if q > 0.0 {
                steps.push(Step::new(p, q, Owner::Genco));
            }
        }
        steps
    }
}

/// Hourly offers of an optimized day.
pub fn offers_from_solution(solution: &OfferingSolution, exo: &ExogenousForecast) -> Vec<HourOffer> {
    (0..exo.hours())
        .map(|t| HourOffer {
            renewable: exo.renewable[t],
            prices: solution.prices[t].clone(),
            quantities: exo.q_max[t].clone(),
            costs: exo.cost[t].clone(),
        })
        .collect()
}

/// Hourly offers at production cost.
pub fn baseline_offers(exo: &ExogenousForecast) -> Vec<HourOffer> {
    (0..exo.hours())
        .map(|t| HourOffer::at_cost(exo.renewable[t], exo.q_max[t].clone(), exo.cost[t].clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourMarket {
    pub competitors: SteppedSupplyCurve,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayMarket {
    pub date: NaiveDate,
    pub hours: Vec<HourMarket>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourOutcome {
    pub price: f64,
    pub genco_dispatched: f64,
    pub profit: f64,
}

/// Clears one hour and settles the genco's blocks.
///
/// The price comes from clearing the displaced curve. Displacing by `s`
/// is the same as clearing the undisplaced curve at demand `d + s`, which
/// is how the genco's dispatch is attributed: withdrawn supply is taken
/// from the cheap end, so infra-marginal genco blocks keep their energy.
/// Genco blocks offered exactly at the price share the genco part of the
/// marginal quantity in proportion to their size.
pub fn settle_hour(offer: &HourOffer, market: &HourMarket, shift: f64) -> Result<HourOutcome, MarketError> {
    let steps = offer.steps();
    let curve = if steps.is_empty() {
        market.competitors.clone()
    } else {
        let genco = SteppedSupplyCurve::from_steps(steps).expect("offer validated");
        aggregate(&[genco, market.competitors.clone()]).expect("non-empty curves")
    };
    let demand = InelasticDemand::new(market.demand)?;
    let price = clear(&apply_displacement(&curve, shift)?, demand)?.price;
    let effective = market.demand + shift;
    if effective <= 0.0 {
        return Ok(HourOutcome {
            price,
            genco_dispatched: 0.0,
            profit: 0.0,
        });
    }
    let genco_dispatched = clear(&curve, InelasticDemand::new(effective)?)?.genco_dispatched;

    let mut blocks: Vec<(f64, f64, f64)> = Vec::with_capacity(offer.prices.len() + 1);
    blocks.push((0.0, offer.renewable, 0.0));
    blocks.extend(
        offer
            .prices
            .iter()
            .zip(&offer.quantities)
            .zip(&offer.costs)
            .map(|((&p, &q), &c)| (p, q, c)),
    );
    let below: f64 = blocks.iter().filter(|b| b.0 < price).map(|b| b.1).sum();
    let at: f64 = blocks.iter().filter(|b| b.0 == price).map(|b| b.1).sum();
    let share = if at > 0.0 {
        ((genco_dispatched - below) / at).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let profit = blocks
        .iter()
        .map(|&(p, q, c)| {
            let dispatched = if p < price {
                q
            } else if p == price {
                share * q
            } else {
                0.0
            };
            dispatched * (price - c)
        })
        .sum();
    Ok(HourOutcome {
        price,
        genco_dispatched,
        profit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayOutcome {
    pub date: NaiveDate,
    pub hours: Vec<HourOutcome>,
    pub profit: f64,
}

/// Replays one day of offers.
pub fn run_day(
    offers: &[HourOffer],
    market: &DayMarket,
    displacement: &DisplacementProfile,
) -> Result<DayOutcome, BacktestError> {
    let date = market.date;
    if market.hours.len() != HOURS_PER_DAY {
        return Err(BacktestError::MissingHours {
            date,
            got: market.hours.len(),
        });
    }
    if offers.len() != HOURS_PER_DAY {
        return Err(BacktestError::Offer {
            hour: offers.len(),
            what: "one offer per hour required",
        });
    }
    let mut hours = Vec::with_capacity(HOURS_PER_DAY);
    for (h, (offer, hm)) in offers.iter().zip(&market.hours).enumerate() {
        offer.check(h)?;
        let outcome = settle_hour(offer, hm, displacement.at_hour(h as u32))
            .map_err(|source| BacktestError::Market { date, hour: h, source })?;
        hours.push(outcome);
    }
    let profit = hours.iter().map(|o| o.profit).sum();
    Ok(DayOutcome { date, hours, profit })
}

/// Offers for one test day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    pub date: NaiveDate,
    pub strategy: Vec<HourOffer>,
    pub baseline: Vec<HourOffer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayRow {
    pub date: NaiveDate,
    pub profit: f64,
    pub baseline_profit: f64,
    pub increment: f64,
    pub lambda: Vec<f64>,
    pub baseline_lambda: Vec<f64>,
    pub hourly_increment: Vec<f64>,
}

/// Mean, inclusive quartiles and sample variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub variance: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                q1: f64::NAN,
                q3: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            q1: quantile_inclusive(&sorted, 0.25),
            q3: quantile_inclusive(&sorted, 0.75),
            variance,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p * (n - 1)`.
pub fn quantile_inclusive(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub rows: Vec<DayRow>,
    pub strategy: Stats,
    pub baseline: Stats,
    pub increment: Stats,
    pub mean_lambda: f64,
    pub baseline_mean_lambda: f64,
}

impl BacktestReport {
    pub fn from_rows(rows: Vec<DayRow>) -> Self {
        let col = |f: fn(&DayRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let mean_of = |f: fn(&DayRow) -> &Vec<f64>| {
            let all: Vec<f64> = rows.iter().flat_map(|r| f(r).iter().copied()).collect();
            all.iter().sum::<f64>() / all.len() as f64
        };
        Self {
            strategy: Stats::of(&col(|r| r.profit)),
            baseline: Stats::of(&col(|r| r.baseline_profit)),
            increment: Stats::of(&col(|r| r.increment)),
            mean_lambda: mean_of(|r| &r.lambda),
            baseline_mean_lambda: mean_of(|r| &r.baseline_lambda),
            rows,
        }
    }

    /// Mean profit increment per hour of day across the period.
    pub fn hourly_mean_increment(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        (0..HOURS_PER_DAY)
            .map(|h| self.rows.iter().map(|r| r.hourly_increment[h]).sum::<f64>() / n)
            .collect()
    }
}

/// Replays every planned day. The displacement of each day is estimated
/// from `history` observations strictly before it.
pub fn run_period(
    plans: &[DayPlan],
    markets: &[DayMarket],
    history: &[DisplacementObservation],
    window_days: u32,
) -> Result<BacktestReport, BacktestError> {
    if plans.is_empty() {
        return Err(BacktestError::EmptyPeriod);
    }
    let mut rows = Vec::with_capacity(plans.len());
    for plan in plans {
        let market = markets
            .iter()
            .find(|m| m.date == plan.date)
            .ok_or(BacktestError::MissingDay(plan.date))?;
        let profile = estimate_displacement(history, plan.date, window_days).map_err(|source| {
            BacktestError::Market {
                date: plan.date,
                hour: match source {
                    MarketError::EmptyHour(h) => h as usize,
                    _ => 0,
                },
                source,
            }
        })?;
        rows.push(day_row(plan, market, &profile)?);
    }
    Ok(BacktestReport::from_rows(rows))
}

fn day_row(plan: &DayPlan, market: &DayMarket, profile: &DisplacementProfile) -> Result<DayRow, BacktestError> {
    let s = run_day(&plan.strategy, market, profile)?;
    let b = run_day(&plan.baseline, market, profile)?;
    Ok(DayRow {
        date: plan.date,
        profit: s.profit,
        baseline_profit: b.profit,
        increment: s.profit - b.profit,
        lambda: s.hours.iter().map(|o| o.price).collect(),
        baseline_lambda: b.hours.iter().map(|o| o.price).collect(),
        hourly_increment: s.hours.iter().zip(&b.hours).map(|(x, y)| x.profit - y.profit).collect(),
    })
}
