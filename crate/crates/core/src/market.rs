//! Uniform-price clearing of an aggregated supply curve against an
//! inelastic demand, and the horizontal displacement that proxies the
//! system operator's technical adjustments.
//!
//! Sign convention: a positive shift withdraws supply from the cheap end of
//! the curve, which moves it left and raises the price.

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use thiserror::Error;

use crate::curves::{Owner, Step, SteppedSupplyCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("demand {demand} MWh exceeds total supply {supply} MWh")]
    Scarcity { demand: f64, supply: f64 },
    #[error("demand must be positive and finite, got {0}")]
    InvalidDemand(f64),
    #[error("demand {demand} MWh above system ceiling {ceiling} MWh")]
    AboveCeiling { demand: f64, ceiling: f64 },
    #[error("shift {shift} MWh would withdraw the whole supply of {supply} MWh")]
    ShiftTooLarge { shift: f64, supply: f64 },
    #[error("shift must be finite")]
    NonFiniteShift,
    #[error("no displacement observation for hour {0} in the window")]
    EmptyHour(u32),
    #[error("window must cover at least one day")]
    EmptyWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InelasticDemand {
    pub quantity: f64,
    pub timestamp: Option<NaiveDateTime>,
}

impl InelasticDemand {
    pub fn new(quantity: f64) -> Result<Self, MarketError> {
        if !(quantity.is_finite() && quantity > 0.0) {
            return Err(MarketError::InvalidDemand(quantity));
        }
        Ok(Self {
            quantity,
            timestamp: None,
        })
    }

    pub fn at(quantity: f64, timestamp: NaiveDateTime) -> Result<Self, MarketError> {
        Ok(Self {
            timestamp: Some(timestamp),
            ..Self::new(quantity)?
        })
    }

    pub fn with_ceiling(self, ceiling: f64) -> Result<Self, MarketError> {
        if self.quantity > ceiling {
            return Err(MarketError::AboveCeiling {
                demand: self.quantity,
                ceiling,
            });
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    /// Marginal price, EUR/MWh.
    pub price: f64,
    /// Total dispatched energy, MWh.
    pub dispatched: f64,
    /// Index of the marginal step in the cleared curve.
    pub marginal_index: usize,
    pub marginal_owner: Owner,
    /// Energy taken from the marginal step.
    pub marginal_dispatched: f64,
    pub genco_dispatched: f64,
    pub competitor_dispatched: f64,
}

fn result_at(curve: &SteppedSupplyCurve, k: usize, demand: f64) -> ClearingResult {
    let steps = curve.steps();
    let before = if k == 0 { 0.0 } else { curve.cumulative()[k - 1] };
    let marginal = demand - before;
    let (mut genco, mut competitor) = (0.0, 0.0);
    for (j, s) in steps[..=k].iter().enumerate() {
        let q = if j == k { marginal } else { s.quantity };
        match s.owner {
            Owner::Genco => genco += q,
            Owner::Competitor => competitor += q,
        }
    }
    ClearingResult {
        price: steps[k].price,
        dispatched: demand,
        marginal_index: k,
        marginal_owner: steps[k].owner,
        marginal_dispatched: marginal,
        genco_dispatched: genco,
        competitor_dispatched: competitor,
    }
}

/// Clears the curve: the first step whose cumulative quantity reaches the
/// demand is marginal and sets the price. A demand landing exactly on a
/// step edge is completed by the step ending there.
pub fn clear(curve: &SteppedSupplyCurve, demand: InelasticDemand) -> Result<ClearingResult, MarketError> {
    let d = demand.quantity;
    let cumulative = curve.cumulative();
    let k = cumulative.partition_point(|&c| c < d);
    if k == cumulative.len() {
        return Err(MarketError::Scarcity {
            demand: d,
            supply: curve.total_quantity(),
        });
    }
    Ok(result_at(curve, k, d))
}

/// Same rule as [`clear`] by a linear walk along the curve.
pub fn clear_linear_scan(curve: &SteppedSupplyCurve, demand: InelasticDemand) -> Result<ClearingResult, MarketError> {
    let d = demand.quantity;
    for (k, &c) in curve.cumulative().iter().enumerate() {
        if c >= d {
            return Ok(result_at(curve, k, d));
        }
    }
    Err(MarketError::Scarcity {
        demand: d,
        supply: curve.total_quantity(),
    })
}

/// Moves the curve left by `shift` MWh, withdrawing quantity from its
/// cheapest steps. A negative shift enlarges the first step. Prices are
/// untouched.
pub fn apply_displacement(curve: &SteppedSupplyCurve, shift: f64) -> Result<SteppedSupplyCurve, MarketError> {
    if !shift.is_finite() {
        return Err(MarketError::NonFiniteShift);
    }
    let total = curve.total_quantity();
    if shift >= total {
        return Err(MarketError::ShiftTooLarge { shift, supply: total });
    }
    let mut steps: Vec<Step> = curve.steps().to_vec();
    if shift < 0.0 {
        steps[0].quantity -= shift;
    } else {
        let mut left = shift;
        let mut first = 0;
        while first < steps.len() && left > 0.0 && left >= steps[first].quantity {
            left -= steps[first].quantity;
            first += 1;
        }
        steps.drain(..first);
        if let Some(s) = steps.first_mut() {
            s.quantity -= left;
            if s.quantity <= 0.0 {
                steps.remove(0);
            }
        }
        if steps.is_empty() {
            return Err(MarketError::ShiftTooLarge { shift, supply: total });
        }
    }
    Ok(SteppedSupplyCurve::from_steps(steps).expect("remaining steps are valid"))
}

/// One past hour: where the offered curve reaches the realized price versus
/// the energy actually matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementObservation {
    pub timestamp: NaiveDateTime,
    pub offered_quantity: f64,
    pub realized_quantity: f64,
}

impl DisplacementObservation {
    pub fn from_curve(timestamp: NaiveDateTime, curve: &SteppedSupplyCurve, realized_price: f64, demand: f64) -> Self {
        Self {
            timestamp,
            offered_quantity: curve.quantity_at_price(realized_price),
            realized_quantity: demand,
        }
    }

    pub fn shift(&self) -> f64 {
        self.offered_quantity - self.realized_quantity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementProfile {
    pub shifts: [f64; 24],
    pub window_days: u32,
}

impl DisplacementProfile {
    pub fn zero(window_days: u32) -> Self {
        Self {
            shifts: [0.0; 24],
            window_days,
        }
    }

    pub fn at_hour(&self, hour: u32) -> f64 {
        self.shifts[hour as usize]
    }
}

/// Mean shift per hour of day over the `window_days` days strictly before
/// `day`. Observations on or after `day` are ignored.
pub fn estimate_displacement(
    history: &[DisplacementObservation],
    day: NaiveDate,
    window_days: u32,
) -> Result<DisplacementProfile, MarketError> {
    if window_days == 0 {
        return Err(MarketError::EmptyWindow);
    }
    let start = day - Duration::days(window_days as i64);
    let mut sum = [0.0; 24];
    let mut count = [0usize; 24];
    for obs in history {
        let d = obs.timestamp.date();
        if d < start || d >= day {
            continue;
        }
        let h = obs.timestamp.hour() as usize;
        sum[h] += obs.shift();
        count[h] += 1;
    }
    let mut shifts = [0.0; 24];
    for h in 0..24 {
        if count[h] == 0 {
            return Err(MarketError::EmptyHour(h as u32));
        }
        shifts[h] = sum[h] / count[h] as f64;
    }
    Ok(DisplacementProfile { shifts, window_days })
}

/// Aggregated curve of a small discretized market: genco blocks marked
/// `G`, competitors `C`. Demand of 24000 MWh clears at 42 EUR/MWh on a
/// genco block.
pub fn marginal_price_example() -> SteppedSupplyCurve {
    use Owner::{Competitor as C, Genco as G};
    let blocks = [
        (0.0, 6000.0, C),
        (0.0, 2500.0, G),
        (5.0, 3000.0, C),
        (18.0, 1500.0, G),
        (25.0, 2500.0, C),
        (31.0, 1200.0, G),
        (36.0, 2800.0, C),
        (39.0, 1000.0, G),
        (42.0, 4000.0, G),
        (48.0, 2600.0, C),
        (55.0, 1500.0, G),
        (63.0, 3000.0, C),
        (75.0, 900.0, G),
        (95.0, 2500.0, C),
    ];
    let steps = blocks.iter().map(|&(p, q, o)| Step::new(p, q, o)).collect();
    SteppedSupplyCurve::from_steps(steps).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(blocks: &[(f64, f64)]) -> SteppedSupplyCurve {
        SteppedSupplyCurve::from_steps(blocks.iter().map(|&(p, q)| Step::new(p, q, Owner::Competitor)).collect())
            .unwrap()
    }

    fn demand(q: f64) -> InelasticDemand {
        InelasticDemand::new(q).unwrap()
    }

    #[test]
    fn interior_demand() {
        let c = curve(&[(30.0, 5.0), (40.0, 10.0)]);
        let r = clear(&c, demand(10.0)).unwrap();
        assert_eq!(r.price, 40.0);
        assert_eq!(r.dispatched, 10.0);
        assert_eq!(r.marginal_dispatched, 5.0);
    }

    #[test]
    fn step_edge_is_completed_by_its_block() {
        let c = curve(&[(30.0, 5.0), (40.0, 10.0)]);
        assert_eq!(clear(&c, demand(15.0)).unwrap().price, 40.0);
        assert_eq!(clear(&c, demand(5.0)).unwrap().price, 30.0);
    }

    #[test]
    fn scarcity_reports_supply() {
        let c = curve(&[(30.0, 5.0), (40.0, 10.0)]);
        assert_eq!(
            clear(&c, demand(16.0)),
            Err(MarketError::Scarcity {
                demand: 16.0,
                supply: 15.0
            })
        );
    }

    #[test]
    fn example_market_clears_on_genco_block() {
        let r = clear(&marginal_price_example(), demand(24000.0)).unwrap();
        assert_eq!(r.price, 42.0);
        assert_eq!(r.marginal_owner, Owner::Genco);
        assert!((r.genco_dispatched + r.competitor_dispatched - 24000.0).abs() < 1e-9);
    }

    #[test]
    fn displacement_translates_cumulative() {
        let c = curve(&[(30.0, 5.0), (40.0, 10.0)]);
        assert_eq!(apply_displacement(&c, 0.0).unwrap(), c);
        assert_eq!(apply_displacement(&c, 3.0).unwrap().cumulative(), &[2.0, 12.0]);
        assert_eq!(apply_displacement(&c, 5.0).unwrap().cumulative(), &[10.0]);
        assert_eq!(apply_displacement(&c, -2.0).unwrap().cumulative(), &[7.0, 17.0]);
        assert!(apply_displacement(&c, 15.0).is_err());
    }

    #[test]
    fn invalid_demand_rejected() {
        assert!(InelasticDemand::new(0.0).is_err());
        assert!(InelasticDemand::new(f64::NAN).is_err());
        assert!(demand(10.0).with_ceiling(5.0).is_err());
    }

    fn ts(day: u32, hour: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2019, 6, day).unwrap().and_hms_opt(hour, 0, 0).unwrap()
    }

    #[test]
    fn constant_injected_shift_recovered() {
        let history: Vec<_> = (1..=20)
            .flat_map(|d| {
                (0..24).map(move |h| DisplacementObservation {
                    timestamp: ts(d, h),
                    offered_quantity: 1000.0 + h as f64 + 500.0,
                    realized_quantity: 1000.0 + h as f64,
                })
            })
            .collect();
        let p = estimate_displacement(&history, ts(21, 0).date(), 60).unwrap();
        assert!(p.shifts.iter().all(|&s| (s - 500.0).abs() < 1e-12));
    }

    #[test]
    fn identical_outcomes_give_zero_shift() {
        let history: Vec<_> = (0..24)
            .map(|h| DisplacementObservation {
                timestamp: ts(1, h),
                offered_quantity: 10.0,
                realized_quantity: 10.0,
            })
            .collect();
        let p = estimate_displacement(&history, ts(2, 0).date(), 60).unwrap();
        assert_eq!(p.shifts, [0.0; 24]);
    }

    #[test]
    fn window_excludes_target_day_and_missing_hour_named() {
        let mut history: Vec<_> = (0..24)
            .map(|h| DisplacementObservation {
                timestamp: ts(1, h),
                offered_quantity: 10.0,
                realized_quantity: 10.0,
            })
            .collect();
        history.push(DisplacementObservation {
            timestamp: ts(2, 3),
            offered_quantity: 1e6,
            realized_quantity: 0.0,
        });
        let p = estimate_displacement(&history, ts(2, 0).date(), 60).unwrap();
        assert_eq!(p.at_hour(3), 0.0);
        history.retain(|o| o.timestamp.hour() != 7);
        assert_eq!(
            estimate_displacement(&history, ts(2, 0).date(), 60),
            Err(MarketError::EmptyHour(7))
        );
    }
}
