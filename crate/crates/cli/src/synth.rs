//! Synthetic day-ahead market with a known price response.
//!
//! Competitors bid in two cost bands, cheap and expensive, with a gap in
//! between that the genco's mid-merit units fill; the genco's peak units sit
//! above everything else. Demand is placed so that the genco is usually
//! marginal. The recorded price of each hour is an exact linear function of
//! the regression features plus Gaussian noise, so the fitted coefficients
//! can be checked against the truth.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use genco_core::curves::{OfferBlock, Owner, DEFAULT_PRICE_CAP};
use genco_core::regression::{feature_row, FeatureSpec, HourlyInputs, MAX_LAG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CovariateRow, HourOffers};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("market needs at least one competitor and one genco unit")]
    NoProducers,
    #[error("band `{0}` is empty or outside the price cap")]
    Band(&'static str),
    #[error("need at least {0} days")]
    TooShort(usize),
    #[error("`{0}` must be non-negative and finite")]
    Negative(&'static str),
    #[error("truth has {got} block coefficients, market has {expected} genco units")]
    TruthBlocks { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, p: f64) -> bool {
        (self.lo..=self.hi).contains(&p)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Centre of slot `j` of `n` equal slots.
    fn slot(&self, j: usize, n: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.width() / n as f64
    }
}

/// Ground-truth coefficients of the price response. Anything not listed
/// here is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceResponse {
    pub intercept: f64,
    pub renewable: f64,
    /// One per genco unit, cheapest first.
    pub blocks: Vec<f64>,
    pub demand: f64,
    pub wind: f64,
    pub solar: f64,
    pub price_lag24: f64,
    pub price_lag168: f64,
    pub saturday: f64,
    pub sunday: f64,
    pub holiday: f64,
}

impl Default for PriceResponse {
    fn default() -> Self {
        Self {
            intercept: -42.0,
            renewable: -0.005,
            blocks: vec![0.25, 0.25, 0.0, 0.0],
            demand: 0.005,
            wind: -0.005,
            solar: -0.005,
            price_lag24: 0.1,
            price_lag168: 0.05,
            saturday: -1.0,
            sunday: -2.0,
            holiday: -3.0,
        }
    }
}

impl PriceResponse {
    /// Intercept and one coefficient per feature of `spec`.
    pub fn coefficients(&self, spec: &FeatureSpec) -> (f64, Vec<f64>) {
        let coef = spec
            .names
            .iter()
            .map(|name| match name.as_str() {
                "renewable" => self.renewable,
                "demand" => self.demand,
                "wind" => self.wind,
                "solar" => self.solar,
                "price_lag24" => self.price_lag24,
                "price_lag168" => self.price_lag168,
                "dow_sat" => self.saturday,
                "dow_sun" => self.sunday,
                "holiday" => self.holiday,
                other => other
                    .strip_prefix("block_")
                    .and_then(|i| i.parse::<usize>().ok())
                    .and_then(|i| self.blocks.get(i - 1).copied())
                    .unwrap_or(0.0),
            })
            .collect();
        (self.intercept, coef)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarketSpec {
    pub start: NaiveDate,
    pub days: usize,
    pub cheap_competitors: usize,
    pub expensive_competitors: usize,
    pub cheap_band: Band,
    pub expensive_band: Band,
    /// Genco mid-merit units, the ones that set the price.
    pub genco_band: Band,
    pub genco_peak_band: Band,
    pub cheap_capacity: f64,
    pub expensive_capacity: f64,
    pub genco_units: usize,
    pub genco_unit_capacity: f64,
    pub genco_peak_units: usize,
    pub genco_peak_capacity: f64,
    /// Genco zero-price capacity.
    pub renewable_capacity: f64,
    pub wind_mean: f64,
    pub wind_sd: f64,
    pub solar_peak: f64,
    pub demand_base: f64,
    pub demand_amplitude: f64,
    pub weekend_drop: f64,
    pub demand_noise: f64,
    /// Daily standard deviation of the common fuel-cost shock.
    pub fuel_noise: f64,
    pub price_noise: f64,
    pub truth: PriceResponse,
}

impl Default for SyntheticMarketSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2018, 6, 1).expect("valid date"),
            days: 395,
            cheap_competitors: 6,
            expensive_competitors: 6,
            cheap_band: Band::new(0.0, 30.0),
            expensive_band: Band::new(75.0, 95.0),
            genco_band: Band::new(35.0, 65.0),
            genco_peak_band: Band::new(100.0, 125.0),
            cheap_capacity: 10000.0,
            expensive_capacity: 18000.0,
            genco_units: 2,
            genco_unit_capacity: 3000.0,
            genco_peak_units: 2,
            genco_peak_capacity: 1000.0,
            renewable_capacity: 3000.0,
            wind_mean: 5000.0,
            wind_sd: 1500.0,
            solar_peak: 3000.0,
            demand_base: 19500.0,
            demand_amplitude: 3000.0,
            weekend_drop: 1000.0,
            demand_noise: 500.0,
            fuel_noise: 1.0,
            price_noise: 1.5,
            truth: PriceResponse::default(),
        }
    }
}

impl SyntheticMarketSpec {
    pub fn genco_blocks(&self) -> usize {
        self.genco_units + self.genco_peak_units
    }

    pub fn bands(&self) -> [Band; 4] {
        [self.cheap_band, self.expensive_band, self.genco_band, self.genco_peak_band]
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.cheap_competitors + self.expensive_competitors == 0 || self.genco_units == 0 {
            return Err(SynthError::NoProducers);
        }
        let names = ["cheap_band", "expensive_band", "genco_band", "genco_peak_band"];
        for (band, name) in self.bands().iter().zip(names) {
            if !(band.lo >= 0.0 && band.lo < band.hi && band.hi <= DEFAULT_PRICE_CAP) {
                return Err(SynthError::Band(name));
            }
        }
        let min_days = MAX_LAG / 24 + 2;
        if self.days < min_days {
            return Err(SynthError::TooShort(min_days));
        }
        let non_negative = [
            ("cheap_capacity", self.cheap_capacity),
            ("expensive_capacity", self.expensive_capacity),
            ("genco_unit_capacity", self.genco_unit_capacity),
            ("genco_peak_capacity", self.genco_peak_capacity),
            ("renewable_capacity", self.renewable_capacity),
            ("wind_mean", self.wind_mean),
            ("wind_sd", self.wind_sd),
            ("solar_peak", self.solar_peak),
            ("demand_amplitude", self.demand_amplitude),
            ("demand_noise", self.demand_noise),
            ("fuel_noise", self.fuel_noise),
            ("price_noise", self.price_noise),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::Negative(name));
            }
        }
        if self.truth.blocks.len() > self.genco_blocks() {
            return Err(SynthError::TruthBlocks {
                expected: self.genco_blocks(),
                got: self.truth.blocks.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub curves: Vec<HourOffers>,
    pub covariates: Vec<CovariateRow>,
    pub truth: GroundTruth,
}

/// Fixed-date public holidays.
fn is_holiday(d: NaiveDate) -> bool {
    matches!(
        (d.month(), d.day()),
        (1, 1) | (1, 6) | (5, 1) | (8, 15) | (10, 12) | (11, 1) | (12, 6) | (12, 8) | (12, 25)
    )
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

struct HourDraw {
    timestamp: NaiveDateTime,
    renewable: f64,
    genco_costs: Vec<f64>,
    cheap_prices: Vec<f64>,
    cheap_quantities: Vec<f64>,
    expensive_prices: Vec<f64>,
    expensive_quantities: Vec<f64>,
}

pub fn generate_synthetic(spec: &SyntheticMarketSpec, seed: u64) -> Result<SyntheticMarket, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = spec.days * 24;
    let k = spec.genco_blocks();
    let start = spec.start.and_hms_opt(0, 0, 0).expect("midnight");

    let mut hours = Vec::with_capacity(n);
    let (mut demand, mut wind, mut solar, mut holiday) = (vec![], vec![], vec![], vec![]);
    let mut fuel = 0.0;
    let mut wind_state = 0.0;
    let mut avail_state = 0.0;
    let mut day_bids: (Vec<f64>, Vec<f64>) = (vec![], vec![]);
    let mut cloud = 1.0;
    let jitter = |rng: &mut ChaCha8Rng, band: &Band, n: usize| rng.gen_range(-0.3..0.3) * band.width() / n as f64;
    for t in 0..n {
        let timestamp = start + Duration::hours(t as i64);
        let date = timestamp.date();
        let h = (t % 24) as f64;
        if t % 24 == 0 {
            fuel = 0.8 * fuel + spec.fuel_noise * std_normal.sample(&mut rng);
            cloud = rng.gen_range(0.5..1.0);
            let cheap = (0..spec.cheap_competitors)
                .map(|j| spec.cheap_band.slot(j, spec.cheap_competitors) + jitter(&mut rng, &spec.cheap_band, spec.cheap_competitors))
                .collect();
            let expensive = (0..spec.expensive_competitors)
                .map(|j| {
                    spec.expensive_band.slot(j, spec.expensive_competitors)
                        + jitter(&mut rng, &spec.expensive_band, spec.expensive_competitors)
                })
                .collect();
            day_bids = (cheap, expensive);
        }
        let weekend = date.weekday().num_days_from_monday() >= 5;
        let hol = is_holiday(date);
        let shape = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * (h - 3.0) / 24.0).cos());
        let d = spec.demand_base - 0.5 * spec.demand_amplitude + spec.demand_amplitude * shape
            - if weekend || hol { spec.weekend_drop } else { 0.0 }
            + spec.demand_noise * std_normal.sample(&mut rng);
        wind_state = 0.9 * wind_state + (1.0f64 - 0.81).sqrt() * std_normal.sample(&mut rng);
        let w = (spec.wind_mean + spec.wind_sd * wind_state).max(0.05 * spec.wind_mean);
        let s = spec.solar_peak * cloud * (std::f64::consts::PI * (h - 6.0) / 14.0).sin().max(0.0);
        avail_state = 0.9 * avail_state + 0.1 * std_normal.sample(&mut rng);
        let avail = (0.45 + 0.2 * (2.0 * std::f64::consts::PI * h / 24.0).sin() + avail_state).clamp(0.05, 0.95);

        let unit_cost = |rng: &mut ChaCha8Rng, band: &Band, j: usize, m: usize| {
            let c = band.slot(j, m) + fuel + rng.gen_range(-0.2..0.2) * band.width() / m as f64;
            round_to(c.clamp(band.lo, band.hi), 2)
        };
        let mut genco_costs: Vec<f64> = (0..spec.genco_units)
            .map(|j| unit_cost(&mut rng, &spec.genco_band, j, spec.genco_units))
            .collect();
        genco_costs.extend((0..spec.genco_peak_units).map(|j| unit_cost(&mut rng, &spec.genco_peak_band, j, spec.genco_peak_units)));
        let share = |cap: f64, m: usize, rng: &mut ChaCha8Rng| round_to(cap / m as f64 * rng.gen_range(0.9..1.0), 1);
        let cheap_quantities = (0..spec.cheap_competitors)
            .map(|_| share(spec.cheap_capacity, spec.cheap_competitors, &mut rng))
            .collect();
        let expensive_quantities = (0..spec.expensive_competitors)
            .map(|_| share(spec.expensive_capacity, spec.expensive_competitors, &mut rng))
            .collect();
        hours.push(HourDraw {
            timestamp,
            renewable: round_to(spec.renewable_capacity * avail, 1),
            genco_costs,
            cheap_prices: day_bids.0.iter().map(|p| round_to(p.clamp(spec.cheap_band.lo, spec.cheap_band.hi), 2)).collect(),
            cheap_quantities,
            expensive_prices: day_bids
                .1
                .iter()
                .map(|p| round_to(p.clamp(spec.expensive_band.lo, spec.expensive_band.hi), 2))
                .collect(),
            expensive_quantities,
        });
        demand.push(round_to(d.max(1.0), 1));
        wind.push(round_to(w, 1));
        solar.push(round_to(s, 1));
        holiday.push(hol);
    }

    let fspec = FeatureSpec::new(k);
    let (intercept, coef) = spec.truth.coefficients(&fspec);
    let mut inputs = HourlyInputs {
        timestamps: hours.iter().map(|h| h.timestamp).collect(),
        demand,
        wind,
        solar,
        price: vec![f64::NAN; n],
        holiday,
        renewable: hours.iter().map(|h| h.renewable).collect(),
        block_prices: hours.iter().map(|h| h.genco_costs.clone()).collect(),
    };
    // Warm-up hours have no full lag history; they only seed the lags.
    let warm = 0.5 * (spec.genco_band.lo + spec.genco_band.hi);
    let noise = |rng: &mut ChaCha8Rng| spec.price_noise * std_normal.sample(rng);
    for t in 0..n {
        let p = if t < MAX_LAG {
            warm + noise(&mut rng)
        } else {
            let row = feature_row(&inputs, t);
            intercept + row.iter().zip(&coef).map(|(x, b)| x * b).sum::<f64>() + noise(&mut rng)
        };
        inputs.price[t] = p;
    }

    let curves = hours
        .iter()
        .map(|h| {
            let mut offers = HourOffers::new(h.timestamp);
            let mut push = |owner, unit: String, price: f64, quantity: f64| {
                if quantity > 0.0 {
                    offers.push(
                        OfferBlock::new(h.timestamp, owner, unit, price, quantity, DEFAULT_PRICE_CAP)
                            .expect("generated bids are valid"),
                    );
                }
            };
            push(Owner::Genco, "G_REN".into(), 0.0, h.renewable);
            for (j, &c) in h.genco_costs.iter().enumerate() {
                let (unit, cap) = if j < spec.genco_units {
                    (format!("G_MID{}", j + 1), spec.genco_unit_capacity)
                } else {
                    (format!("G_PEAK{}", j + 1 - spec.genco_units), spec.genco_peak_capacity)
                };
                push(Owner::Genco, unit, c, cap);
            }
            let t = (h.timestamp - start).num_hours() as usize;
            push(Owner::Competitor, "C_WIND".into(), 0.0, inputs.wind[t]);
            push(Owner::Competitor, "C_SOLAR".into(), 0.0, inputs.solar[t]);
            for (j, (&p, &q)) in h.cheap_prices.iter().zip(&h.cheap_quantities).enumerate() {
                push(Owner::Competitor, format!("C_BASE{}", j + 1), p, q);
            }
            for (j, (&p, &q)) in h.expensive_prices.iter().zip(&h.expensive_quantities).enumerate() {
                push(Owner::Competitor, format!("C_PEAK{}", j + 1), p, q);
            }
            offers
        })
        .collect();
    let covariates = (0..n)
        .map(|t| CovariateRow {
            timestamp: inputs.timestamps[t],
            demand: inputs.demand[t],
            wind: inputs.wind[t],
            solar: inputs.solar[t],
            price: inputs.price[t],
            holiday: inputs.holiday[t],
        })
        .collect();
    Ok(SyntheticMarket {
        curves,
        covariates,
        truth: GroundTruth {
            names: fspec.names,
            intercept,
            coefficients: coef,
            noise_sd: spec.price_noise,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_producers_rejected() {
        let spec = SyntheticMarketSpec {
            cheap_competitors: 0,
            expensive_competitors: 0,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 1), Err(SynthError::NoProducers));
        let spec = SyntheticMarketSpec {
            genco_units: 0,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 1), Err(SynthError::NoProducers));
    }

    #[test]
    fn short_or_banded_specs_rejected() {
        let spec = SyntheticMarketSpec {
            days: 3,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&spec, 1), Err(SynthError::TooShort(_))));
        let spec = SyntheticMarketSpec {
            cheap_band: Band::new(30.0, 10.0),
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 1), Err(SynthError::Band("cheap_band")));
    }

    #[test]
    fn truth_names_cover_features() {
        let spec = SyntheticMarketSpec::default();
        let (_, coef) = spec.truth.coefficients(&FeatureSpec::new(spec.genco_blocks()));
        assert_eq!(coef.len(), FeatureSpec::new(4).len());
        assert_eq!(coef[1], 0.25);
        assert_eq!(coef[4], 0.0);
    }
}
