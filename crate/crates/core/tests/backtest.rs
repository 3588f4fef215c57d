use chrono::{Duration, NaiveDate};
use genco_core::backtest::{run_period, settle_hour, DayMarket, DayPlan, HourMarket, HourOffer, Stats};
use genco_core::curves::{aggregate, Owner, Step, SteppedSupplyCurve};
use genco_core::market::{apply_displacement, clear, DisplacementObservation, InelasticDemand};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 6, 1).unwrap()
}

fn random_market(rng: &mut ChaCha8Rng, date: NaiveDate) -> DayMarket {
    DayMarket {
        date,
        hours: (0..24)
            .map(|_| {
                let steps = (0..7)
                    .map(|k| Step::new(k as f64 * 12.0 + rng.gen_range(0.0..10.0), rng.gen_range(200.0..800.0), Owner::Competitor))
                    .collect();
                HourMarket {
                    competitors: SteppedSupplyCurve::from_steps(steps).unwrap(),
                    demand: rng.gen_range(1000.0..3000.0),
                }
            })
            .collect(),
    }
}

fn random_offers(rng: &mut ChaCha8Rng, markup: f64) -> (Vec<HourOffer>, Vec<HourOffer>) {
    (0..24)
        .map(|_| {
            let costs = vec![rng.gen_range(20.0..30.0), rng.gen_range(35.0..50.0)];
            let base = HourOffer::at_cost(rng.gen_range(0.0..300.0), vec![300.0, 400.0], costs);
            let strat = HourOffer {
                prices: base.costs.iter().map(|c| c * (1.0 + markup)).collect(),
                ..base.clone()
            };
            (strat, base)
        })
        .unzip()
}

fn history(rng: &mut ChaCha8Rng, from: NaiveDate, days: i64) -> Vec<DisplacementObservation> {
    (0..days * 24)
        .map(|h| DisplacementObservation {
            timestamp: from.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h),
            offered_quantity: 2000.0 + rng.gen_range(-100.0..300.0),
            realized_quantity: 2000.0,
        })
        .collect()
}

fn period(seed: u64) -> (Vec<DayPlan>, Vec<DayMarket>, Vec<DisplacementObservation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = 5;
    let hist = history(&mut rng, start() - Duration::days(20), 20 + days);
    let markets = (0..days).map(|d| random_market(&mut rng, start() + Duration::days(d))).collect();
    let plans = (0..days)
        .map(|d| {
            let (strategy, baseline) = random_offers(&mut rng, 0.1);
            DayPlan {
                date: start() + Duration::days(d),
                strategy,
                baseline,
            }
        })
        .collect();
    (plans, markets, hist)
}

#[test]
fn later_data_does_not_change_earlier_days() {
    let (plans, markets, hist) = period(1);
    let report = run_period(&plans, &markets, &hist, 14).unwrap();
    let cut = start() + Duration::days(2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hist2 = hist.clone();
    for o in hist2.iter_mut().filter(|o| o.timestamp.date() >= cut) {
        o.offered_quantity += rng.gen_range(-500.0..500.0);
    }
    let mut markets2 = markets.clone();
    for m in markets2.iter_mut().filter(|m| m.date > cut) {
        *m = random_market(&mut rng, m.date);
    }
    let again = run_period(&plans, &markets2, &hist2, 14).unwrap();
    for (a, b) in report.rows.iter().zip(&again.rows).filter(|(a, _)| a.date <= cut) {
        assert_eq!(a, b);
    }
}

#[test]
fn summary_matches_rows() {
    let (plans, markets, hist) = period(2);
    let r = run_period(&plans, &markets, &hist, 14).unwrap();
    let inc: Vec<f64> = r.rows.iter().map(|row| row.profit - row.baseline_profit).collect();
    assert_eq!(Stats::of(&inc), r.increment);
    let mut profits: Vec<f64> = r.rows.iter().map(|row| row.profit).collect();
    let n = profits.len() as f64;
    let mean = profits.iter().sum::<f64>() / n;
    assert!((r.strategy.mean - mean).abs() < 1e-9 * mean.abs());
    let var = profits.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((r.strategy.variance - var).abs() < 1e-9 * var);
    profits.sort_by(f64::total_cmp);
    // Five values: inclusive quartiles are the 2nd and 4th order statistics.
    assert_eq!(r.strategy.q1, profits[1]);
    assert_eq!(r.strategy.q3, profits[3]);
    let lam: Vec<f64> = r.rows.iter().flat_map(|row| row.lambda.clone()).collect();
    assert!((r.mean_lambda - lam.iter().sum::<f64>() / lam.len() as f64).abs() < 1e-9);
    for (row, h) in r.rows.iter().zip(0..) {
        let total: f64 = row.hourly_increment.iter().sum();
        assert!((total - inc[h]).abs() < 1e-6, "{total} vs {}", inc[h]);
    }
}

#[test]
fn identical_offers_give_zero_increments() {
    let (mut plans, markets, hist) = period(3);
    for p in &mut plans {
        p.strategy = p.baseline.clone();
    }
    let r = run_period(&plans, &markets, &hist, 14).unwrap();
    assert!(r.rows.iter().all(|row| row.increment == 0.0));
    assert_eq!(r.increment.variance, 0.0);
}

proptest! {
    #[test]
    fn price_is_the_clearing_engine_output(seed in 0u64..10_000, shift in -300.0f64..600.0, markup in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_market(&mut rng, start());
        let (strat, _) = random_offers(&mut rng, markup);
        let (offer, hour) = (&strat[0], &m.hours[0]);
        let out = settle_hour(offer, hour, shift).unwrap();
        let mut steps: Vec<Step> = (offer.renewable > 0.0).then(|| Step::new(0.0, offer.renewable, Owner::Genco)).into_iter().collect();
        steps.extend(offer.prices.iter().zip(&offer.quantities).map(|(&p, &q)| Step::new(p, q, Owner::Genco)));
        let genco = SteppedSupplyCurve::from_steps(steps).unwrap();
        let curve = aggregate(&[genco, hour.competitors.clone()]).unwrap();
        let expected = clear(&apply_displacement(&curve, shift).unwrap(), InelasticDemand::new(hour.demand).unwrap()).unwrap();
        prop_assert_eq!(out.price, expected.price);
        // Never dispatch more than offered, never settle below cost on accepted energy.
        let offered: f64 = offer.renewable + offer.quantities.iter().sum::<f64>();
        prop_assert!(out.genco_dispatched <= offered + 1e-6);
        prop_assert!(out.profit >= -1e-6);
    }
}
