//! Output tables. Every file is a CSV with a header row; plot series are
//! plain tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use chrono::NaiveDate;
use genco_core::backtest::{BacktestReport, HourOffer, Stats};
use genco_core::curves::DiscretizationResult;
use genco_core::optimizer::FrontierPoint;
use genco_core::regression::PosteriorSummary;
use genco_core::scenarios::ScenarioSet;

use crate::data::{field_number, format_number as num, format_timestamp, read_table, write_table};
use crate::pipeline::{DayResult, FitOutput};
use crate::synth::GroundTruth;

pub const POSTERIOR: &str = "posterior.csv";
pub const FIT_METRICS: &str = "fit_metrics.csv";
pub const OFFERS: &str = "offers.csv";
pub const SOLUTIONS: &str = "solution_summary.csv";
pub const SCENARIO_PROFITS: &str = "scenario_profits.csv";
pub const SCENARIOS: &str = "scenarios.csv";
pub const FRONTIER: &str = "frontier.csv";
pub const BACKTEST_SUMMARY: &str = "backtest_summary.csv";
pub const BACKTEST_DAYS: &str = "backtest_days.csv";
pub const BACKTEST_HOURS: &str = "backtest_hours.csv";
pub const BACKTEST_HOURLY: &str = "backtest_hourly.csv";
pub const TRUTH: &str = "truth.csv";
pub const DISCRETIZATION: &str = "discretization.csv";

const POSTERIOR_HEADER: [&str; 5] = ["name", "mean", "sd", "std_mean", "std_sd"];
const OFFERS_HEADER: [&str; 7] = [
    "timestamp",
    "renewable_mwh",
    "block",
    "quantity_mwh",
    "cost_eur_mwh",
    "offer_eur_mwh",
    "flexibility_eur_mwh",
];

fn text(v: impl ToString) -> String {
    v.to_string()
}

pub fn write_posterior(path: &Path, p: &PosteriorSummary) -> Result<()> {
    let mut rows = vec![vec![
        "intercept".into(),
        num(p.mean[0]),
        num(p.sd[0]),
        num(p.std_mean[0]),
        num(p.std_sd[0]),
    ]];
    for (j, name) in p.names.iter().enumerate() {
        rows.push(vec![
            name.clone(),
            num(p.mean[j + 1]),
            num(p.sd[j + 1]),
            num(p.std_mean[j + 1]),
            num(p.std_sd[j + 1]),
        ]);
    }
    rows.push(vec!["noise_sd".into(), num(p.noise_sd), String::new(), String::new(), String::new()]);
    rows.push(vec![
        "draws".into(),
        text(p.draws),
        String::new(),
        String::new(),
        text(p.burn_in),
    ]);
    write_table(path, &POSTERIOR_HEADER, rows)?;
    Ok(())
}

/// Reads a posterior written by [`write_posterior`] (without draws).
pub fn read_posterior(path: &Path) -> Result<PosteriorSummary> {
    let rows = read_table(path, &POSTERIOR_HEADER).with_context(|| format!("reading {}", path.display()))?;
    let mut s = PosteriorSummary {
        names: Vec::new(),
        mean: Vec::new(),
        sd: Vec::new(),
        std_mean: Vec::new(),
        std_sd: Vec::new(),
        noise_sd: f64::NAN,
        draws: 0,
        burn_in: 0,
        draw_matrix: None,
    };
    for r in &rows {
        match &r[0] {
            "noise_sd" => s.noise_sd = field_number(r, 1)?,
            "draws" => {
                s.draws = field_number(r, 1)? as usize;
                s.burn_in = field_number(r, 4)? as usize;
            }
            name => {
                if name != "intercept" {
                    s.names.push(name.to_string());
                }
                s.mean.push(field_number(r, 1)?);
                s.sd.push(field_number(r, 2)?);
                s.std_mean.push(field_number(r, 3)?);
                s.std_sd.push(field_number(r, 4)?);
            }
        }
    }
    ensure!(
        s.mean.len() == s.names.len() + 1 && rows.first().is_some_and(|r| &r[0] == "intercept"),
        "{}: first row must be the intercept",
        path.display()
    );
    Ok(s)
}

pub fn write_fit_metrics(path: &Path, fit: &FitOutput) -> Result<()> {
    let mut rows = vec![vec![
        "train".into(),
        text(fit.train_rows),
        num(fit.train.mae),
        num(fit.train.rmse),
    ]];
    if let Some(t) = &fit.test {
        rows.push(vec!["test".into(), text(fit.test_rows), num(t.mae), num(t.rmse)]);
    }
    for name in &fit.dropped {
        rows.push(vec![format!("dropped:{name}"), String::new(), String::new(), String::new()]);
    }
    write_table(path, &["split", "rows", "mae", "rmse"], rows)?;
    Ok(())
}

pub fn write_truth(path: &Path, t: &GroundTruth) -> Result<()> {
    let mut rows = vec![vec!["intercept".into(), num(t.intercept)]];
    rows.extend(t.names.iter().zip(&t.coefficients).map(|(n, c)| vec![n.clone(), num(*c)]));
    rows.push(vec!["noise_sd".into(), num(t.noise_sd)]);
    write_table(path, &["name", "coefficient"], rows)?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let rows = read_table(path, &["name", "coefficient"])?;
    let mut t = GroundTruth {
        names: Vec::new(),
        intercept: f64::NAN,
        coefficients: Vec::new(),
        noise_sd: f64::NAN,
    };
    for r in &rows {
        let v = field_number(r, 1)?;
        match &r[0] {
            "intercept" => t.intercept = v,
            "noise_sd" => t.noise_sd = v,
            name => {
                t.names.push(name.to_string());
                t.coefficients.push(v);
            }
        }
    }
    Ok(t)
}

pub fn write_offers(path: &Path, days: &[DayResult]) -> Result<()> {
    let mut rows = Vec::new();
    for d in days {
        let exo = &d.problem.exo;
        let start = d.date.and_hms_opt(0, 0, 0).expect("midnight");
        for t in 0..exo.hours() {
            let ts = format_timestamp(start + chrono::Duration::hours(t as i64));
            for i in 0..exo.blocks() {
                rows.push(vec![
                    ts.clone(),
                    num(exo.renewable[t]),
                    text(i + 1),
                    num(exo.q_max[t][i]),
                    num(exo.cost[t][i]),
                    num(d.solution.prices[t][i]),
                    num(exo.sigma[t][i]),
                ]);
            }
        }
    }
    write_table(path, &OFFERS_HEADER, rows)?;
    Ok(())
}

/// Reads offers back into per-day, per-hour offers.
pub fn read_offers(path: &Path) -> Result<Vec<(NaiveDate, Vec<HourOffer>)>> {
    let rows = read_table(path, &OFFERS_HEADER).with_context(|| format!("reading {}", path.display()))?;
    let mut by_hour: BTreeMap<chrono::NaiveDateTime, HourOffer> = BTreeMap::new();
    for r in &rows {
        let ts = crate::data::parse_timestamp(&r[0]).with_context(|| format!("bad timestamp `{}`", &r[0]))?;
        let block = field_number(r, 2)? as usize;
        let h = by_hour.entry(ts).or_insert_with(|| HourOffer {
            renewable: 0.0,
            prices: Vec::new(),
            quantities: Vec::new(),
            costs: Vec::new(),
        });
        ensure!(block == h.prices.len() + 1, "{ts}: blocks must be listed in order");
        h.renewable = field_number(r, 1)?;
        h.quantities.push(field_number(r, 3)?);
        h.costs.push(field_number(r, 4)?);
        h.prices.push(field_number(r, 5)?);
    }
    let mut days: BTreeMap<NaiveDate, Vec<HourOffer>> = BTreeMap::new();
    for (ts, offer) in by_hour {
        days.entry(ts.date()).or_default().push(offer);
    }
    for (date, hours) in &days {
        ensure!(hours.len() == 24, "{date}: offers for {} hours, need 24", hours.len());
    }
    Ok(days.into_iter().collect())
}

pub fn write_solutions(path: &Path, days: &[DayResult]) -> Result<()> {
    let blocks = days.first().map_or(0, |d| d.problem.blocks());
    let mut header: Vec<String> = [
        "date",
        "status",
        "gap",
        "objective",
        "expected_profit",
        "cvar",
        "mean_lambda",
        "mean_dispatch_mwh",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=blocks).map(|i| format!("mean_offer_{i}")));
    let rows = days.iter().map(|d| {
        let s = &d.solution;
        let pi = &d.problem.scenarios.probabilities;
        let mut row = vec![
            d.date.to_string(),
            format!("{:?}", s.status),
            num(s.gap),
            num(s.objective),
            num(s.expected_profit),
            num(s.cvar),
            num(s.mean_price(pi)),
            num(s.mean_dispatch(pi, &d.problem.exo.renewable)),
        ];
        row.extend((0..blocks).map(|i| num(s.mean_offer(i))));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, rows)?;
    Ok(())
}

pub fn write_scenario_profits(path: &Path, days: &[DayResult]) -> Result<()> {
    let rows = days.iter().flat_map(|d| {
        d.solution.profits.iter().enumerate().map(move |(w, p)| {
            vec![
                d.date.to_string(),
                text(w),
                num(d.problem.scenarios.probabilities[w]),
                num(*p),
            ]
        })
    });
    write_table(path, &["date", "scenario", "probability", "profit"], rows)?;
    Ok(())
}

pub fn write_scenarios(path: &Path, date: NaiveDate, set: &ScenarioSet) -> Result<()> {
    let mut rows = Vec::with_capacity(set.coefficients.len());
    for w in 0..set.scenarios {
        for t in 0..set.hours {
            for i in 0..set.blocks {
                rows.push(vec![
                    date.to_string(),
                    text(w),
                    num(set.probabilities[w]),
                    text(t),
                    text(i + 1),
                    num(set.beta(w, t, i)),
                ]);
            }
        }
    }
    write_table(path, &["date", "scenario", "probability", "hour", "block", "beta"], rows)?;
    Ok(())
}

pub fn write_frontier(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    let rows = points.iter().map(|p| {
        vec![
            num(p.chi),
            num(p.chi_used),
            num(p.expected_profit),
            num(p.cvar),
            num(p.objective),
            format!("{:?}", p.status),
        ]
    });
    write_table(path, &["chi", "chi_used", "expected_profit", "cvar", "objective", "status"], rows)?;
    Ok(())
}

pub fn write_discretization(path: &Path, rows: &[(chrono::NaiveDateTime, &'static str, DiscretizationResult)]) -> Result<()> {
    let out = rows.iter().flat_map(|(ts, owner, r)| {
        (0..r.groups()).map(move |g| {
            vec![
                format_timestamp(*ts),
                owner.to_string(),
                text(g + 1),
                num(r.prices[g]),
                num(r.quantities[g]),
                num(r.error),
            ]
        })
    });
    write_table(
        path,
        &["timestamp", "owner", "group", "price_eur_mwh", "quantity_mwh", "error_eur"],
        out,
    )?;
    Ok(())
}

fn stats_row(label: &str, s: &Stats, lambda: f64) -> Vec<String> {
    vec![
        label.into(),
        num(s.mean),
        num(s.q1),
        num(s.q3),
        num(s.variance),
        num(s.sd()),
        num(lambda),
    ]
}

/// Summary, per-day and per-hour tables of a replay.
pub fn write_backtest(dir: &Path, r: &BacktestReport) -> Result<()> {
    write_table(
        &dir.join(BACKTEST_SUMMARY),
        &["series", "mean", "q1", "q3", "variance", "sd", "mean_lambda"],
        vec![
            stats_row("strategy", &r.strategy, r.mean_lambda),
            stats_row("baseline", &r.baseline, r.baseline_mean_lambda),
            stats_row("increment", &r.increment, r.mean_lambda - r.baseline_mean_lambda),
        ],
    )?;
    write_table(
        &dir.join(BACKTEST_DAYS),
        &["date", "profit", "baseline_profit", "increment"],
        r.rows.iter().map(|row| {
            vec![
                row.date.to_string(),
                num(row.profit),
                num(row.baseline_profit),
                num(row.increment),
            ]
        }),
    )?;
    write_table(
        &dir.join(BACKTEST_HOURS),
        &["hour", "mean_increment"],
        r.hourly_mean_increment().iter().enumerate().map(|(h, v)| vec![text(h), num(*v)]),
    )?;
    let hourly = r.rows.iter().flat_map(|row| {
        let start = row.date.and_hms_opt(0, 0, 0).expect("midnight");
        (0..row.lambda.len()).map(move |h| {
            vec![
                format_timestamp(start + chrono::Duration::hours(h as i64)),
                num(row.lambda[h]),
                num(row.baseline_lambda[h]),
                num(row.hourly_increment[h]),
            ]
        })
    });
    write_table(
        &dir.join(BACKTEST_HOURLY),
        &["timestamp", "lambda", "baseline_lambda", "increment"],
        hourly,
    )?;
    Ok(())
}

/// Reads the summary table back as `(series, mean)` pairs.
pub fn read_backtest_means(dir: &Path) -> Result<BTreeMap<String, f64>> {
    let rows = read_table(
        &dir.join(BACKTEST_SUMMARY),
        &["series", "mean", "q1", "q3", "variance", "sd", "mean_lambda"],
    )?;
    rows.iter()
        .map(|r| Ok((r[0].to_string(), field_number(r, 1)?)))
        .collect()
}
