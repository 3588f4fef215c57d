//! Acceptance suite. Each criterion runs in turn and prints one line:
//!
//! ```text
//! [PASS] 3  clearing correctness          1000 random instances agree; toy price 42 at 24000 MWh
//! ```
//!
//! The process exits nonzero when any criterion fails. Every tolerance is
//! pinned below.

#[path = "../../core/tests/support/offering.rs"]
mod offering;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use genco_cli::commands::run_pipeline;
use genco_cli::config::PipelineConfig;
use genco_cli::data::{write_covariates, write_curves, CovariateRow, HourOffers};
use genco_cli::pipeline::{day_problem, fit, load_market, periods, FitOutput, Market};
use genco_cli::report;
use genco_cli::synth::{generate_synthetic, SyntheticMarketSpec};
use genco_core::curves::{discretize, discretize_dp, Owner, Step, SteppedSupplyCurve};
use genco_core::market::{clear, clear_linear_scan, marginal_price_example, InelasticDemand};
use genco_core::optimizer::{
    efficient_frontier, evaluate_solution, optimize, OfferingProblem, OfferingSolution,
};
use genco_core::regression::{fit_gibbs, GibbsConfig, RegressionDataset};
use genco_milp::SolveOptions;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Criterion 1: MILP against DP discretization error.
const DISCRETIZATION_TOL: f64 = 1e-6;
const DISCRETIZATION_BUDGET: Duration = Duration::from_secs(60);
/// Criterion 2: error of the identity discretization.
const IDENTITY_TOL: f64 = 1e-9;
/// Criterion 4.
const GIBBS_SD_MULTIPLE: f64 = 3.0;
const GIBBS_MIN_INSIDE: usize = 9;
const NOISE_SD_REL_TOL: f64 = 0.10;
const GIBBS_BUDGET: Duration = Duration::from_secs(30);
/// Criterion 5: absolute coefficient error.
const NOISELESS_TOL: f64 = 1e-3;
/// Criterion 6: absolute objective difference to the enumeration oracle.
const ORACLE_TOL: f64 = 1e-5;
/// Criteria 7 to 9: relative slack for solver round-off.
const REL_TOL: f64 = 1e-6;
/// Criterion 10: absolute difference between the linearized CVaR and the
/// empirical tail mean.
const CVAR_TOL: f64 = 1e-5;
/// Criterion 11.
const PIPELINE_BUDGET: Duration = Duration::from_secs(15 * 60);

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn random_curve(rng: &mut ChaCha8Rng, blocks: usize) -> SteppedSupplyCurve {
    let steps = (0..blocks)
        .map(|_| {
            let price = (rng.gen_range(0.0..120.0f64) * 100.0).round() / 100.0;
            let owner = if rng.gen_bool(0.3) { Owner::Genco } else { Owner::Competitor };
            Step::new(price, rng.gen_range(1.0..500.0f64).round(), owner)
        })
        .collect();
    SteppedSupplyCurve::from_steps(steps).unwrap()
}

fn curves_for_discretization() -> Vec<(SteppedSupplyCurve, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..200)
        .map(|_| {
            let b = rng.gen_range(1..=30);
            let groups = rng.gen_range(1..=7usize).min(b);
            (random_curve(&mut rng, b), groups)
        })
        .collect()
}

fn discretization_optimality() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, (curve, groups)) in curves_for_discretization().iter().enumerate() {
        let dp = discretize_dp(curve, *groups).map_err(|e| e.to_string())?;
        let milp = discretize(curve, *groups).map_err(|e| e.to_string())?;
        let diff = (dp.error - milp.error).abs();
        worst = worst.max(diff);
        check!(diff <= DISCRETIZATION_TOL, "curve {k}: MILP {} vs DP {}", milp.error, dp.error);
    }
    let elapsed = start.elapsed();
    check!(elapsed < DISCRETIZATION_BUDGET, "took {elapsed:?}");
    Ok(format!("200 curves, max |MILP - DP| {worst:.1e}, {:.1}s", elapsed.as_secs_f64()))
}

fn identity_discretization() -> Outcome {
    for (k, (curve, _)) in curves_for_discretization().iter().enumerate() {
        let milp = discretize(curve, curve.len()).map_err(|e| e.to_string())?;
        let dp = discretize_dp(curve, curve.len()).map_err(|e| e.to_string())?;
        check!(
            milp.error.abs() <= IDENTITY_TOL && dp.error.abs() <= IDENTITY_TOL,
            "curve {k}: errors {} and {}",
            milp.error,
            dp.error
        );
    }
    Ok("200 curves with |I| = B, zero error".into())
}

fn clearing_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..1000 {
        let blocks = rng.gen_range(1..40);
        let curve = random_curve(&mut rng, blocks);
        let total = curve.total_quantity();
        let d = match k % 3 {
            0 => rng.gen_range(0.5..total * 1.1),
            1 => curve.cumulative()[rng.gen_range(0..curve.len())],
            _ => total + 1.0,
        };
        let demand = InelasticDemand::new(d).unwrap();
        check!(
            clear(&curve, demand) == clear_linear_scan(&curve, demand),
            "instance {k} disagrees at demand {d}"
        );
    }
    let toy = clear(&marginal_price_example(), InelasticDemand::new(24000.0).unwrap()).map_err(|e| e.to_string())?;
    check!(toy.price == 42.0, "toy curve clears at {}", toy.price);
    Ok("1000 random instances agree; toy curve clears at 42 EUR/MWh for 24000 MWh".into())
}

fn regression_data(n: usize, truth: &[f64], noise: f64, seed: u64) -> RegressionDataset {
    let p = truth.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, j| rng.gen_range(-5.0..5.0) * (j + 1) as f64);
    let eps = Normal::new(0.0, 1.0).unwrap();
    let y = DVector::from_fn(n, |i, _| {
        truth[0] + (0..p).map(|j| truth[j + 1] * x[(i, j)]).sum::<f64>() + noise * eps.sample(&mut rng)
    });
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    RegressionDataset {
        names: (0..p).map(|j| format!("x{j}")).collect(),
        x,
        y,
        timestamps: (0..n).map(|i| start + chrono::Duration::hours(i as i64)).collect(),
    }
}

fn gibbs_recovery() -> Outcome {
    let truth = [4.0, 1.0, -0.5, 0.25, 2.0, 0.0, -1.0, 0.1, 0.75, -0.3, 0.05];
    let noise = 1.0;
    let data = regression_data(2000, &truth, noise, 101);
    let cfg = GibbsConfig {
        seed: 17,
        ..Default::default()
    };
    let start = Instant::now();
    let s = fit_gibbs(&data, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let inside = (1..truth.len())
        .filter(|&j| (s.mean[j] - truth[j]).abs() <= GIBBS_SD_MULTIPLE * s.sd[j])
        .count();
    check!(inside >= GIBBS_MIN_INSIDE, "{inside} of 10 within 3 sd");
    let rel = (s.noise_sd - noise).abs() / noise;
    check!(rel <= NOISE_SD_REL_TOL, "noise sd {} ({:.1}% off)", s.noise_sd, 100.0 * rel);
    check!(elapsed < GIBBS_BUDGET, "took {elapsed:?}");
    let again = fit_gibbs(&data, &cfg).map_err(|e| e.to_string())?;
    check!(s == again, "refit with the same seed differs");
    Ok(format!(
        "{inside}/10 within 3 sd, noise sd {:.4}, bit-identical refit, {:.1}s",
        s.noise_sd,
        elapsed.as_secs_f64()
    ))
}

fn noiseless_identification() -> Outcome {
    let truth = [3.0, -1.5, 0.25, 10.0, 0.0, -7.5];
    let data = regression_data(500, &truth, 0.0, 5);
    let cfg = GibbsConfig {
        draws: 1000,
        burn_in: 100,
        ..Default::default()
    };
    let s = fit_gibbs(&data, &cfg).map_err(|e| e.to_string())?;
    let generic = s.mean.iter().zip(truth).map(|(m, t)| (m - t).abs()).fold(0.0, f64::max);
    check!(generic <= NOISELESS_TOL, "generic data: max error {generic}");

    // The synthetic market with zero price noise and one block per unit.
    let spec = SyntheticMarketSpec {
        days: 100,
        price_noise: 0.0,
        ..Default::default()
    };
    let m = generate_synthetic(&spec, 9).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        test_days: 5,
        draws: 1000,
        burn_in: 100,
        ..Default::default()
    };
    let market = Market::prepare(&m.curves, &m.covariates, spec.genco_blocks(), 7).map_err(|e| e.to_string())?;
    let f = fit(&market, &periods(&cfg, &market).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    let mut worst = (f.posterior.intercept() - m.truth.intercept).abs();
    for (j, want) in m.truth.coefficients.iter().enumerate() {
        worst = worst.max((f.posterior.mean[j + 1] - want).abs());
    }
    check!(worst <= NOISELESS_TOL, "synthetic market: max error {worst}");
    Ok(format!(
        "max error {generic:.1e} on generic data, {worst:.1e} on the {}-coefficient synthetic market",
        m.truth.coefficients.len() + 1
    ))
}

fn check_cvar_identity(sol: &OfferingSolution, p: &OfferingProblem, what: &str) -> Result<(), String> {
    let r = evaluate_solution(sol, p).map_err(|e| e.to_string())?;
    check!(
        (r.cvar_from_solution - r.cvar).abs() <= CVAR_TOL,
        "{what}: eta - sum(pi s)/alpha = {} but tail mean = {}",
        r.cvar_from_solution,
        r.cvar
    );
    check!(r.cvar <= r.expected + CVAR_TOL, "{what}: CVaR {} above E {}", r.cvar, r.expected);
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let opts = SolveOptions::exact();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let p = offering::random_problem(seed, 2, 2, 3);
        let oracle = offering::enumeration_oracle(&p).ok_or(format!("seed {seed}: oracle found nothing"))?;
        let sol = optimize(&p, &opts).map_err(|e| e.to_string())?;
        let diff = (sol.objective - oracle).abs();
        worst = worst.max(diff);
        check!(diff <= ORACLE_TOL, "seed {seed}: MILP {} vs oracle {oracle}", sol.objective);
        check_cvar_identity(&sol, &p, &format!("seed {seed}"))?;
    }
    Ok(format!("50 instances, max |MILP - oracle| {worst:.1e}"))
}

/// A prepared synthetic market with a fitted posterior, shared by the
/// single-day criteria.
struct Fixture {
    market: Market,
    fit: FitOutput,
    date: NaiveDate,
    cfg: PipelineConfig,
}

fn fixture() -> Result<Fixture, String> {
    let spec = SyntheticMarketSpec {
        days: 45,
        ..Default::default()
    };
    let m = generate_synthetic(&spec, 21).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        blocks: 5,
        scenarios: 20,
        test_days: 3,
        draws: 1000,
        burn_in: 100,
        gap: 1e-9,
        ..Default::default()
    };
    let market = Market::prepare(&m.curves, &m.covariates, cfg.blocks - 1, cfg.competitor_blocks).map_err(|e| e.to_string())?;
    let p = periods(&cfg, &market).map_err(|e| e.to_string())?;
    let fit = fit(&market, &p, &cfg).map_err(|e| e.to_string())?;
    Ok(Fixture {
        date: p.test.0,
        market,
        fit,
        cfg,
    })
}

impl Fixture {
    fn problem(&self, flexibility: f64, chi: f64, hours: Option<std::ops::Range<usize>>) -> Result<OfferingProblem, String> {
        let cfg = PipelineConfig {
            flexibility,
            chi,
            ..self.cfg.clone()
        };
        let inputs = self.market.inputs();
        let p = day_problem(&self.market, &inputs, &self.fit.spec, &self.fit.posterior, self.date, &cfg)
            .map_err(|e| e.to_string())?;
        Ok(match hours {
            None => p,
            Some(r) => {
                let mut q = OfferingProblem::new(p.exo.restrict_hours(r.clone()), p.scenarios.restrict_hours(r), chi, p.alpha)
                    .map_err(|e| e.to_string())?;
                q.big_m = p.big_m;
                q
            }
        })
    }
}

fn opts() -> SolveOptions {
    SolveOptions::default().with_gap(1e-9)
}

fn zero_flexibility_degeneracy(f: &Fixture) -> Outcome {
    let neutral_p = f.problem(0.0, 0.0, None)?;
    let averse_p = f.problem(0.0, 1.0, None)?;
    let neutral = optimize(&neutral_p, &opts()).map_err(|e| e.to_string())?;
    let averse = optimize(&averse_p, &opts()).map_err(|e| e.to_string())?;
    check!(neutral.prices == averse.prices, "offers differ between chi = 0 and chi = 1");
    check!(
        close(neutral.expected_profit, averse.expected_profit, REL_TOL) && close(neutral.cvar, averse.cvar, REL_TOL),
        "E/CVaR differ: ({}, {}) vs ({}, {})",
        neutral.expected_profit,
        neutral.cvar,
        averse.expected_profit,
        averse.cvar
    );
    check_cvar_identity(&neutral, &neutral_p, "chi 0")?;
    check_cvar_identity(&averse, &averse_p, "chi 1")?;
    Ok(format!(
        "24 h x {} scenarios: identical offers, E {:.2}, CVaR {:.2} for both weights",
        neutral_p.omega(),
        neutral.expected_profit,
        neutral.cvar
    ))
}

fn flexibility_monotonicity(f: &Fixture) -> Outcome {
    let mut summary = Vec::new();
    for (chi, hours) in [(0.0, None), (0.5, Some(8..10))] {
        let mut last = f64::NEG_INFINITY;
        let mut values = Vec::new();
        for sigma in [0.0, 0.05, 0.10, 0.15] {
            let p = f.problem(sigma, chi, hours.clone())?;
            let sol = optimize(&p, &opts()).map_err(|e| e.to_string())?;
            check_cvar_identity(&sol, &p, &format!("sigma {sigma}"))?;
            check!(
                sol.objective >= last - REL_TOL * (1.0 + last.abs()),
                "chi {chi}: objective fell to {} at sigma {sigma} from {last}",
                sol.objective
            );
            last = sol.objective;
            values.push(format!("{:.0}", sol.objective));
        }
        summary.push(format!("chi {chi}: {}", values.join(" <= ")));
    }
    Ok(summary.join("; "))
}

fn frontier_monotonicity(f: &Fixture) -> Outcome {
    let p = f.problem(f.cfg.flexibility, 0.0, Some(9..11))?;
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let points = efficient_frontier(&p, &grid, &opts()).map_err(|e| e.to_string())?;
    check!(points.len() == 11, "{} points", points.len());
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        check!(
            b.expected_profit <= a.expected_profit + REL_TOL * (1.0 + a.expected_profit.abs()),
            "E rises from {} to {} between chi {} and {}",
            a.expected_profit,
            b.expected_profit,
            a.chi,
            b.chi
        );
        check!(
            b.cvar >= a.cvar - REL_TOL * (1.0 + a.cvar.abs()),
            "CVaR falls from {} to {} between chi {} and {}",
            a.cvar,
            b.cvar,
            a.chi,
            b.chi
        );
        check!(b.cvar <= b.expected_profit + CVAR_TOL, "CVaR above E at chi {}", b.chi);
    }
    let (first, last) = (&points[0], &points[10]);
    Ok(format!(
        "E {:.0} -> {:.0}, CVaR {:.0} -> {:.0} over 11 weights",
        first.expected_profit, last.expected_profit, first.cvar, last.cvar
    ))
}

fn cvar_identity(f: &Fixture) -> Outcome {
    // The identity is also checked inside criteria 6 to 8; here on a
    // coupled synthetic day for each risk weight.
    let mut count = 0;
    for chi in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let p = f.problem(f.cfg.flexibility, chi, Some(12..14))?;
        let sol = optimize(&p, &opts()).map_err(|e| e.to_string())?;
        check_cvar_identity(&sol, &p, &format!("chi {chi}"))?;
        count += 1;
    }
    for seed in 300..350 {
        let p = offering::random_problem(seed, 2, 3, 4);
        let sol = optimize(&p, &SolveOptions::exact()).map_err(|e| e.to_string())?;
        check_cvar_identity(&sol, &p, &format!("random seed {seed}"))?;
        count += 1;
    }
    Ok(format!("{count} optima: linearized CVaR equals the tail mean and never exceeds E"))
}

fn write_market(dir: &Path, curves: &[HourOffers], covariates: &[CovariateRow]) {
    std::fs::create_dir_all(dir).unwrap();
    write_curves(std::fs::File::create(dir.join("curves.csv")).unwrap(), curves).unwrap();
    write_covariates(std::fs::File::create(dir.join("covariates.csv")).unwrap(), covariates).unwrap();
}

fn config_for(dir: &Path, out: &str) -> PipelineConfig {
    PipelineConfig {
        curves: dir.join("curves.csv"),
        covariates: dir.join("covariates.csv"),
        output: dir.join(out),
        ..Default::default()
    }
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticMarketSpec::default();
    let m = generate_synthetic(&spec, 2019).map_err(|e| e.to_string())?;
    write_market(tmp.path(), &m.curves, &m.covariates);
    let cfg = PipelineConfig {
        scenarios: 50,
        blocks: 5,
        test_days: 30,
        flexibility: 0.1,
        ..config_for(tmp.path(), "out")
    };
    let start = Instant::now();
    let r = run_pipeline(&cfg, None).map_err(|e| format!("{e:#}"))?;
    let elapsed = start.elapsed();
    check!(elapsed < PIPELINE_BUDGET, "took {elapsed:?}");
    check!(r.rows.len() == 30, "{} test days", r.rows.len());
    check!(
        r.strategy.mean >= r.baseline.mean,
        "strategy mean {:.2} below baseline {:.2}",
        r.strategy.mean,
        r.baseline.mean
    );
    Ok(format!(
        "30 days in {:.1}s; mean profit {:.0} vs baseline {:.0} (+{:.2}%)",
        elapsed.as_secs_f64(),
        r.strategy.mean,
        r.baseline.mean,
        100.0 * r.increment.mean / r.baseline.mean
    ))
}

fn rows_through(path: &Path, last: NaiveDate) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| {
            let date = NaiveDate::parse_from_str(&l[..10], "%Y-%m-%d").unwrap();
            date <= last
        })
        .map(str::to_string)
        .collect()
}

fn no_lookahead() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticMarketSpec {
        days: 40,
        ..Default::default()
    };
    let m = generate_synthetic(&spec, 12).map_err(|e| e.to_string())?;
    let base = PipelineConfig {
        scenarios: 10,
        blocks: 5,
        test_days: 6,
        draws: 1000,
        burn_in: 100,
        ..Default::default()
    };
    let original = tmp.path().join("original");
    write_market(&original, &m.curves, &m.covariates);
    let cfg = merge(&base, config_for(&original, "out"));
    run_pipeline(&cfg, None).map_err(|e| format!("{e:#}"))?;
    let market = load_market(&cfg).map_err(|e| e.to_string())?;
    let test = periods(&cfg, &market).map_err(|e| e.to_string())?.test_days();
    let cutoff = test[2];

    // Everything after the cutoff day changes: demand, competitor bids,
    // wind, realized prices.
    let mut curves = m.curves.clone();
    let mut covariates = m.covariates.clone();
    for (h, c) in curves.iter_mut().zip(covariates.iter_mut()) {
        if h.timestamp.date() <= cutoff {
            continue;
        }
        for b in &mut h.competitors {
            b.price = (b.price * 1.3 + 5.0).min(150.0);
        }
        c.demand *= 1.15;
        c.wind *= 0.5;
        c.price += 25.0;
    }
    let mutated = tmp.path().join("mutated");
    write_market(&mutated, &curves, &covariates);
    let cfg2 = merge(&base, config_for(&mutated, "out"));
    run_pipeline(&cfg2, None).map_err(|e| format!("{e:#}"))?;

    let mut compared = 0;
    for file in [report::BACKTEST_DAYS, report::BACKTEST_HOURLY, report::OFFERS, report::SCENARIO_PROFITS] {
        let a = rows_through(&cfg.output.join(file), cutoff);
        let b = rows_through(&cfg2.output.join(file), cutoff);
        check!(!a.is_empty(), "{file}: no rows through {cutoff}");
        check!(a == b, "{file}: rows through {cutoff} changed");
        compared += a.len();
    }
    let after = |c: &PipelineConfig| {
        std::fs::read_to_string(c.output.join(report::BACKTEST_DAYS)).unwrap().lines().last().unwrap().to_string()
    };
    check!(after(&cfg) != after(&cfg2), "the mutation did not reach later days");
    Ok(format!("{compared} rows through {cutoff} unchanged after rewriting later data"))
}

fn merge(base: &PipelineConfig, paths: PipelineConfig) -> PipelineConfig {
    PipelineConfig {
        curves: paths.curves,
        covariates: paths.covariates,
        output: paths.output,
        ..base.clone()
    }
}

fn main() {
    // Quiet the default panic output; failures are reported per line.
    std::panic::set_hook(Box::new(|_| {}));
    let cell = std::cell::OnceCell::new();
    let shared = &cell;
    let with_fixture = move |f: fn(&Fixture) -> Outcome| -> Box<dyn Fn() -> Outcome + '_> {
        Box::new(move || match shared.get_or_init(fixture) {
            Ok(fx) => f(fx),
            Err(e) => Err(format!("fixture: {e}")),
        })
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("discretization optimality", Box::new(discretization_optimality)),
        ("identity discretization", Box::new(identity_discretization)),
        ("clearing correctness", Box::new(clearing_correctness)),
        ("Gibbs recovery", Box::new(gibbs_recovery)),
        ("noiseless identification", Box::new(noiseless_identification)),
        ("MILP oracle equivalence", Box::new(oracle_equivalence)),
        ("zero-flexibility degeneracy", with_fixture(zero_flexibility_degeneracy)),
        ("flexibility monotonicity", with_fixture(flexibility_monotonicity)),
        ("frontier monotonicity", with_fixture(frontier_monotonicity)),
        ("CVaR identity", with_fixture(cvar_identity)),
        ("end-to-end pipeline", Box::new(end_to_end)),
        ("no-lookahead audit", Box::new(no_lookahead)),
    ];
    let mut failed = 0;
    let mut err = std::io::stderr().lock();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(
            err,
            "[{tag}] {:>2}  {name:<28} {detail} ({:.1}s)",
            k + 1,
            start.elapsed().as_secs_f64()
        )
        .unwrap();
    }
    writeln!(err, "acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len()).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
