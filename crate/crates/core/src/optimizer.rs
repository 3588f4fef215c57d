//! Risk-averse two-stage offering problem.
//!
//! First stage: block prices `P[t][i]`. Second stage, per scenario: the
//! price `lambda = b0 + b_ren * Q_ren + sum_i beta[w][t][i] * P[t][i] + D[t]`,
//! which blocks clear (`u = 1` iff `P <= lambda`), and the resulting
//! profit. The objective mixes expected profit and CVaR with weight `chi`.
//! The product `lambda * u` is linearized exactly through `z`.

use std::time::{Duration, Instant};

use genco_milp::{
    solve, Comparison, Integrality, MilpSolution, ModelSpec, Sense, SolveOptions, SolveStatus, VarId,
};
use thiserror::Error;

use crate::curves::DEFAULT_PRICE_CAP;
use crate::scenarios::{ExogenousForecast, ScenarioSet};

/// Smallest admissible offer price, EUR/MWh.
pub const MIN_PRICE: f64 = 0.01;
/// Tolerance for price comparisons when checking a solution.
pub const CHECK_TOL: f64 = 1e-5;
/// Risk weights used in place of the exact endpoints of a frontier.
pub const CHI_ENDPOINTS: (f64, f64) = (0.001, 0.999);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    #[error("no feasible offer exists (cost ladder or price bounds inconsistent)")]
    Infeasible,
    #[error("solver stopped ({0:?}) without a feasible solution")]
    NoIncumbent(SolveStatus),
    #[error("solution check failed: {0}")]
    Violation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfferingProblem {
    pub exo: ExogenousForecast,
    pub scenarios: ScenarioSet,
    /// Risk weight: 0 maximizes expected profit, 1 maximizes CVaR.
    pub chi: f64,
    /// CVaR tail fraction.
    pub alpha: f64,
    /// Price cap and big-M, EUR/MWh.
    pub big_m: f64,
}

impl OfferingProblem {
    pub fn new(exo: ExogenousForecast, scenarios: ScenarioSet, chi: f64, alpha: f64) -> Result<Self, OptimizerError> {
        let p = Self {
            exo,
            scenarios,
            chi,
            alpha,
            big_m: DEFAULT_PRICE_CAP,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn hours(&self) -> usize {
        self.exo.hours()
    }

    pub fn blocks(&self) -> usize {
        self.exo.blocks()
    }

    pub fn omega(&self) -> usize {
        self.scenarios.scenarios
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(OptimizerError::Parameter("chi must lie in [0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(OptimizerError::Parameter("alpha must lie in (0, 1)"));
        }
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(OptimizerError::Parameter("big-M must be positive"));
        }
        let (t, i) = (self.hours(), self.blocks());
        let s = &self.scenarios;
        if s.hours != t || s.blocks != i {
            return Err(OptimizerError::Dimensions(format!(
                "scenarios cover {} hours x {} blocks, forecast {t} x {i}",
                s.hours, s.blocks
            )));
        }
        if s.coefficients.len() != s.scenarios * t * i || s.probabilities.len() != s.scenarios {
            return Err(OptimizerError::Dimensions("scenario arrays".into()));
        }
        let e = &self.exo;
        let rows_ok = |v: &Vec<Vec<f64>>| v.len() == t && v.iter().all(|r| r.len() == i);
        if e.renewable.len() != t || !rows_ok(&e.q_max) || !rows_ok(&e.cost) || !rows_ok(&e.sigma) {
            return Err(OptimizerError::Dimensions("forecast arrays".into()));
        }
        Ok(())
    }

    /// Admissible price interval of block `i` at hour `t`.
    pub fn price_bounds(&self, t: usize, i: usize) -> (f64, f64) {
        let c = self.exo.cost[t][i];
        let s = self.exo.sigma[t][i];
        let lo = (c - s).max(MIN_PRICE);
        let hi = (c + s).min(self.big_m).max(lo);
        (lo, hi)
    }

    /// Constant part of the price response at hour `t`.
    pub fn base_price(&self, t: usize) -> f64 {
        self.exo.intercept + self.exo.renewable_coef * self.exo.renewable[t] + self.exo.d[t]
    }

    /// Price of scenario `w` at hour `t` for offers `prices`.
    pub fn price_response(&self, w: usize, t: usize, prices: &[f64]) -> f64 {
        self.base_price(t) + (0..self.blocks()).map(|i| self.scenarios.beta(w, t, i) * prices[i]).sum::<f64>()
    }

    /// Bounds on any scenario profit, used to bound `eta` and `s`.
    fn profit_range(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for t in 0..self.hours() {
            hi += self.big_m * self.exo.renewable[t];
            for i in 0..self.blocks() {
                let q = self.exo.q_max[t][i];
                lo -= self.exo.cost[t][i].max(0.0) * q;
                hi += (self.big_m - self.exo.cost[t][i]).max(0.0) * q;
            }
        }
        (lo - 1.0, hi + 1.0)
    }

    fn restrict_hour(&self, t: usize) -> Self {
        Self {
            exo: self.exo.restrict_hours(t..t + 1),
            scenarios: self.scenarios.restrict_hours(t..t + 1),
            ..self.clone()
        }
    }
}

/// Variable ids of a built model.
#[derive(Debug, Clone)]
pub struct Layout {
    hours: usize,
    blocks: usize,
    pub p: Vec<VarId>,
    pub lambda: Vec<VarId>,
    pub u: Vec<VarId>,
    pub z: Vec<VarId>,
    pub q: Vec<VarId>,
    pub eta: VarId,
    pub s: Vec<VarId>,
}

impl Layout {
    pub fn p(&self, t: usize, i: usize) -> VarId {
        self.p[t * self.blocks + i]
    }

    pub fn lambda(&self, w: usize, t: usize) -> VarId {
        self.lambda[w * self.hours + t]
    }

    fn idx(&self, w: usize, t: usize, i: usize) -> usize {
        (w * self.hours + t) * self.blocks + i
    }

    pub fn u(&self, w: usize, t: usize, i: usize) -> VarId {
        self.u[self.idx(w, t, i)]
    }

    pub fn z(&self, w: usize, t: usize, i: usize) -> VarId {
        self.z[self.idx(w, t, i)]
    }

    pub fn q(&self, w: usize, t: usize, i: usize) -> VarId {
        self.q[self.idx(w, t, i)]
    }
}

/// Builds the mixed-integer model of the problem.
pub fn build_milp(problem: &OfferingProblem) -> Result<(ModelSpec, Layout), OptimizerError> {
    problem.validate()?;
    Ok(build(problem, true))
}

fn build(problem: &OfferingProblem, with_cvar: bool) -> (ModelSpec, Layout) {
    let (nt, ni, nw) = (problem.hours(), problem.blocks(), problem.omega());
    let m_cap = problem.big_m;
    let exo = &problem.exo;
    let mut m = ModelSpec::new(Sense::Maximize);
    let var = |m: &mut ModelSpec, name: String, lo: f64, hi: f64, kind| m.add_variable(name, lo, hi, kind).expect("finite bounds");
    let row = |m: &mut ModelSpec, name: String, terms: Vec<(VarId, f64)>, cmp, rhs: f64| {
        m.add_constraint(name, terms, cmp, rhs).expect("declared variables");
    };
    use Comparison::{Eq, Ge, Le};
    use Integrality::{Binary, Continuous};

    let mut p = Vec::with_capacity(nt * ni);
    for t in 0..nt {
        for i in 0..ni {
            let (lo, hi) = problem.price_bounds(t, i);
            p.push(var(&mut m, format!("P_{t}_{i}"), lo, hi, Continuous));
        }
    }
    let mut lambda = Vec::with_capacity(nw * nt);
    let (mut u, mut z, mut q) = (Vec::new(), Vec::new(), Vec::new());
    for w in 0..nw {
        for t in 0..nt {
            lambda.push(var(&mut m, format!("lambda_{w}_{t}"), 0.0, m_cap, Continuous));
            for i in 0..ni {
                u.push(var(&mut m, format!("u_{w}_{t}_{i}"), 0.0, 1.0, Binary));
                z.push(var(&mut m, format!("z_{w}_{t}_{i}"), 0.0, m_cap, Continuous));
                q.push(var(&mut m, format!("Q_{w}_{t}_{i}"), 0.0, exo.q_max[t][i], Continuous));
            }
        }
    }
    let (plo, phi) = problem.profit_range();
    let eta = var(&mut m, "eta".into(), plo, phi, Continuous);
    let s: Vec<VarId> = (0..nw)
        .map(|w| var(&mut m, format!("s_{w}"), 0.0, phi - plo, Continuous))
        .collect();
    let layout = Layout {
        hours: nt,
        blocks: ni,
        p,
        lambda,
        u,
        z,
        q,
        eta,
        s,
    };
    let l = &layout;

    for t in 0..nt {
        for i in 0..ni.saturating_sub(1) {
            row(&mut m, format!("order_{t}_{i}"), vec![(l.p(t, i), 1.0), (l.p(t, i + 1), -1.0)], Le, 0.0);
        }
    }
    for w in 0..nw {
        for t in 0..nt {
            let lam = l.lambda(w, t);
            let mut terms = vec![(lam, 1.0)];
            terms.extend((0..ni).map(|i| (l.p(t, i), -problem.scenarios.beta(w, t, i))));
            row(&mut m, format!("response_{w}_{t}"), terms, Eq, problem.base_price(t));
            for i in 0..ni {
                let (pv, uv, zv, qv) = (l.p(t, i), l.u(w, t, i), l.z(w, t, i), l.q(w, t, i));
                // u = 1 forces P <= lambda, u = 0 forces P >= lambda.
                row(&mut m, format!("accept_{w}_{t}_{i}"), vec![(pv, 1.0), (lam, -1.0), (uv, m_cap)], Le, m_cap);
                row(&mut m, format!("reject_{w}_{t}_{i}"), vec![(lam, 1.0), (pv, -1.0), (uv, -m_cap)], Le, 0.0);
                row(&mut m, format!("dispatch_{w}_{t}_{i}"), vec![(qv, 1.0), (uv, -exo.q_max[t][i])], Eq, 0.0);
                // z = lambda * u.
                row(&mut m, format!("zu_{w}_{t}_{i}"), vec![(zv, 1.0), (uv, -m_cap)], Le, 0.0);
                row(&mut m, format!("zl_{w}_{t}_{i}"), vec![(zv, 1.0), (lam, -1.0)], Le, 0.0);
                row(&mut m, format!("zlu_{w}_{t}_{i}"), vec![(zv, 1.0), (lam, -1.0), (uv, -m_cap)], Ge, -m_cap);
            }
        }
    }

    let profit_terms = |w: usize| -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for t in 0..nt {
            if exo.renewable[t] != 0.0 {
                terms.push((l.lambda(w, t), exo.renewable[t]));
            }
            for i in 0..ni {
                terms.push((l.z(w, t, i), exo.q_max[t][i]));
                terms.push((l.q(w, t, i), -exo.cost[t][i]));
            }
        }
        terms
    };
    if with_cvar {
        for w in 0..nw {
            // s_w >= eta - profit_w
            let mut terms = vec![(l.s[w], 1.0), (l.eta, -1.0)];
            terms.extend(profit_terms(w));
            row(&mut m, format!("shortfall_{w}"), terms, Ge, 0.0);
        }
    }

    let chi = problem.chi;
    let mut objective = Vec::new();
    for w in 0..nw {
        let pi = problem.scenarios.probabilities[w];
        if chi < 1.0 {
            objective.extend(profit_terms(w).into_iter().map(|(v, c)| (v, (1.0 - chi) * pi * c)));
        }
        if chi > 0.0 {
            objective.push((l.s[w], -chi * pi / problem.alpha));
        }
    }
    if chi > 0.0 {
        objective.push((l.eta, chi));
    }
    m.set_objective(Sense::Maximize, objective).expect("declared variables");
    (m, layout)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfferingSolution {
    pub status: SolveStatus,
    /// Proven relative gap (largest over sub-solves).
    pub gap: f64,
    /// `[hour][block]` offer prices.
    pub prices: Vec<Vec<f64>>,
    /// `[scenario][hour]` prices.
    pub lambda: Vec<Vec<f64>>,
    /// `[scenario][hour][block]` acceptance.
    pub accepted: Vec<Vec<Vec<bool>>>,
    /// `[scenario][hour][block]` dispatched energy.
    pub dispatch: Vec<Vec<Vec<f64>>>,
    pub eta: f64,
    pub shortfall: Vec<f64>,
    /// Solver objective of the scalarized problem.
    pub objective: f64,
    pub expected_profit: f64,
    pub cvar: f64,
    pub profits: Vec<f64>,
    pub nodes: usize,
    pub elapsed: Duration,
}

impl OfferingSolution {
    /// Probability-weighted mean price over scenarios and hours.
    pub fn mean_price(&self, probabilities: &[f64]) -> f64 {
        let hours = self.prices.len().max(1) as f64;
        self.lambda
            .iter()
            .zip(probabilities)
            .map(|(l, p)| p * l.iter().sum::<f64>() / hours)
            .sum()
    }

    /// Expected hourly genco energy, renewable included.
    pub fn mean_dispatch(&self, probabilities: &[f64], renewable: &[f64]) -> f64 {
        let hours = self.prices.len().max(1) as f64;
        let ren: f64 = renewable.iter().sum();
        self.dispatch
            .iter()
            .zip(probabilities)
            .map(|(d, p)| p * (ren + d.iter().flatten().sum::<f64>()) / hours)
            .sum()
    }

    /// Mean offer price of block `i` over the hours.
    pub fn mean_offer(&self, i: usize) -> f64 {
        self.prices.iter().map(|r| r[i]).sum::<f64>() / self.prices.len().max(1) as f64
    }
}

/// Lower-tail mean of `profits` at level `alpha` under `probabilities`,
/// splitting the boundary scenario when the tail mass falls inside it.
pub fn tail_mean(profits: &[f64], probabilities: &[f64], alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..profits.len()).collect();
    order.sort_by(|&a, &b| profits[a].total_cmp(&profits[b]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut acc = 0.0;
    for &w in &order {
        let take = probabilities[w].min(alpha - mass);
        if take <= 0.0 {
            break;
        }
        acc += take * profits[w];
        mass += take;
    }
    acc / alpha
}

/// Value-at-risk: the smallest profit whose cumulative probability reaches
/// `alpha`. It maximizes `eta - E[(eta - profit)+] / alpha`.
pub fn value_at_risk(profits: &[f64], probabilities: &[f64], alpha: f64) -> f64 {
    let mut order: Vec<usize> = (0..profits.len()).collect();
    order.sort_by(|&a, &b| profits[a].total_cmp(&profits[b]).then(a.cmp(&b)));
    let mut mass = 0.0;
    for &w in &order {
        mass += probabilities[w];
        if mass >= alpha - 1e-12 {
            return profits[w];
        }
    }
    profits[*order.last().expect("at least one scenario")]
}

/// Per-scenario profits recomputed from first principles.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitReport {
    pub profits: Vec<f64>,
    pub expected: f64,
    pub cvar: f64,
    /// `eta - sum(pi s) / alpha` from the solution's own variables.
    pub cvar_from_solution: f64,
}

/// Recomputes prices, dispatch and profits from the offers and checks every
/// structural property of the solution.
pub fn evaluate_solution(solution: &OfferingSolution, problem: &OfferingProblem) -> Result<ProfitReport, OptimizerError> {
    let (nt, ni, nw) = (problem.hours(), problem.blocks(), problem.omega());
    let fail = |msg: String| Err(OptimizerError::Violation(msg));
    if solution.prices.len() != nt || solution.lambda.len() != nw || solution.accepted.len() != nw {
        return fail("dimensions differ from the problem".into());
    }
    for t in 0..nt {
        for i in 0..ni {
            let (lo, hi) = problem.price_bounds(t, i);
            let pv = solution.prices[t][i];
            if pv < lo - CHECK_TOL || pv > hi + CHECK_TOL {
                return fail(format!("P[{t}][{i}] = {pv} outside [{lo}, {hi}]"));
            }
            if i + 1 < ni && pv > solution.prices[t][i + 1] + CHECK_TOL {
                return fail(format!("offers not monotone at hour {t}, block {i}"));
            }
        }
    }
    let mut profits = Vec::with_capacity(nw);
    for w in 0..nw {
        let mut profit = 0.0;
        for t in 0..nt {
            let lam = problem.price_response(w, t, &solution.prices[t]);
            if (lam - solution.lambda[w][t]).abs() > CHECK_TOL * (1.0 + lam.abs()) {
                return fail(format!("lambda[{w}][{t}] = {} but response gives {lam}", solution.lambda[w][t]));
            }
            if lam < -CHECK_TOL || lam > problem.big_m + CHECK_TOL {
                return fail(format!("lambda[{w}][{t}] = {lam} outside [0, {}]", problem.big_m));
            }
            profit += lam * problem.exo.renewable[t];
            for i in 0..ni {
                let pv = solution.prices[t][i];
                let on = solution.accepted[w][t][i];
                // Clear price ordering decides; exact ties keep the
                // solver's choice.
                let cleared = if pv < lam - CHECK_TOL {
                    true
                } else if pv > lam + CHECK_TOL {
                    false
                } else {
                    on
                };
                if cleared != on {
                    return fail(format!("acceptance of block {i} at hour {t}, scenario {w} contradicts P vs lambda"));
                }
                let q = if cleared { problem.exo.q_max[t][i] } else { 0.0 };
                if (q - solution.dispatch[w][t][i]).abs() > CHECK_TOL * (1.0 + q) {
                    return fail(format!("dispatch of block {i} at hour {t}, scenario {w}"));
                }
                profit += (lam - problem.exo.cost[t][i]) * q;
            }
        }
        profits.push(profit);
    }
    let pi = &problem.scenarios.probabilities;
    let expected: f64 = profits.iter().zip(pi).map(|(p, w)| p * w).sum();
    let cvar = tail_mean(&profits, pi, problem.alpha);
    let cvar_from_solution =
        solution.eta - solution.shortfall.iter().zip(pi).map(|(s, w)| s * w).sum::<f64>() / problem.alpha;
    for w in 0..nw {
        if solution.shortfall[w] < solution.eta - profits[w] - CHECK_TOL * (1.0 + profits[w].abs()) {
            return fail(format!("shortfall of scenario {w} below eta - profit"));
        }
    }
    if cvar > expected + CHECK_TOL * (1.0 + expected.abs()) {
        return fail(format!("CVaR {cvar} above expected profit {expected}"));
    }
    Ok(ProfitReport {
        profits,
        expected,
        cvar,
        cvar_from_solution,
    })
}

fn extract(problem: &OfferingProblem, layout: &Layout, sol: &MilpSolution) -> OfferingSolution {
    let (nt, ni, nw) = (problem.hours(), problem.blocks(), problem.omega());
    let x = &sol.values;
    let prices: Vec<Vec<f64>> = (0..nt).map(|t| (0..ni).map(|i| x[layout.p(t, i).0]).collect()).collect();
    let mut lambda = Vec::with_capacity(nw);
    let mut accepted = Vec::with_capacity(nw);
    let mut dispatch = Vec::with_capacity(nw);
    for w in 0..nw {
        lambda.push((0..nt).map(|t| problem.price_response(w, t, &prices[t])).collect::<Vec<_>>());
        let acc: Vec<Vec<bool>> = (0..nt)
            .map(|t| (0..ni).map(|i| x[layout.u(w, t, i).0] > 0.5).collect())
            .collect();
        dispatch.push(
            (0..nt)
                .map(|t| (0..ni).map(|i| if acc[t][i] { problem.exo.q_max[t][i] } else { 0.0 }).collect())
                .collect(),
        );
        accepted.push(acc);
    }
    let mut out = OfferingSolution {
        status: sol.status,
        gap: sol.gap,
        prices,
        lambda,
        accepted,
        dispatch,
        eta: x[layout.eta.0],
        shortfall: layout.s.iter().map(|s| x[s.0]).collect(),
        objective: sol.objective,
        expected_profit: 0.0,
        cvar: 0.0,
        profits: Vec::new(),
        nodes: sol.nodes,
        elapsed: Duration::ZERO,
    };
    fill_profits(problem, &mut out);
    out
}

fn fill_profits(problem: &OfferingProblem, sol: &mut OfferingSolution) {
    let (nt, ni) = (problem.hours(), problem.blocks());
    sol.profits = (0..problem.omega())
        .map(|w| {
            (0..nt)
                .map(|t| {
                    let lam = sol.lambda[w][t];
                    lam * problem.exo.renewable[t]
                        + (0..ni)
                            .map(|i| (lam - problem.exo.cost[t][i]) * sol.dispatch[w][t][i])
                            .sum::<f64>()
                })
                .sum()
        })
        .collect();
    let pi = &problem.scenarios.probabilities;
    sol.expected_profit = sol.profits.iter().zip(pi).map(|(p, w)| p * w).sum();
    sol.cvar = tail_mean(&sol.profits, pi, problem.alpha);
}

/// Sets `eta` and the shortfalls to their optimal values for the current
/// profits.
fn settle_risk(problem: &OfferingProblem, sol: &mut OfferingSolution) {
    let pi = &problem.scenarios.probabilities;
    sol.eta = value_at_risk(&sol.profits, pi, problem.alpha);
    sol.shortfall = sol.profits.iter().map(|p| (sol.eta - p).max(0.0)).collect();
}

fn scalarized(problem: &OfferingProblem, sol: &OfferingSolution) -> f64 {
    let pi = &problem.scenarios.probabilities;
    let shortfall: f64 = sol.shortfall.iter().zip(pi).map(|(s, w)| s * w).sum();
    (1.0 - problem.chi) * sol.expected_profit + problem.chi * (sol.eta - shortfall / problem.alpha)
}

fn merge_hours(problem: &OfferingProblem, parts: Vec<OfferingSolution>) -> OfferingSolution {
    let nw = problem.omega();
    let mut status = SolveStatus::Optimal;
    let mut gap: f64 = 0.0;
    let mut nodes = 0;
    for p in &parts {
        if p.status != SolveStatus::Optimal {
            status = p.status;
        }
        gap = gap.max(p.gap);
        nodes += p.nodes;
    }
    let mut sol = OfferingSolution {
        status,
        gap,
        prices: parts.iter().map(|p| p.prices[0].clone()).collect(),
        lambda: (0..nw).map(|w| parts.iter().map(|p| p.lambda[w][0]).collect()).collect(),
        accepted: (0..nw).map(|w| parts.iter().map(|p| p.accepted[w][0].clone()).collect()).collect(),
        dispatch: (0..nw).map(|w| parts.iter().map(|p| p.dispatch[w][0].clone()).collect()).collect(),
        eta: 0.0,
        shortfall: vec![0.0; nw],
        objective: 0.0,
        expected_profit: 0.0,
        cvar: 0.0,
        profits: Vec::new(),
        nodes,
        elapsed: Duration::ZERO,
    };
    fill_profits(problem, &mut sol);
    settle_risk(problem, &mut sol);
    sol.objective = scalarized(problem, &sol);
    sol
}

fn solve_model(
    problem: &OfferingProblem,
    model: &ModelSpec,
    layout: &Layout,
    opts: &SolveOptions,
) -> Result<OfferingSolution, OptimizerError> {
    let sol = solve(model, opts);
    match sol.status {
        SolveStatus::Infeasible => Err(OptimizerError::Infeasible),
        s if !sol.has_incumbent() => Err(OptimizerError::NoIncumbent(s)),
        _ => Ok(extract(problem, layout, &sol)),
    }
}

/// Expected-profit optimum hour by hour; exact because without the CVaR
/// term the objective separates over hours.
fn optimize_by_hour(problem: &OfferingProblem, opts: &SolveOptions) -> Result<OfferingSolution, OptimizerError> {
    let start = Instant::now();
    let mut parts = Vec::with_capacity(problem.hours());
    for t in 0..problem.hours() {
        let hour = OfferingProblem {
            chi: 0.0,
            ..problem.restrict_hour(t)
        };
        let (model, layout) = build(&hour, false);
        let mut o = opts.clone();
        o.mip_start = None;
        o.time_limit = opts.time_limit.saturating_sub(start.elapsed());
        parts.push(solve_model(&hour, &model, &layout, &o)?);
    }
    Ok(merge_hours(problem, parts))
}

fn start_vector(problem: &OfferingProblem, layout: &Layout, n: usize, sol: &OfferingSolution) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for t in 0..problem.hours() {
        for i in 0..problem.blocks() {
            x[layout.p(t, i).0] = sol.prices[t][i];
        }
    }
    for w in 0..problem.omega() {
        for t in 0..problem.hours() {
            let lam = sol.lambda[w][t];
            x[layout.lambda(w, t).0] = lam;
            for i in 0..problem.blocks() {
                let on = sol.accepted[w][t][i];
                x[layout.u(w, t, i).0] = f64::from(u8::from(on));
                x[layout.z(w, t, i).0] = if on { lam } else { 0.0 };
                x[layout.q(w, t, i).0] = sol.dispatch[w][t][i];
            }
        }
        x[layout.s[w].0] = sol.shortfall[w];
    }
    x[layout.eta.0] = sol.eta;
    x
}

/// Solves the problem. Without a risk term the hours are solved one by
/// one; otherwise the full model is solved, started from the hourly
/// expected-profit optimum.
pub fn optimize(problem: &OfferingProblem, opts: &SolveOptions) -> Result<OfferingSolution, OptimizerError> {
    problem.validate()?;
    let start = Instant::now();
    let neutral = optimize_by_hour(problem, opts)?;
    if problem.chi == 0.0 {
        return Ok(OfferingSolution {
            elapsed: start.elapsed(),
            ..neutral
        });
    }
    let (model, layout) = build(problem, true);
    let mut o = opts.clone();
    o.mip_start = Some(start_vector(problem, &layout, model.num_variables(), &neutral));
    o.time_limit = opts.time_limit.saturating_sub(start.elapsed());
    let mut sol = solve_model(problem, &model, &layout, &o)?;
    sol.elapsed = start.elapsed();
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    /// Requested weight.
    pub chi: f64,
    /// Weight actually solved (endpoints substituted).
    pub chi_used: f64,
    pub expected_profit: f64,
    pub cvar: f64,
    pub objective: f64,
    pub status: SolveStatus,
}

/// One optimization per risk weight; the exact endpoints 0 and 1 are
/// replaced by [`CHI_ENDPOINTS`].
pub fn efficient_frontier(
    problem: &OfferingProblem,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<FrontierPoint>, OptimizerError> {
    grid.iter()
        .map(|&chi| {
            if !(0.0..=1.0).contains(&chi) {
                return Err(OptimizerError::Parameter("chi grid must lie in [0, 1]"));
            }
            let chi_used = if chi == 0.0 {
                CHI_ENDPOINTS.0
            } else if chi == 1.0 {
                CHI_ENDPOINTS.1
            } else {
                chi
            };
            let p = OfferingProblem {
                chi: chi_used,
                ..problem.clone()
            };
            let s = optimize(&p, opts)?;
            Ok(FrontierPoint {
                chi,
                chi_used,
                expected_profit: s.expected_profit,
                cvar: s.cvar,
                objective: s.objective,
                status: s.status,
            })
        })
        .collect()
}
