//! Step-wise supply curves and their optimal discretization into a small
//! number of price groups.
//!
//! A curve is a price-ordered list of steps. Discretization replaces the
//! step prices with `k` contiguous groups, each carrying one price, so that
//! the quantity-weighted absolute price error is minimal. Two solvers are
//! provided: an exact dynamic program (the production path) and the
//! equivalent mixed-integer program solved with `genco-milp`.

use std::fmt;

use chrono::NaiveDateTime;
use genco_milp::{solve, Comparison, Integrality, ModelSpec, Sense, SolveOptions, SolveStatus, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default market price cap in EUR/MWh.
pub const DEFAULT_PRICE_CAP: f64 = 180.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("supply curve has no blocks")]
    Empty,
    #[error("block quantity must be strictly positive, got {0}")]
    NonPositiveQuantity(f64),
    #[error("block price {price} outside [0, {cap}]")]
    PriceOutOfRange { price: f64, cap: f64 },
    #[error("non-finite value in offer block")]
    NonFinite,
    #[error("cannot form {groups} groups from {blocks} blocks")]
    TooManyGroups { groups: usize, blocks: usize },
    #[error("number of groups must be at least 1")]
    ZeroGroups,
    #[error("curve steps are not sorted by price")]
    Unsorted,
    #[error("discretization solver stopped with status {0:?}")]
    Solver(SolveStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Genco,
    Competitor,
}

impl Owner {
    pub fn as_str(self) -> &'static str {
        match self {
            Owner::Genco => "genco",
            Owner::Competitor => "competitor",
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Owner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genco" => Ok(Owner::Genco),
            "competitor" => Ok(Owner::Competitor),
            other => Err(format!("unknown owner `{other}`")),
        }
    }
}

/// One unit's offer for one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferBlock {
    pub timestamp: NaiveDateTime,
    pub owner: Owner,
    pub unit_id: String,
    pub price: f64,
    pub quantity: f64,
}

impl OfferBlock {
    pub fn new(
        timestamp: NaiveDateTime,
        owner: Owner,
        unit_id: impl Into<String>,
        price: f64,
        quantity: f64,
        price_cap: f64,
    ) -> Result<Self, CurveError> {
        if !price.is_finite() || !quantity.is_finite() {
            return Err(CurveError::NonFinite);
        }
        if quantity <= 0.0 {
            return Err(CurveError::NonPositiveQuantity(quantity));
        }
        if price < 0.0 || price > price_cap {
            return Err(CurveError::PriceOutOfRange { price, cap: price_cap });
        }
        Ok(Self {
            timestamp,
            owner,
            unit_id: unit_id.into(),
            price,
            quantity,
        })
    }

    pub fn step(&self) -> Step {
        Step {
            price: self.price,
            quantity: self.quantity,
            owner: self.owner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub price: f64,
    pub quantity: f64,
    pub owner: Owner,
}

impl Step {
    pub fn new(price: f64, quantity: f64, owner: Owner) -> Self {
        Self { price, quantity, owner }
    }
}

/// Price-ordered steps with cumulative quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SteppedSupplyCurve {
    steps: Vec<Step>,
    cumulative: Vec<f64>,
}

fn sort_steps(steps: &mut [Step]) {
    // Stable: equal prices keep genco first, then input order.
    steps.sort_by(|a, b| a.price.total_cmp(&b.price).then(a.owner.cmp(&b.owner)));
}

impl SteppedSupplyCurve {
    /// Sorts `steps` by price and accumulates quantities. Equal-price steps
    /// are kept as separate entries, genco first, otherwise in input order.
    pub fn from_steps(mut steps: Vec<Step>) -> Result<Self, CurveError> {
        if steps.is_empty() {
            return Err(CurveError::Empty);
        }
        for s in &steps {
            if !s.price.is_finite() || !s.quantity.is_finite() {
                return Err(CurveError::NonFinite);
            }
            if s.quantity <= 0.0 {
                return Err(CurveError::NonPositiveQuantity(s.quantity));
            }
        }
        sort_steps(&mut steps);
        let mut acc = 0.0;
        let cumulative = steps
            .iter()
            .map(|s| {
                acc += s.quantity;
                acc
            })
            .collect();
        Ok(Self { steps, cumulative })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn prices(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.price).collect()
    }

    pub fn quantities(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.quantity).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_quantity(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Offered quantity at price `p`: all steps priced below `p` plus half
    /// of those priced exactly at `p`.
    pub fn quantity_at_price(&self, p: f64) -> f64 {
        self.steps
            .iter()
            .map(|s| {
                if s.price < p {
                    s.quantity
                } else if s.price == p {
                    0.5 * s.quantity
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Builds the curve of one hour from unit offers.
pub fn build_curve(offers: &[OfferBlock]) -> Result<SteppedSupplyCurve, CurveError> {
    SteppedSupplyCurve::from_steps(offers.iter().map(OfferBlock::step).collect())
}

/// Merges several curves into one, keeping per-step owners.
pub fn aggregate(curves: &[SteppedSupplyCurve]) -> Result<SteppedSupplyCurve, CurveError> {
    if curves.is_empty() {
        return Err(CurveError::Empty);
    }
    let steps = curves.iter().flat_map(|c| c.steps.iter().copied()).collect();
    SteppedSupplyCurve::from_steps(steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationResult {
    /// Exclusive end index of each group; the last entry is the block count.
    pub boundaries: Vec<usize>,
    /// One price per group, non-decreasing.
    pub prices: Vec<f64>,
    /// Sum of member quantities per group.
    pub quantities: Vec<f64>,
    /// Quantity-weighted absolute price error, in EUR.
    pub error: f64,
}

impl DiscretizationResult {
    pub fn groups(&self) -> usize {
        self.prices.len()
    }

    /// Half-open block ranges of each group.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.boundaries
            .iter()
            .map(|&end| {
                let r = start..end;
                start = end;
                r
            })
            .collect()
    }

    /// Discretized curve with all groups attributed to `owner`.
    pub fn to_curve(&self, owner: Owner) -> SteppedSupplyCurve {
        let steps = self
            .prices
            .iter()
            .zip(&self.quantities)
            .map(|(&p, &q)| Step::new(p, q, owner))
            .collect();
        SteppedSupplyCurve::from_steps(steps).expect("groups have positive quantity")
    }
}

fn check_groups(curve: &SteppedSupplyCurve, groups: usize) -> Result<(), CurveError> {
    if curve.is_empty() {
        return Err(CurveError::Empty);
    }
    if groups == 0 {
        return Err(CurveError::ZeroGroups);
    }
    if groups > curve.len() {
        return Err(CurveError::TooManyGroups {
            groups,
            blocks: curve.len(),
        });
    }
    if curve.steps.windows(2).any(|w| w[0].price > w[1].price) {
        return Err(CurveError::Unsorted);
    }
    Ok(())
}

/// Weighted lower median of `prices[a..b]` (sorted) and the resulting
/// L1 cost, using prefix sums of weights and weighted prices.
struct SegmentCosts<'a> {
    prices: &'a [f64],
    w: Vec<f64>,
    wp: Vec<f64>,
}

impl<'a> SegmentCosts<'a> {
    fn new(prices: &'a [f64], quantities: &[f64]) -> Self {
        let mut w = vec![0.0; prices.len() + 1];
        let mut wp = vec![0.0; prices.len() + 1];
        for i in 0..prices.len() {
            w[i + 1] = w[i] + quantities[i];
            wp[i + 1] = wp[i] + quantities[i] * prices[i];
        }
        Self { prices, w, wp }
    }

    /// Cost of `[a, b)` priced at the block `k` inside it.
    fn cost_at(&self, a: usize, b: usize, k: usize) -> f64 {
        let c = self.prices[k];
        let left = c * (self.w[k + 1] - self.w[a]) - (self.wp[k + 1] - self.wp[a]);
        let right = (self.wp[b] - self.wp[k + 1]) - c * (self.w[b] - self.w[k + 1]);
        (left + right).max(0.0)
    }

    /// First index `k` in `[from, b)` whose cumulative weight reaches half
    /// the segment weight.
    fn median_from(&self, a: usize, b: usize, from: usize) -> usize {
        let half = 0.5 * (self.w[b] - self.w[a]);
        let mut k = from.max(a);
        while k + 1 < b && self.w[k + 1] - self.w[a] < half {
            k += 1;
        }
        k
    }
}

/// Exact discretization by dynamic programming over contiguous partitions.
/// Each group is priced at its quantity-weighted lower median.
pub fn discretize_dp(curve: &SteppedSupplyCurve, groups: usize) -> Result<DiscretizationResult, CurveError> {
    check_groups(curve, groups)?;
    let prices = curve.prices();
    let quantities = curve.quantities();
    let n = prices.len();
    let seg = SegmentCosts::new(&prices, &quantities);
    // cost[a][b] for b > a, median index alongside.
    let mut cost = vec![vec![0.0; n + 1]; n];
    let mut median = vec![vec![0usize; n + 1]; n];
    for a in 0..n {
        let mut k = a;
        for b in a + 1..=n {
            k = seg.median_from(a, b, k);
            median[a][b] = k;
            cost[a][b] = seg.cost_at(a, b, k);
        }
    }
    // best[g][b]: minimal cost of covering the first b blocks with g groups.
    let inf = f64::INFINITY;
    let mut best = vec![vec![inf; n + 1]; groups + 1];
    let mut back = vec![vec![0usize; n + 1]; groups + 1];
    best[0][0] = 0.0;
    for g in 1..=groups {
        for b in g..=n {
            for a in g - 1..b {
                let v = best[g - 1][a] + cost[a][b];
                if v < best[g][b] {
                    best[g][b] = v;
                    back[g][b] = a;
                }
            }
        }
    }
    let mut boundaries = vec![0usize; groups];
    let mut b = n;
    for g in (1..=groups).rev() {
        boundaries[g - 1] = b;
        b = back[g][b];
    }
    let mut start = 0;
    let mut group_prices = Vec::with_capacity(groups);
    let mut group_q = Vec::with_capacity(groups);
    for &end in &boundaries {
        group_prices.push(prices[median[start][end]]);
        group_q.push(quantities[start..end].iter().sum());
        start = end;
    }
    Ok(DiscretizationResult {
        boundaries,
        prices: group_prices,
        quantities: group_q,
        error: best[groups][n],
    })
}

/// Builds the discretization model: one price variable per block, an
/// absolute-error variable per block and a cut indicator between adjacent
/// blocks. Prices may only rise across a cut, and exactly `groups - 1`
/// cuts are made.
const PAIR_WINDOW: usize = 6;

pub fn discretization_model(
    curve: &SteppedSupplyCurve,
    groups: usize,
) -> Result<(ModelSpec, Vec<VarId>, Vec<VarId>), CurveError> {
    check_groups(curve, groups)?;
    let prices = curve.prices();
    let quantities = curve.quantities();
    let n = prices.len();
    let lo = prices[0];
    let hi = prices[n - 1];
    let big_m = hi - lo;
    let mut m = ModelSpec::new(Sense::Minimize);
    let add = |m: &mut ModelSpec, name: String, l: f64, u: f64, kind| m.add_variable(name, l, u, kind).expect("finite bounds");
    let c: Vec<VarId> = (0..n)
        .map(|b| add(&mut m, format!("C_{b}"), lo, hi, Integrality::Continuous))
        .collect();
    let e: Vec<VarId> = (0..n)
        .map(|b| add(&mut m, format!("e_{b}"), 0.0, big_m, Integrality::Continuous))
        .collect();
    let delta: Vec<VarId> = (1..n)
        .map(|b| add(&mut m, format!("delta_{b}"), 0.0, 1.0, Integrality::Binary))
        .collect();
    let row = |m: &mut ModelSpec, name: String, terms: Vec<(VarId, f64)>, cmp, rhs: f64| {
        m.add_constraint(name, terms, cmp, rhs).expect("declared variables");
    };
    for b in 0..n {
        row(&mut m, format!("abs_hi_{b}"), vec![(e[b], 1.0), (c[b], -1.0)], Comparison::Ge, -prices[b]);
        row(&mut m, format!("abs_lo_{b}"), vec![(e[b], 1.0), (c[b], 1.0)], Comparison::Ge, prices[b]);
    }
    // The first block is anchored at the minimum price: 0 <= C_0 - min <= M
    // holds through the bounds of C_0.
    for b in 1..n {
        row(&mut m, format!("mono_{b}"), vec![(c[b], 1.0), (c[b - 1], -1.0)], Comparison::Ge, 0.0);
        row(
            &mut m,
            format!("step_{b}"),
            vec![(c[b], 1.0), (c[b - 1], -1.0), (delta[b - 1], -big_m)],
            Comparison::Le,
            0.0,
        );
    }
    // Valid inequalities: blocks a < b in one group share a price, so
    // e_a + e_b >= P_b - P_a unless a cut separates them.
    for b in 1..n {
        for a in b.saturating_sub(PAIR_WINDOW)..b {
            let gap = prices[b] - prices[a];
            if gap <= 0.0 {
                continue;
            }
            let mut terms = vec![(e[a], 1.0), (e[b], 1.0)];
            terms.extend((a + 1..=b).map(|k| (delta[k - 1], gap)));
            row(&mut m, format!("pair_{a}_{b}"), terms, Comparison::Ge, gap);
        }
    }
    row(
        &mut m,
        "cuts".into(),
        delta.iter().map(|&d| (d, 1.0)).collect(),
        Comparison::Eq,
        (groups - 1) as f64,
    );
    let objective = e.iter().zip(&quantities).map(|(&v, &q)| (v, q)).collect();
    m.set_objective(Sense::Minimize, objective).expect("declared variables");
    Ok((m, c, delta))
}

/// Discretization through the mixed-integer model, solved to optimality.
pub fn discretize(curve: &SteppedSupplyCurve, groups: usize) -> Result<DiscretizationResult, CurveError> {
    let (model, c, delta) = discretization_model(curve, groups)?;
    let n = curve.len();
    let mut opts = SolveOptions::exact();
    // Start from the dynamic-programming partition.
    if let Ok(dp) = discretize_dp(curve, groups) {
        let mut x0 = vec![0.0; model.num_variables()];
        let prices = curve.prices();
        for (g, r) in dp.ranges().into_iter().enumerate() {
            for b in r.clone() {
                x0[c[b].0] = dp.prices[g];
                x0[n + b] = (dp.prices[g] - prices[b]).abs();
            }
            if r.start > 0 {
                x0[delta[r.start - 1].0] = 1.0;
            }
        }
        opts.mip_start = Some(x0);
    }
    let sol = solve(&model, &opts);
    if sol.status != SolveStatus::Optimal {
        return Err(CurveError::Solver(sol.status));
    }
    let mut boundaries = Vec::with_capacity(groups);
    for b in 1..n {
        if sol.values[delta[b - 1].0] > 0.5 {
            boundaries.push(b);
        }
    }
    boundaries.push(n);
    let prices = curve.prices();
    let quantities = curve.quantities();
    let mut start = 0;
    let mut group_prices = Vec::with_capacity(groups);
    let mut group_q = Vec::with_capacity(groups);
    let mut error = 0.0;
    for &end in &boundaries {
        let price = sol.values[c[start].0];
        for b in start..end {
            error += quantities[b] * (price - prices[b]).abs();
        }
        group_prices.push(price);
        group_q.push(quantities[start..end].iter().sum());
        start = end;
    }
    Ok(DiscretizationResult {
        boundaries,
        prices: group_prices,
        quantities: group_q,
        error,
    })
}

/// Error of an arbitrary contiguous partition priced at weighted medians.
pub fn partition_error(curve: &SteppedSupplyCurve, boundaries: &[usize]) -> f64 {
    let prices = curve.prices();
    let quantities = curve.quantities();
    let seg = SegmentCosts::new(&prices, &quantities);
    let mut start = 0;
    let mut total = 0.0;
    for &end in boundaries {
        let k = seg.median_from(start, end, start);
        total += seg.cost_at(start, end, k);
        start = end;
    }
    total
}
