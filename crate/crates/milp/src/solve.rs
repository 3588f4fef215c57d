//! Branch-and-bound over the dense simplex.
//!
//! The root problem is presolved (bound propagation, big-M coefficient
//! tightening, removal of fixed columns and redundant rows). The tree is
//! explored depth first; each child starts from a copy of its parent's
//! optimal tableau (within a memory budget), applies its bound changes and
//! re-optimises with the dual simplex. Branching picks the most fractional binary, lowest id on ties.

use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::lp::{LpRow, LpStatus, Tableau};
use crate::model::{Comparison, Integrality, ModelSpec, Sense};
use crate::presolve::{self, Presolved, Row};

const INT_TOL: f64 = 1e-6;
/// Memory allowed for warm-start tableaux held by open nodes. The deepest
/// nodes keep theirs; older ones restart from the all-logical basis.
const WARM_BUDGET_BYTES: usize = 512 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative optimality gap at which the search stops.
    pub relative_gap: f64,
    /// Absolute gap used when pruning nodes against the incumbent.
    pub absolute_gap: f64,
    pub time_limit: Duration,
    pub node_limit: Option<usize>,
    /// Tolerance used to accept a candidate solution against the model.
    pub feasibility_tol: f64,
    /// Optional starting point (full variable vector) used as a first
    /// incumbent when it is feasible.
    pub mip_start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            relative_gap: 1e-6,
            absolute_gap: 1e-9,
            time_limit: Duration::from_secs(1800),
            node_limit: None,
            feasibility_tol: 1e-6,
            mip_start: None,
        }
    }
}

impl SolveOptions {
    pub fn exact() -> Self {
        Self {
            relative_gap: 0.0,
            ..Self::default()
        }
    }

    pub fn with_gap(mut self, relative_gap: f64) -> Self {
        self.relative_gap = relative_gap;
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Stopped by the node limit or numerical trouble with a residual gap.
    GapLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Variable values in model order; empty when no incumbent was found.
    pub values: Vec<f64>,
    /// Objective in the model's own sense; NaN without an incumbent.
    pub objective: f64,
    /// Proven relative gap between incumbent and best bound.
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, id: crate::VarId) -> f64 {
        self.values[id.0]
    }
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
    warm: Option<Rc<Tableau>>,
}

struct Search<'a> {
    model: &'a ModelSpec,
    opts: &'a SolveOptions,
    red: Presolved,
    /// min-form incumbent objective and full value vector
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: usize,
    iterations: usize,
    /// smallest bound among nodes discarded by bound or left open
    pruned_bound: f64,
    numerical_trouble: bool,
}

fn min_form(model: &ModelSpec) -> Vec<f64> {
    let mut c = vec![0.0; model.num_variables()];
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for &(v, a) in model.objective() {
        c[v.0] += sign * a;
    }
    c
}

fn to_rows(model: &ModelSpec) -> Vec<Row> {
    model
        .constraints()
        .iter()
        .map(|c| {
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(v, a) in &c.terms {
                if let Some(t) = terms.iter_mut().find(|t| t.0 == v.0) {
                    t.1 += a;
                } else {
                    terms.push((v.0, a));
                }
            }
            terms.retain(|t| t.1 != 0.0);
            let (lo, hi) = match c.cmp {
                Comparison::Le => (f64::NEG_INFINITY, c.rhs),
                Comparison::Ge => (c.rhs, f64::INFINITY),
                Comparison::Eq => (c.rhs, c.rhs),
            };
            Row { terms, lo, hi }
        })
        .collect()
}

fn presolve_model(model: &ModelSpec) -> Option<Presolved> {
    let lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let is_int: Vec<bool> = model
        .variables()
        .iter()
        .map(|v| v.integrality == Integrality::Binary)
        .collect();
    presolve::presolve(&min_form(model), &lower, &upper, &is_int, to_rows(model))
}

/// Solves `model` to global optimality (within the configured gap).
/// Deterministic for a fixed model and options, barring the time limit.
pub fn solve(model: &ModelSpec, opts: &SolveOptions) -> MilpSolution {
    let start = Instant::now();
    let Some(red) = presolve_model(model) else {
        return MilpSolution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective: f64::NAN,
            gap: f64::INFINITY,
            nodes: 0,
            lp_iterations: 0,
        };
    };
    let mut search = Search {
        model,
        opts,
        red,
        incumbent: None,
        nodes: 0,
        iterations: 0,
        pruned_bound: f64::INFINITY,
        numerical_trouble: false,
    };
    if let Some(x0) = &opts.mip_start {
        search.try_mip_start(x0);
    }
    let status = search.run(start);
    search.finish(status)
}

/// Drops warm tableaux from the bottom of the stack once the distinct ones
/// above exceed the budget. Siblings share one tableau.
fn trim_warm_starts(stack: &mut [Node]) {
    let mut used = 0usize;
    let mut last: Option<*const Tableau> = None;
    for node in stack.iter_mut().rev() {
        let Some(rc) = &node.warm else { continue };
        let ptr = Rc::as_ptr(rc);
        if last == Some(ptr) {
            continue;
        }
        if used > 0 && used + rc.footprint() > WARM_BUDGET_BYTES {
            node.warm = None;
            continue;
        }
        used += rc.footprint();
        last = Some(ptr);
    }
}

impl<'a> Search<'a> {
    fn lp_rows(&self) -> Vec<LpRow> {
        self.red
            .rows
            .iter()
            .map(|r| LpRow {
                terms: r.terms.clone(),
                lo: r.lo,
                hi: r.hi,
            })
            .collect()
    }

    fn fresh_tableau(&self, lower: &[f64], upper: &[f64]) -> Tableau {
        Tableau::new(&self.red.cost, lower, upper, &self.lp_rows())
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.red.rows.len() + self.red.cols.len()) + 5000
    }

    /// `cost·x <= incumbent - tol` in the reduced space.
    fn cutoff_row(&self) -> Option<Row> {
        let (inc, _) = self.incumbent.as_ref()?;
        let terms: Vec<(usize, f64)> = self
            .red
            .cost
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, &c)| (k, c))
            .collect();
        if terms.is_empty() {
            return None;
        }
        Some(Row {
            terms,
            lo: f64::NEG_INFINITY,
            hi: inc - self.red.offset - self.prune_tol(),
        })
    }

    fn prune_tol(&self) -> f64 {
        let inc = self.incumbent.as_ref().map_or(0.0, |i| i.0);
        self.opts
            .absolute_gap
            .max(self.opts.relative_gap * inc.abs().max(1.0))
    }

    fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = self.red.postsolve(reduced);
        for (j, v) in self.model.variables().iter().enumerate() {
            if v.integrality == Integrality::Binary {
                full[j] = full[j].round();
            }
            full[j] = full[j].clamp(v.lower, v.upper);
        }
        full
    }

    /// Offers a full candidate vector; keeps it if feasible and better.
    fn offer(&mut self, full: Vec<f64>) -> bool {
        if self.model.max_violation(&full) > self.opts.feasibility_tol {
            return false;
        }
        let obj: f64 = min_form(self.model)
            .iter()
            .zip(&full)
            .map(|(c, x)| c * x)
            .sum();
        match &self.incumbent {
            Some((best, _)) if *best <= obj => false,
            _ => {
                self.incumbent = Some((obj, full));
                true
            }
        }
    }

    /// Fixes the binaries of `tab` to the rounded `point` and re-optimises
    /// the continuous part.
    fn polish(&mut self, mut tab: Tableau, point: &[f64]) -> bool {
        for k in 0..self.red.cols.len() {
            if self.red.is_int[k] {
                let v = point[k].round();
                let (lo, hi) = tab.bounds(k);
                if v < lo - INT_TOL || v > hi + INT_TOL {
                    return false;
                }
                tab.set_bounds(k, v, v);
            }
        }
        let status = tab.solve(self.iteration_cap());
        self.iterations += tab.iterations;
        if status != LpStatus::Optimal {
            return false;
        }
        let full = self.expand(tab.values());
        self.offer(full)
    }

    fn try_mip_start(&mut self, x0: &[f64]) {
        if x0.len() != self.model.num_variables() {
            return;
        }
        let mut lower = self.red.lower.clone();
        let mut upper = self.red.upper.clone();
        for (k, &j) in self.red.cols.iter().enumerate() {
            if self.red.is_int[k] {
                let v = x0[j].round().clamp(lower[k], upper[k]);
                lower[k] = v;
                upper[k] = v;
            }
        }
        if presolve::propagate(&self.red.rows, &mut lower, &mut upper, &self.red.is_int, 20).is_ok() {
            let mut tab = self.fresh_tableau(&lower, &upper);
            let status = tab.solve(self.iteration_cap());
            self.iterations += tab.iterations;
            if status == LpStatus::Optimal {
                let full = self.expand(tab.values());
                if self.offer(full) {
                    return;
                }
            }
        }
        self.offer(x0.to_vec());
    }

    fn run(&mut self, start: Instant) -> SolveStatus {
        let mut stack = vec![Node {
            lower: self.red.lower.clone(),
            upper: self.red.upper.clone(),
            bound: f64::NEG_INFINITY,
            warm: None,
        }];
        let mut root = true;
        while let Some(node) = stack.pop() {
            if start.elapsed() > self.opts.time_limit {
                self.pruned_bound = self.pruned_bound.min(node.bound);
                for n in &stack {
                    self.pruned_bound = self.pruned_bound.min(n.bound);
                }
                return SolveStatus::TimeLimit;
            }
            if let Some(limit) = self.opts.node_limit {
                if self.nodes >= limit {
                    self.pruned_bound = self.pruned_bound.min(node.bound);
                    for n in &stack {
                        self.pruned_bound = self.pruned_bound.min(n.bound);
                    }
                    return SolveStatus::GapLimit;
                }
            }
            if let Some((inc, _)) = &self.incumbent {
                if node.bound >= inc - self.prune_tol() {
                    self.pruned_bound = self.pruned_bound.min(node.bound);
                    continue;
                }
            }
            self.nodes += 1;
            let Node {
                mut lower,
                mut upper,
                bound: parent_bound,
                warm,
            } = node;
            let cutoff = self.cutoff_row();
            if presolve::propagate_with(&self.red.rows, cutoff.as_ref(), &mut lower, &mut upper, &self.red.is_int, 8)
                .is_err()
            {
                continue;
            }
            let mut tab = match warm {
                Some(rc) => Rc::try_unwrap(rc).unwrap_or_else(|rc| (*rc).clone()),
                None => self.fresh_tableau(&lower, &upper),
            };
            for k in 0..lower.len() {
                if tab.bounds(k) != (lower[k], upper[k]) {
                    tab.set_bounds(k, lower[k], upper[k]);
                }
            }
            tab.iterations = 0;
            let mut status = tab.solve(self.iteration_cap());
            self.iterations += tab.iterations;
            if status == LpStatus::IterationLimit {
                tab = self.fresh_tableau(&lower, &upper);
                status = tab.solve(self.iteration_cap() * 4);
                self.iterations += tab.iterations;
            }
            match status {
                LpStatus::Infeasible => continue,
                LpStatus::IterationLimit => {
                    self.numerical_trouble = true;
                    self.pruned_bound = self.pruned_bound.min(parent_bound);
                    continue;
                }
                LpStatus::Optimal => {}
            }
            let obj = tab.objective() + self.red.offset;
            if let Some((inc, _)) = &self.incumbent {
                if obj >= inc - self.prune_tol() {
                    self.pruned_bound = self.pruned_bound.min(obj);
                    continue;
                }
            }
            if let Some((inc, _)) = &self.incumbent {
                // Reduced-cost fixing: moving a binary off its bound costs at
                // least |d|, which may already exceed the incumbent.
                let limit = inc - self.prune_tol() - obj;
                for k in 0..lower.len() {
                    if !self.red.is_int[k] || lower[k] == upper[k] {
                        continue;
                    }
                    match tab.reduced_cost(k) {
                        (d, Some(true)) if d > limit => upper[k] = lower[k],
                        (d, Some(false)) if -d > limit => lower[k] = upper[k],
                        _ => {}
                    }
                }
            }
            let x = tab.values().to_vec();
            // Most fractional binary, lowest index on ties.
            let mut branch: Option<(usize, f64)> = None;
            for k in 0..x.len() {
                if !self.red.is_int[k] {
                    continue;
                }
                let frac = x[k] - x[k].floor();
                if frac <= INT_TOL || frac >= 1.0 - INT_TOL {
                    continue;
                }
                let score = (frac - 0.5).abs();
                if branch.is_none_or(|(_, best)| score < best - 1e-12) {
                    branch = Some((k, score));
                }
            }
            let Some((k, _)) = branch else {
                self.polish(tab, &x);
                continue;
            };
            if root {
                // Cheap rounding heuristic for a first incumbent.
                self.polish(tab.clone(), &x);
                root = false;
            }
            let up_first = x[k] - x[k].floor() >= 0.5;
            let warm = Rc::new(tab);
            let mut down = Node {
                lower: lower.clone(),
                upper: upper.clone(),
                bound: obj,
                warm: Some(warm.clone()),
            };
            down.upper[k] = 0.0;
            let mut up = Node {
                lower,
                upper,
                bound: obj,
                warm: Some(warm),
            };
            up.lower[k] = 1.0;
            if up_first {
                stack.push(down);
                stack.push(up);
            } else {
                stack.push(up);
                stack.push(down);
            }
            trim_warm_starts(&mut stack);
        }
        if self.numerical_trouble {
            SolveStatus::GapLimit
        } else {
            SolveStatus::Optimal
        }
    }

    fn finish(self, status: SolveStatus) -> MilpSolution {
        let Some((inc, values)) = self.incumbent else {
            let status = match status {
                SolveStatus::Optimal => SolveStatus::Infeasible,
                other => other,
            };
            return MilpSolution {
                status,
                values: Vec::new(),
                objective: f64::NAN,
                gap: f64::INFINITY,
                nodes: self.nodes,
                lp_iterations: self.iterations,
            };
        };
        let bound = self.pruned_bound.min(inc);
        let gap = ((inc - bound) / inc.abs().max(1.0)).max(0.0);
        let status = match status {
            SolveStatus::Optimal if gap > self.opts.relative_gap.max(1e-9) => SolveStatus::GapLimit,
            s => s,
        };
        let objective = self.model.objective_value(&values);
        MilpSolution {
            status,
            objective,
            values,
            gap,
            nodes: self.nodes,
            lp_iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Integrality::*, VarId};

    #[test]
    fn single_bound_max() {
        let mut m = ModelSpec::new(Sense::Maximize);
        let x = m.add_variable("x", 0.0, 10.0, Continuous).unwrap();
        m.add_constraint("c", vec![(x, 1.0)], Comparison::Le, 7.0).unwrap();
        m.set_objective(Sense::Maximize, vec![(x, 1.0)]).unwrap();
        let s = solve(&m, &SolveOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 7.0).abs() < 1e-9);
    }

    #[test]
    fn counting_binaries() {
        let mut m = ModelSpec::new(Sense::Minimize);
        let xs: Vec<VarId> = (0..5)
            .map(|i| m.add_variable(format!("x{i}"), 0.0, 1.0, Binary).unwrap())
            .collect();
        m.add_constraint("atleast3", xs.iter().map(|&x| (x, 1.0)).collect(), Comparison::Ge, 3.0)
            .unwrap();
        m.set_objective(Sense::Minimize, xs.iter().map(|&x| (x, 1.0)).collect())
            .unwrap();
        let s = solve(&m, &SolveOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = ModelSpec::new(Sense::Maximize);
        let a = m.add_variable("a", 0.0, 1.0, Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, Binary).unwrap();
        let c = m.add_variable("c", 0.0, 1.0, Binary).unwrap();
        m.add_constraint("k", vec![(a, 6.0), (b, 5.0), (c, 4.0)], Comparison::Le, 9.5)
            .unwrap();
        m.set_objective(Sense::Maximize, vec![(a, 5.0), (b, 4.0), (c, 3.0)])
            .unwrap();
        let s = solve(&m, &SolveOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        // {b, c} = 7 beats {a} = 5 and {a, c} violates.
        assert!((s.objective - 7.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_status() {
        let mut m = ModelSpec::new(Sense::Minimize);
        let x = m.add_variable("x", 0.0, 1.0, Binary).unwrap();
        let y = m.add_variable("y", 0.0, 1.0, Binary).unwrap();
        m.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Comparison::Eq, 1.5).unwrap();
        let s = solve(&m, &SolveOptions::default());
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(!s.has_incumbent());
    }

    #[test]
    fn mip_start_is_used_and_improved() {
        let mut m = ModelSpec::new(Sense::Maximize);
        let a = m.add_variable("a", 0.0, 1.0, Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, Binary).unwrap();
        m.add_constraint("k", vec![(a, 1.0), (b, 1.0)], Comparison::Le, 1.0).unwrap();
        m.set_objective(Sense::Maximize, vec![(a, 1.0), (b, 2.0)]).unwrap();
        let opts = SolveOptions {
            mip_start: Some(vec![1.0, 0.0]),
            ..SolveOptions::default()
        };
        let s = solve(&m, &opts);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }
}
