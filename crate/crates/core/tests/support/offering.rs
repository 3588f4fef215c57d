//! Random tiny offering instances and an exhaustive oracle: every
//! acceptance pattern `u` is fixed in turn and the remaining problem in the
//! offers, `eta` and the shortfalls is solved as an LP by an independent
//! solver. The price is substituted by its affine response.

use genco_core::optimizer::{OfferingProblem, MIN_PRICE};
use genco_core::scenarios::{ExogenousForecast, ScenarioSet};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_problem(seed: u64, max_hours: usize, max_blocks: usize, max_scenarios: usize) -> OfferingProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = rng.gen_range(1..=max_hours);
    let ni = rng.gen_range(1..=max_blocks);
    let nw = rng.gen_range(1..=max_scenarios);
    let mut cost = Vec::new();
    let mut sigma = Vec::new();
    let mut q_max = Vec::new();
    let mut d = Vec::new();
    let mut renewable = Vec::new();
    for _ in 0..nt {
        let mut c = rng.gen_range(20.0..40.0);
        let mut row = Vec::new();
        for _ in 0..ni {
            row.push(c);
            c += rng.gen_range(0.0..15.0);
        }
        let frac = [0.0, 0.05, 0.1, 0.15][rng.gen_range(0..4)];
        sigma.push(row.iter().map(|c| frac * c).collect());
        cost.push(row);
        q_max.push((0..ni).map(|_| rng.gen_range(100.0..2000.0)).collect());
        d.push(rng.gen_range(5.0..30.0));
        renewable.push(rng.gen_range(0.0..2000.0));
    }
    let exo = ExogenousForecast {
        intercept: rng.gen_range(5.0..15.0),
        renewable_coef: -rng.gen_range(0.0..0.002),
        d,
        renewable,
        q_max,
        cost,
        sigma,
    };
    let coefficients = (0..nw * nt * ni).map(|_| rng.gen_range(0.0..0.6)).collect();
    let scenarios = ScenarioSet {
        scenarios: nw,
        hours: nt,
        blocks: ni,
        coefficients,
        probabilities: vec![1.0 / nw as f64; nw],
        seed,
    };
    let chi = [0.0, 0.3, 0.7, 1.0][rng.gen_range(0..4)];
    let alpha = [0.1, 0.34, 0.5][rng.gen_range(0..3)];
    OfferingProblem::new(exo, scenarios, chi, alpha).unwrap()
}

/// Best objective over all acceptance patterns; None if none is feasible.
pub fn enumeration_oracle(p: &OfferingProblem) -> Option<f64> {
    let (nt, ni, nw) = (p.hours(), p.blocks(), p.omega());
    let bits = nt * ni * nw;
    assert!(bits <= 16, "oracle limited to tiny instances");
    let pi = &p.scenarios.probabilities;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bits) {
        let on = |w: usize, t: usize, i: usize| (mask >> ((w * nt + t) * ni + i)) & 1 == 1;
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        // Offers, then eta, then shortfalls. Objective coefficients are
        // accumulated first because microlp fixes them at creation.
        let mut c_p = vec![0.0; nt * ni];
        let mut constant = 0.0;
        // profit_w = const_w + sum_k g_w[k] P_k
        let mut prof_const = vec![0.0; nw];
        let mut prof_grad = vec![vec![0.0; nt * ni]; nw];
        for w in 0..nw {
            for t in 0..nt {
                let mut weight = p.exo.renewable[t];
                for i in 0..ni {
                    if on(w, t, i) {
                        weight += p.exo.q_max[t][i];
                        prof_const[w] -= p.exo.cost[t][i] * p.exo.q_max[t][i];
                    }
                }
                prof_const[w] += weight * p.base_price(t);
                for i in 0..ni {
                    prof_grad[w][t * ni + i] += weight * p.scenarios.beta(w, t, i);
                }
            }
            for k in 0..nt * ni {
                c_p[k] += (1.0 - p.chi) * pi[w] * prof_grad[w][k];
            }
            constant += (1.0 - p.chi) * pi[w] * prof_const[w];
        }
        let prices: Vec<_> = (0..nt * ni)
            .map(|k| {
                let (lo, hi) = p.price_bounds(k / ni, k % ni);
                lp.add_var(c_p[k], (lo.max(MIN_PRICE), hi))
            })
            .collect();
        let eta = lp.add_var(p.chi, (-1e9, 1e9));
        let s: Vec<_> = (0..nw).map(|w| lp.add_var(-p.chi * pi[w] / p.alpha, (0.0, 2e9))).collect();
        for t in 0..nt {
            for i in 0..ni.saturating_sub(1) {
                lp.add_constraint(&[(prices[t * ni + i], 1.0), (prices[t * ni + i + 1], -1.0)], ComparisonOp::Le, 0.0);
            }
        }
        for w in 0..nw {
            for t in 0..nt {
                // lambda - base = sum beta P, bounded to [0, M].
                let mut lam = LinearExpr::empty();
                for i in 0..ni {
                    lam.add(prices[t * ni + i], p.scenarios.beta(w, t, i));
                }
                let base = p.base_price(t);
                lp.add_constraint(lam.clone(), ComparisonOp::Ge, -base);
                lp.add_constraint(lam, ComparisonOp::Le, p.big_m - base);
                for i in 0..ni {
                    // on: P <= lambda; off: P >= lambda.
                    let mut diff = LinearExpr::empty();
                    for j in 0..ni {
                        let coef = if j == i { 1.0 } else { 0.0 } - p.scenarios.beta(w, t, j);
                        diff.add(prices[t * ni + j], coef);
                    }
                    let op = if on(w, t, i) { ComparisonOp::Le } else { ComparisonOp::Ge };
                    lp.add_constraint(diff, op, base);
                }
            }
            // s_w >= eta - profit_w
            let mut e = LinearExpr::empty();
            e.add(s[w], 1.0);
            e.add(eta, -1.0);
            for k in 0..nt * ni {
                e.add(prices[k], prof_grad[w][k]);
            }
            lp.add_constraint(e, ComparisonOp::Ge, -prof_const[w]);
        }
        let value = match lp.solve().ok().and_then(|o| o.solution().map(|s| s.objective())) {
            Some(v) => v + constant,
            None => continue,
        };
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    best
}
