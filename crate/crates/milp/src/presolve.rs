//! Activity-based bound propagation and big-M coefficient tightening.

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Infeasible;

fn activity_range(row: &Row, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut min = 0.0;
    let mut max = 0.0;
    for &(j, a) in &row.terms {
        if a > 0.0 {
            min += a * lower[j];
            max += a * upper[j];
        } else {
            min += a * upper[j];
            max += a * lower[j];
        }
    }
    (min, max)
}

fn slack_tol(v: f64) -> f64 {
    1e-7 * (1.0 + v.abs())
}

/// True when the row can never be violated under the given bounds.
pub(crate) fn is_redundant(row: &Row, lower: &[f64], upper: &[f64]) -> bool {
    let (min, max) = activity_range(row, lower, upper);
    min >= row.lo - slack_tol(row.lo) * 1e-2 && max <= row.hi + slack_tol(row.hi) * 1e-2
}

/// Tightens `lower`/`upper` until a fixpoint (or `max_passes`). Binary
/// bounds are rounded. Returns whether anything changed.
pub(crate) fn propagate(
    rows: &[Row],
    lower: &mut [f64],
    upper: &mut [f64],
    is_int: &[bool],
    max_passes: usize,
) -> Result<bool, Infeasible> {
    propagate_with(rows, None, lower, upper, is_int, max_passes)
}

/// As [`propagate`], with one extra row (typically an objective cutoff).
pub(crate) fn propagate_with(
    rows: &[Row],
    extra: Option<&Row>,
    lower: &mut [f64],
    upper: &mut [f64],
    is_int: &[bool],
    max_passes: usize,
) -> Result<bool, Infeasible> {
    let mut any = false;
    for _ in 0..max_passes {
        let mut changed = false;
        for row in rows.iter().chain(extra) {
            let (min, max) = activity_range(row, lower, upper);
            if min > row.hi + slack_tol(row.hi) || max < row.lo - slack_tol(row.lo) {
                return Err(Infeasible);
            }
            let use_hi = row.hi.is_finite() && max > row.hi;
            let use_lo = row.lo.is_finite() && min < row.lo;
            if !use_hi && !use_lo {
                continue;
            }
            for &(k, a) in &row.terms {
                if a == 0.0 || lower[k] == upper[k] {
                    continue;
                }
                let (lk, uk) = (lower[k], upper[k]);
                let (min_k, max_k) = if a > 0.0 { (a * lk, a * uk) } else { (a * uk, a * lk) };
                let mut new_lo = lk;
                let mut new_up = uk;
                if use_hi {
                    let bound = (row.hi - (min - min_k)) / a;
                    if a > 0.0 {
                        new_up = new_up.min(bound);
                    } else {
                        new_lo = new_lo.max(bound);
                    }
                }
                if use_lo {
                    let bound = (row.lo - (max - max_k)) / a;
                    if a > 0.0 {
                        new_lo = new_lo.max(bound);
                    } else {
                        new_up = new_up.min(bound);
                    }
                }
                if is_int[k] {
                    new_lo = (new_lo - INT_TOL).ceil().max(lk);
                    new_up = (new_up + INT_TOL).floor().min(uk);
                } else {
                    // Only accept meaningful improvements.
                    let span = (uk - lk).max(1.0);
                    if new_lo <= lk + 1e-6 * span {
                        new_lo = lk;
                    }
                    if new_up >= uk - 1e-6 * span {
                        new_up = uk;
                    }
                }
                if new_lo > new_up {
                    if new_lo - new_up > 1e-6 * (1.0 + new_up.abs()) || is_int[k] {
                        return Err(Infeasible);
                    }
                    let mid = 0.5 * (new_lo + new_up);
                    new_lo = mid;
                    new_up = mid;
                }
                if new_lo != lk || new_up != uk {
                    lower[k] = new_lo;
                    upper[k] = new_up;
                    changed = true;
                }
            }
        }
        any |= changed;
        if !changed {
            break;
        }
    }
    Ok(any)
}

/// Strengthens coefficients of binary columns in one-sided rows
/// (`a x <= b` or `a x >= b`) so the LP relaxation is as tight as the
/// current bounds allow. The integer-feasible set is unchanged.
pub(crate) fn tighten_coefficients(rows: &mut [Row], lower: &[f64], upper: &[f64], is_int: &[bool]) {
    for row in rows.iter_mut() {
        let negate = match (row.lo.is_finite(), row.hi.is_finite()) {
            (false, true) => false,
            (true, false) => true,
            _ => continue,
        };
        if negate {
            for t in row.terms.iter_mut() {
                t.1 = -t.1;
            }
            row.hi = -row.lo;
            row.lo = f64::NEG_INFINITY;
        }
        for idx in 0..row.terms.len() {
            let (k, a) = row.terms[idx];
            if !is_int[k] || lower[k] != 0.0 || upper[k] != 1.0 || a == 0.0 {
                continue;
            }
            let mut max_rest = 0.0;
            for (p, &(j, c)) in row.terms.iter().enumerate() {
                if p != idx {
                    max_rest += if c > 0.0 { c * upper[j] } else { c * lower[j] };
                }
            }
            let b = row.hi;
            let eps = 1e-9 * (1.0 + b.abs());
            if a < 0.0 {
                // x_k = 1 leaves slack when max_rest < b - a.
                if max_rest > b + eps && max_rest < b - a - eps {
                    row.terms[idx].1 = b - max_rest;
                }
            } else {
                let d = b - max_rest;
                if d > eps && a > d + eps {
                    row.terms[idx].1 = a - d;
                    row.hi = b - d;
                }
            }
        }
        if negate {
            for t in row.terms.iter_mut() {
                t.1 = -t.1;
            }
            row.lo = -row.hi;
            row.hi = f64::INFINITY;
        }
    }
}

/// Reduced problem plus the information needed to map its solutions back.
#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    /// reduced column -> original column
    pub cols: Vec<usize>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub is_int: Vec<bool>,
    pub rows: Vec<Row>,
    /// Objective constant picked up from fixed and substituted columns.
    pub offset: f64,
    n_original: usize,
    /// Values of columns fixed during presolve (NaN when not fixed).
    fixed: Vec<f64>,
    /// Substitutions in the order they were made; undone in reverse.
    stack: Vec<Substitution>,
}

#[derive(Debug, Clone)]
struct Substitution {
    col: usize,
    /// x_col = constant + sum coef * x_k
    constant: f64,
    terms: Vec<(usize, f64)>,
}

/// Largest equality row used to eliminate a column.
const MAX_SUB_TERMS: usize = 8;
/// Largest number of rows a substituted column may touch.
const MAX_SUB_ROWS: usize = 64;

fn add_term(terms: &mut Vec<(usize, f64)>, j: usize, a: f64) {
    if let Some(t) = terms.iter_mut().find(|t| t.0 == j) {
        t.1 += a;
    } else {
        terms.push((j, a));
    }
}

fn clean_terms(terms: &mut Vec<(usize, f64)>) {
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
    terms.retain(|t| t.1.abs() > 1e-12 * scale.max(1e-300) && t.1 != 0.0);
}

struct Work {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    is_int: Vec<bool>,
    rows: Vec<Row>,
    offset: f64,
    removed: Vec<bool>,
    fixed: Vec<f64>,
    stack: Vec<Substitution>,
}

impl Work {
    /// Moves fixed columns into row bounds and the objective constant.
    fn drop_fixed(&mut self) -> Result<bool, Infeasible> {
        let mut changed = false;
        for j in 0..self.cost.len() {
            if !self.removed[j] && self.lower[j] == self.upper[j] {
                self.removed[j] = true;
                self.fixed[j] = self.lower[j];
                self.offset += self.cost[j] * self.lower[j];
                self.cost[j] = 0.0;
                changed = true;
            }
        }
        if !changed {
            return Ok(false);
        }
        for row in &mut self.rows {
            let mut shift = 0.0;
            row.terms.retain(|&(j, a)| {
                if self.removed[j] {
                    shift += a * self.fixed[j];
                    false
                } else {
                    true
                }
            });
            row.lo -= shift;
            row.hi -= shift;
        }
        self.drop_empty_and_redundant()?;
        Ok(true)
    }

    fn drop_empty_and_redundant(&mut self) -> Result<bool, Infeasible> {
        let before = self.rows.len();
        for row in &self.rows {
            if row.terms.is_empty() && (row.lo > slack_tol(row.lo) || row.hi < -slack_tol(row.hi)) {
                return Err(Infeasible);
            }
        }
        let (lower, upper) = (&self.lower, &self.upper);
        self.rows
            .retain(|r| !r.terms.is_empty() && !is_redundant(r, lower, upper));
        Ok(self.rows.len() != before)
    }

    /// Merges rows whose coefficient vectors are scalar multiples.
    fn merge_parallel(&mut self) -> Result<bool, Infeasible> {
        use std::collections::HashMap;
        let mut seen: HashMap<Vec<(usize, i64)>, usize> = HashMap::new();
        let mut keep = vec![true; self.rows.len()];
        let mut changed = false;
        for r in 0..self.rows.len() {
            let mut terms = self.rows[r].terms.clone();
            terms.sort_by_key(|t| t.0);
            let lead = terms[0].1;
            let key: Vec<(usize, i64)> = terms
                .iter()
                .map(|&(j, a)| (j, ((a / lead) * 1e9).round() as i64))
                .collect();
            match seen.get(&key) {
                None => {
                    seen.insert(key, r);
                }
                Some(&q) => {
                    let mut qt = self.rows[q].terms.clone();
                    qt.sort_by_key(|t| t.0);
                    let ratio = lead / qt[0].1;
                    let exact = terms
                        .iter()
                        .zip(&qt)
                        .all(|(a, b)| (a.1 - ratio * b.1).abs() <= 1e-12 * a.1.abs().max(1.0));
                    if !exact {
                        continue;
                    }
                    // row r = ratio * row q, so bounds of r divided by ratio apply to q.
                    let (mut lo, mut hi) = (self.rows[r].lo / ratio, self.rows[r].hi / ratio);
                    if ratio < 0.0 {
                        std::mem::swap(&mut lo, &mut hi);
                    }
                    let row_q = &mut self.rows[q];
                    row_q.lo = row_q.lo.max(lo);
                    row_q.hi = row_q.hi.min(hi);
                    if row_q.lo > row_q.hi {
                        if row_q.lo - row_q.hi > slack_tol(row_q.hi) {
                            return Err(Infeasible);
                        }
                        let mid = 0.5 * (row_q.lo + row_q.hi);
                        row_q.lo = mid;
                        row_q.hi = mid;
                    } else if (row_q.hi - row_q.lo).abs() <= 1e-12 * (1.0 + row_q.lo.abs()) {
                        row_q.hi = row_q.lo;
                    }
                    keep[r] = false;
                    changed = true;
                }
            }
        }
        if changed {
            let mut k = 0;
            self.rows.retain(|_| {
                k += 1;
                keep[k - 1]
            });
        }
        Ok(changed)
    }

    /// Eliminates continuous columns defined by short equality rows.
    fn substitute(&mut self) -> bool {
        let mut changed = false;
        let mut r = 0;
        while r < self.rows.len() {
            let row = &self.rows[r];
            if row.lo != row.hi || row.terms.len() > MAX_SUB_TERMS || row.terms.len() < 2 {
                r += 1;
                continue;
            }
            let amax = row.terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
            // Column with the fewest row occurrences among acceptable pivots.
            let mut best: Option<(usize, usize)> = None;
            for &(j, a) in &row.terms {
                if self.is_int[j] || a.abs() < 1e-2 * amax {
                    continue;
                }
                let count = self.rows.iter().filter(|x| x.terms.iter().any(|t| t.0 == j)).count();
                if count <= MAX_SUB_ROWS && best.is_none_or(|(_, c)| count < c) {
                    best = Some((j, count));
                }
            }
            let Some((j, _)) = best else {
                r += 1;
                continue;
            };
            let def = self.rows.remove(r);
            let aj = def.terms.iter().find(|t| t.0 == j).unwrap().1;
            let constant = def.lo / aj;
            let terms: Vec<(usize, f64)> = def
                .terms
                .iter()
                .filter(|t| t.0 != j)
                .map(|&(k, a)| (k, -a / aj))
                .collect();
            for other in &mut self.rows {
                let Some(pos) = other.terms.iter().position(|t| t.0 == j) else {
                    continue;
                };
                let c = other.terms.swap_remove(pos).1;
                for &(k, a) in &terms {
                    add_term(&mut other.terms, k, c * a);
                }
                clean_terms(&mut other.terms);
                other.lo -= c * constant;
                other.hi -= c * constant;
            }
            let cj = self.cost[j];
            if cj != 0.0 {
                for &(k, a) in &terms {
                    self.cost[k] += cj * a;
                }
                self.offset += cj * constant;
                self.cost[j] = 0.0;
            }
            // Keep the eliminated column's bounds as a row unless implied.
            let mut bound_terms = terms.clone();
            clean_terms(&mut bound_terms);
            let bound_row = Row {
                terms: bound_terms,
                lo: self.lower[j] - constant,
                hi: self.upper[j] - constant,
            };
            if !bound_row.terms.is_empty() && !is_redundant(&bound_row, &self.lower, &self.upper) {
                self.rows.push(bound_row);
            }
            self.removed[j] = true;
            self.stack.push(Substitution { col: j, constant, terms });
            changed = true;
        }
        changed
    }
}

/// Propagation, parallel-row merging and substitution of continuous
/// columns defined by equality rows, repeated to a fixpoint. Returns `None`
/// when infeasibility is detected.
pub(crate) fn presolve(
    cost: &[f64],
    lower: &[f64],
    upper: &[f64],
    is_int: &[bool],
    rows: Vec<Row>,
) -> Option<Presolved> {
    let n = cost.len();
    let mut w = Work {
        cost: cost.to_vec(),
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        is_int: is_int.to_vec(),
        rows,
        offset: 0.0,
        removed: vec![false; n],
        fixed: vec![f64::NAN; n],
        stack: Vec::new(),
    };
    for row in &mut w.rows {
        clean_terms(&mut row.terms);
    }
    for _ in 0..20 {
        let mut changed = propagate(&w.rows, &mut w.lower, &mut w.upper, &w.is_int, 50).ok()?;
        tighten_coefficients(&mut w.rows, &w.lower, &w.upper, &w.is_int);
        changed |= w.drop_fixed().ok()?;
        changed |= w.drop_empty_and_redundant().ok()?;
        changed |= w.merge_parallel().ok()?;
        changed |= w.substitute();
        if !changed {
            break;
        }
    }
    propagate(&w.rows, &mut w.lower, &mut w.upper, &w.is_int, 50).ok()?;
    w.drop_fixed().ok()?;

    let cols: Vec<usize> = (0..n).filter(|&j| !w.removed[j]).collect();
    let mut map = vec![usize::MAX; n];
    for (k, &j) in cols.iter().enumerate() {
        map[j] = k;
    }
    let rows = w
        .rows
        .iter()
        .map(|r| Row {
            terms: r.terms.iter().map(|&(j, a)| (map[j], a)).collect(),
            lo: r.lo,
            hi: r.hi,
        })
        .collect();
    Some(Presolved {
        cost: cols.iter().map(|&j| w.cost[j]).collect(),
        lower: cols.iter().map(|&j| w.lower[j]).collect(),
        upper: cols.iter().map(|&j| w.upper[j]).collect(),
        is_int: cols.iter().map(|&j| w.is_int[j]).collect(),
        cols,
        rows,
        offset: w.offset,
        n_original: n,
        fixed: w.fixed,
        stack: w.stack,
    })
}

impl Presolved {
    /// Maps a reduced-space point back to every original column.
    pub fn postsolve(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_original];
        for j in 0..self.n_original {
            if !self.fixed[j].is_nan() {
                x[j] = self.fixed[j];
            }
        }
        for (k, &j) in self.cols.iter().enumerate() {
            x[j] = reduced[k];
        }
        for sub in self.stack.iter().rev() {
            x[sub.col] = sub.constant + sub.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>();
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_round_trips_through_postsolve() {
        // min x + 2y + z, y = 3 - x (eq), z >= y + 1, x in [0, 2], y in [0, 5], z in [0, 10]
        let rows = vec![
            Row { terms: vec![(0, 1.0), (1, 1.0)], lo: 3.0, hi: 3.0 },
            Row { terms: vec![(2, 1.0), (1, -1.0)], lo: 1.0, hi: f64::INFINITY },
        ];
        let p = presolve(&[1.0, 2.0, 1.0], &[0.0, 0.0, 0.0], &[2.0, 5.0, 10.0], &[false; 3], rows).unwrap();
        assert!(p.cols.len() < 3);
        // Any reduced point maps to a point satisfying the equality.
        let reduced: Vec<f64> = p.lower.iter().zip(&p.upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let x = p.postsolve(&reduced);
        assert!((x[0] + x[1] - 3.0).abs() < 1e-12);
        let obj: f64 = p.cost.iter().zip(&reduced).map(|(c, v)| c * v).sum::<f64>() + p.offset;
        assert!((obj - (x[0] + 2.0 * x[1] + x[2])).abs() < 1e-9);
    }

    #[test]
    fn parallel_rows_become_equality() {
        let rows = vec![
            Row { terms: vec![(0, 1.0), (1, -1.0)], lo: f64::NEG_INFINITY, hi: 0.0 },
            Row { terms: vec![(0, -2.0), (1, 2.0)], lo: f64::NEG_INFINITY, hi: 0.0 },
            Row { terms: vec![(0, 1.0), (1, 1.0), (2, 1.0)], lo: 1.0, hi: f64::INFINITY },
        ];
        let p = presolve(&[1.0, 1.0, 1.0], &[0.0; 3], &[4.0; 3], &[false; 3], rows).unwrap();
        // x0 == x1, so one of them is eliminated.
        assert_eq!(p.cols.len(), 2);
    }

    #[test]
    fn big_m_row_fixes_binary() {
        // lambda - p <= 100 u with lambda in [10, 12], p in [5, 6] forces u = 1.
        let rows = vec![Row {
            terms: vec![(0, 1.0), (1, -1.0), (2, -100.0)],
            lo: f64::NEG_INFINITY,
            hi: 0.0,
        }];
        let mut lo = vec![10.0, 5.0, 0.0];
        let mut up = vec![12.0, 6.0, 1.0];
        propagate(&rows, &mut lo, &mut up, &[false, false, true], 10).unwrap();
        assert_eq!((lo[2], up[2]), (1.0, 1.0));
    }

    #[test]
    fn coefficient_tightening_shrinks_big_m() {
        // x - 100 u <= 0 with x in [0, 7]  ->  x - 7 u <= 0
        let mut rows = vec![Row {
            terms: vec![(0, 1.0), (1, -100.0)],
            lo: f64::NEG_INFINITY,
            hi: 0.0,
        }];
        tighten_coefficients(&mut rows, &[0.0, 0.0], &[7.0, 1.0], &[false, true]);
        assert!((rows[0].terms[1].1 + 7.0).abs() < 1e-12);
        // x + 100 u >= 5 (i.e. -x - 100u <= -5) with x in [0, 7]
        let mut rows = vec![Row {
            terms: vec![(0, 1.0), (1, 100.0)],
            lo: 5.0,
            hi: f64::INFINITY,
        }];
        tighten_coefficients(&mut rows, &[0.0, 0.0], &[7.0, 1.0], &[false, true]);
        assert!((rows[0].terms[1].1 - 5.0).abs() < 1e-12);
        assert_eq!(rows[0].lo, 5.0);
    }

    #[test]
    fn contradictory_rows_detected() {
        let rows = vec![Row {
            terms: vec![(0, 1.0), (1, 1.0)],
            lo: 3.0,
            hi: f64::INFINITY,
        }];
        let mut lo = vec![0.0, 0.0];
        let mut up = vec![1.0, 1.0];
        assert_eq!(propagate(&rows, &mut lo, &mut up, &[true, true], 5), Err(Infeasible));
    }
}
