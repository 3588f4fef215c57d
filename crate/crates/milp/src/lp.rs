//! Dense bounded-variable simplex.
//!
//! Every row `i` carries a logical variable `r_i = a_i x` whose bounds encode
//! the row sense, so the working system is `A x - r = 0` with all structural
//! columns boxed. Starting from the all-logical basis with every structural
//! column parked at the bound favoured by its cost gives a dual feasible
//! basis, so a single dual simplex pass reaches optimality. A primal pass
//! cleans up the rare dual infeasibilities left by round-off.
//!
//! The tableau keeps `B^-1 [A | -I]` explicitly, which makes bound changes
//! (branching) a matter of moving nonbasic values and re-running the dual
//! simplex from the parent's basis.

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 400;
const DROP_TOL: f64 = 1e-14;
/// Infeasibility found after this many updates is confirmed on a fresh
/// factorisation.
const CONFIRM_AFTER: usize = 30;

#[derive(Debug, Clone)]
pub(crate) struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

#[derive(Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    t: Vec<f64>,
    head: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    columns: std::rc::Rc<Vec<Vec<(usize, f64)>>>,
    since_refactor: usize,
    pub iterations: usize,
}

impl Tableau {
    /// Builds the all-logical starting tableau for `min cost·x` subject to
    /// `rows` and the structural bounds.
    pub fn new(cost: &[f64], lower: &[f64], upper: &[f64], rows: &[LpRow]) -> Self {
        let n = cost.len();
        let m = rows.len();
        let ncols = n + m;
        let mut columns = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    columns[j].push((i, a));
                }
            }
        }
        let mut t = vec![0.0; m * ncols];
        for (i, row) in rows.iter().enumerate() {
            let base = i * ncols;
            for &(j, a) in &row.terms {
                // B = -I, so B^-1 A = -A and B^-1 (-I) = I.
                t[base + j] -= a;
            }
            t[base + n + i] = 1.0;
        }
        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        lo.extend_from_slice(lower);
        hi.extend_from_slice(upper);
        for row in rows {
            lo.push(row.lo);
            hi.push(row.hi);
        }
        let mut full_cost = cost.to_vec();
        full_cost.resize(ncols, 0.0);
        let mut status = vec![Status::Basic; ncols];
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            if cost[j] < 0.0 {
                status[j] = Status::Upper;
                x[j] = upper[j];
            } else {
                status[j] = Status::Lower;
                x[j] = lower[j];
            }
        }
        for (i, row) in rows.iter().enumerate() {
            x[n + i] = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
        }
        let head = (n..ncols).collect();
        let d = full_cost.clone();
        Self {
            m,
            n,
            ncols,
            t,
            head,
            status,
            x,
            lo,
            hi,
            cost: full_cost,
            d,
            columns: std::rc::Rc::new(columns),
            since_refactor: 0,
            iterations: 0,
        }
    }

    /// Approximate heap size in bytes.
    pub fn footprint(&self) -> usize {
        self.t.len() * std::mem::size_of::<f64>()
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Reduced cost of structural column `j` and whether it sits at its
    /// lower (`Some(true)`) or upper (`Some(false)`) bound.
    pub fn reduced_cost(&self, j: usize) -> (f64, Option<bool>) {
        let at = match self.status[j] {
            Status::Basic => None,
            Status::Lower => Some(true),
            Status::Upper => Some(false),
        };
        (self.d[j], at)
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Changes the bounds of structural column `j`, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        let target = match self.status[j] {
            Status::Basic => return,
            Status::Lower => lo,
            Status::Upper => hi,
        };
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.shift_nonbasic(j, delta);
        }
    }

    fn shift_nonbasic(&mut self, j: usize, delta: f64) {
        self.x[j] += delta;
        for r in 0..self.m {
            let a = self.t[r * self.ncols + j];
            if a != 0.0 {
                let b = self.head[r];
                self.x[b] -= a * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let piv = self.t[r * ncols + q];
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * ncols..(r + 1) * ncols];
            for v in row.iter_mut() {
                if *v != 0.0 {
                    *v *= inv;
                }
            }
            row[q] = 1.0;
        }
        let prow: Vec<f64> = self.t[r * ncols..(r + 1) * ncols].to_vec();
        let nz: Vec<usize> = prow
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * ncols..(i + 1) * ncols];
            for &j in &nz {
                let v = row[j] - f * prow[j];
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &nz {
                self.d[j] -= dq * prow[j];
            }
            self.d[q] = 0.0;
        }
        // Leaving column status is set by the caller.
        self.head[r] = q;
        self.status[q] = Status::Basic;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Rebuilds the tableau, basic values and reduced costs from the
    /// original columns to flush accumulated round-off.
    pub fn refactor(&mut self) -> bool {
        let m = self.m;
        let n = self.n;
        let ncols = self.ncols;
        // Dense basis matrix.
        let mut bmat = vec![0.0; m * m];
        for (k, &col) in self.head.iter().enumerate() {
            if col < n {
                for &(i, a) in &self.columns[col] {
                    bmat[i * m + k] = a;
                }
            } else {
                bmat[(col - n) * m + k] = -1.0;
            }
        }
        let Some(binv) = invert(&mut bmat, m) else {
            return false;
        };
        let mut t = vec![0.0; m * ncols];
        for j in 0..n {
            for &(i, a) in &self.columns[j] {
                for r in 0..m {
                    let b = binv[r * m + i];
                    if b != 0.0 {
                        t[r * ncols + j] += b * a;
                    }
                }
            }
        }
        for i in 0..m {
            for r in 0..m {
                t[r * ncols + n + i] = -binv[r * m + i];
            }
        }
        for row in t.chunks_mut(ncols) {
            for v in row.iter_mut() {
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                }
            }
        }
        // B x_B + N x_N = 0.
        let mut rhs = vec![0.0; m];
        for j in 0..ncols {
            if self.status[j] == Status::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < n {
                for &(i, a) in &self.columns[j] {
                    rhs[i] += a * xj;
                }
            } else {
                rhs[j - n] -= xj;
            }
        }
        for r in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v -= binv[r * m + i] * rhs[i];
            }
            self.x[self.head[r]] = v;
        }
        let mut d = self.cost.clone();
        for r in 0..m {
            let cb = self.cost[self.head[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &t[r * ncols..(r + 1) * ncols];
            for j in 0..ncols {
                if row[j] != 0.0 {
                    d[j] -= cb * row[j];
                }
            }
        }
        for r in 0..m {
            d[self.head[r]] = 0.0;
        }
        self.t = t;
        self.d = d;
        self.since_refactor = 0;
        true
    }

    fn primal_infeasibility(&self, col: usize) -> f64 {
        let v = self.x[col];
        if v < self.lo[col] {
            self.lo[col] - v
        } else if v > self.hi[col] {
            v - self.hi[col]
        } else {
            0.0
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.hi[j] - self.lo[j] <= 0.0
    }

    /// Runs the dual simplex from the current (dual feasible) basis, then a
    /// primal clean-up pass. Returns the final status.
    pub fn solve(&mut self, max_iterations: usize) -> LpStatus {
        let mut retried = false;
        loop {
            match self.dual_simplex(max_iterations) {
                LpStatus::Optimal => {}
                LpStatus::Infeasible if !retried && self.since_refactor >= CONFIRM_AFTER => {
                    // Confirm on a fresh factorisation before giving up.
                    retried = true;
                    if !self.refactor() {
                        return LpStatus::Infeasible;
                    }
                    continue;
                }
                other => return other,
            }
            match self.primal_simplex(max_iterations) {
                LpStatus::Optimal => {}
                other => return other,
            }
            // Primal pivots may have left small primal infeasibilities.
            if self.max_primal_infeasibility() <= PRIMAL_TOL * 10.0 {
                return LpStatus::Optimal;
            }
            if self.iterations > max_iterations {
                return LpStatus::IterationLimit;
            }
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&b| self.primal_infeasibility(b))
            .fold(0.0, f64::max)
    }

    fn dual_simplex(&mut self, max_iterations: usize) -> LpStatus {
        let ncols = self.ncols;
        let mut stall = 0usize;
        let mut last_obj = f64::NEG_INFINITY;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return LpStatus::IterationLimit;
            }
            if self.iterations > max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = stall > 50;
            // Leaving row.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let b = self.head[r];
                let inf = self.primal_infeasibility(b);
                if inf > PRIMAL_TOL * (1.0 + self.x[b].abs().min(1e6) * 1e-3) {
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            if bland {
                                b < self.head[lr]
                            } else {
                                inf > best
                            }
                        }
                    };
                    if better {
                        leave = Some((r, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Optimal;
            };
            let b = self.head[r];
            let increase = self.x[b] < self.lo[b];
            let row = &self.t[r * ncols..(r + 1) * ncols];
            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for j in 0..ncols {
                let st = self.status[j];
                if st == Status::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match (st, increase) {
                    (Status::Lower, true) => a < 0.0,
                    (Status::Upper, true) => a > 0.0,
                    (Status::Lower, false) => a > 0.0,
                    (Status::Upper, false) => a < 0.0,
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                let dj = match st {
                    Status::Lower => self.d[j].max(0.0),
                    _ => (-self.d[j]).max(0.0),
                };
                let ratio = (dj + DUAL_TOL) / a.abs();
                if ratio < theta_max {
                    theta_max = ratio;
                }
            }
            if !theta_max.is_finite() {
                return LpStatus::Infeasible;
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..ncols {
                let st = self.status[j];
                if st == Status::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match (st, increase) {
                    (Status::Lower, true) => a < 0.0,
                    (Status::Upper, true) => a > 0.0,
                    (Status::Lower, false) => a > 0.0,
                    (Status::Upper, false) => a < 0.0,
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                let dj = match st {
                    Status::Lower => self.d[j].max(0.0),
                    _ => (-self.d[j]).max(0.0),
                };
                if dj / a.abs() <= theta_max {
                    let better = match enter {
                        None => true,
                        Some((_, best)) => {
                            if bland {
                                false
                            } else {
                                a.abs() > best
                            }
                        }
                    };
                    if better {
                        enter = Some((j, a.abs()));
                    }
                }
            }
            let (q, _) = enter.expect("harris pass always finds a candidate");
            let alpha = self.t[r * ncols + q];
            let target = if increase { self.lo[b] } else { self.hi[b] };
            // x_b = beta - alpha * (x_q - xq0); choose step so x_b hits target.
            let step = (self.x[b] - target) / alpha;
            self.shift_nonbasic_entering(q, step);
            self.x[b] = target;
            self.pivot(r, q);
            self.status[b] = if increase { Status::Lower } else { Status::Upper };
            let obj = self.objective();
            if obj > last_obj + 1e-12 * (1.0 + obj.abs()) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }

    /// Moves nonbasic column `q` by `delta` and updates basic values.
    fn shift_nonbasic_entering(&mut self, q: usize, delta: f64) {
        if delta != 0.0 {
            self.shift_nonbasic(q, delta);
        }
    }

    fn primal_simplex(&mut self, max_iterations: usize) -> LpStatus {
        let ncols = self.ncols;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return LpStatus::IterationLimit;
            }
            if self.iterations > max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = stall > 50;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..ncols {
                let st = self.status[j];
                if st == Status::Basic || self.is_fixed(j) {
                    continue;
                }
                let score = match st {
                    Status::Lower => -self.d[j],
                    _ => self.d[j],
                };
                if score > DUAL_TOL * 10.0 {
                    let better = match enter {
                        None => true,
                        Some((_, best)) => !bland && score > best,
                    };
                    if better {
                        enter = Some((j, score));
                    }
                }
            }
            let Some((q, _)) = enter else {
                return LpStatus::Optimal;
            };
            let dir = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };
            // Harris pass 1.
            let mut theta_max = self.hi[q] - self.lo[q];
            for r in 0..self.m {
                let a = self.t[r * ncols + q] * dir;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.head[r];
                let lim = if a > 0.0 {
                    (self.x[b] - self.lo[b] + PRIMAL_TOL) / a
                } else {
                    (self.hi[b] - self.x[b] + PRIMAL_TOL) / -a
                };
                if lim < theta_max {
                    theta_max = lim;
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, f64, f64)> = None;
            if theta_max.is_finite() {
                for r in 0..self.m {
                    let a = self.t[r * ncols + q] * dir;
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let b = self.head[r];
                    let lim = if a > 0.0 {
                        (self.x[b] - self.lo[b]) / a
                    } else {
                        (self.hi[b] - self.x[b]) / -a
                    };
                    if lim <= theta_max {
                        let better = match leave {
                            None => true,
                            Some((lr, best, _)) => {
                                if bland {
                                    b < self.head[lr]
                                } else {
                                    a.abs() > best
                                }
                            }
                        };
                        if better {
                            leave = Some((r, a.abs(), lim.max(0.0)));
                        }
                    }
                }
            }
            match leave {
                Some((r, _, lim)) if lim < flip => {
                    let b = self.head[r];
                    let a = self.t[r * ncols + q] * dir;
                    let to_lower = a > 0.0;
                    let target = if to_lower { self.lo[b] } else { self.hi[b] };
                    self.shift_nonbasic(q, dir * lim);
                    self.x[b] = target;
                    self.pivot(r, q);
                    self.status[b] = if to_lower { Status::Lower } else { Status::Upper };
                }
                _ if flip.is_finite() => {
                    self.shift_nonbasic(q, dir * flip);
                    self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                }
                // Unbounded ray; impossible with boxed structural columns.
                _ => return LpStatus::IterationLimit,
            }
            let obj = self.objective();
            if obj < last_obj - 1e-12 * (1.0 + obj.abs()) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting; `a` is destroyed.
fn invert(a: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let mut p = c;
        let mut best = a[c * m + c].abs();
        for r in c + 1..m {
            let v = a[r * m + c].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let piv = 1.0 / a[c * m + c];
        for k in 0..m {
            a[c * m + k] *= piv;
            inv[c * m + k] *= piv;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = a[r * m + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[c * m + k];
                inv[r * m + k] -= f * inv[c * m + k];
            }
        }
    }
    Some(inv)
}
