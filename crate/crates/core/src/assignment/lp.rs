//! Bounded-variable revised primal simplex with a dense basis inverse.
//!
//! Solves `min c'x  s.t.  Ax = b,  l <= x <= u` where every `l` is finite.

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 50;

/// Sparse column: (row, coefficient) pairs.
pub type Column = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_rows: usize,
    pub cols: Vec<Column>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest absolute row residual of `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, a) in col {
                r[i] -= a * x[j];
            }
        }
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Final basis of an optimal solve, reusable by [`solve_lp_warm`].
    pub basis: Option<Basis>,
}

/// Optimal basis together with the artificial columns it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    art: Vec<Column>,
    basis: Vec<usize>,
    x: Vec<f64>,
}

struct Simplex<'a> {
    m: usize,
    cols: Vec<&'a Column>,
    art: Vec<Column>,
    n_struct: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: &'a [f64],
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn col(&self, j: usize) -> &Column {
        if j < self.n_struct {
            self.cols[j]
        } else {
            &self.art[j - self.n_struct]
        }
    }

    fn ftran(&self, col: &Column) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(k, a) in col {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + k] * a;
            }
        }
        w
    }

    /// Rebuild the inverse from scratch and recompute basic values.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (p, &j) in self.basis.iter().enumerate() {
            for &(i, v) in self.col(j) {
                a[i * m + p] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()))
                .unwrap();
            if a[piv * m + c].abs() < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        self.recompute_basic();
        true
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut r = self.rhs.to_vec();
        let total = self.n_struct + self.art.len();
        for j in 0..total {
            if self.is_basic[j] || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for &(i, a) in self.col(j) {
                r[i] -= a * xj;
            }
        }
        for p in 0..m {
            let mut v = 0.0;
            for (k, rk) in r.iter().enumerate() {
                v += self.binv[p * m + k] * rk;
            }
            self.x[self.basis[p]] = v;
        }
    }

    /// Dual simplex from a dual feasible basis. `None` when the start is
    /// not dual feasible or the numerics break down.
    fn run_dual(&mut self, cost: &[f64], max_iter: usize) -> Option<LpStatus> {
        let m = self.m;
        let total = self.n_struct + self.art.len();
        let mut first = true;
        loop {
            if self.iterations >= max_iter {
                return Some(LpStatus::IterationLimit);
            }
            let mut pi = vec![0.0; m];
            for (p, &j) in self.basis.iter().enumerate() {
                let cb = cost[j];
                if cb != 0.0 {
                    for (k, pk) in pi.iter_mut().enumerate() {
                        *pk += cb * self.binv[p * m + k];
                    }
                }
            }
            let mut d = vec![0.0; total];
            for j in 0..total {
                if self.is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let mut dj = cost[j];
                for &(i, a) in self.col(j) {
                    dj -= pi[i] * a;
                }
                d[j] = dj;
                if first {
                    let at_lower = self.x[j] <= self.lower[j];
                    if (at_lower && dj < -1e-7) || (!at_lower && dj > 1e-7) {
                        return None;
                    }
                }
            }
            first = false;

            // leaving row: largest bound violation
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut worst = FEAS_TOL;
            for p in 0..m {
                let b = self.basis[p];
                let v = (self.lower[b] - self.x[b]).max(self.x[b] - self.upper[b]);
                if v > worst {
                    worst = v;
                    let below = self.x[b] < self.lower[b];
                    leave = Some((p, if below { self.lower[b] } else { self.upper[b] }, below));
                }
            }
            let Some((r, bound, below)) = leave else {
                return Some(LpStatus::Optimal);
            };
            self.iterations += 1;

            let rho = &self.binv[r * m..(r + 1) * m];
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let mut alpha = 0.0;
                for &(i, a) in self.col(j) {
                    alpha += rho[i] * a;
                }
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let at_lower = self.x[j] <= self.lower[j];
                let ok = if below {
                    (at_lower && alpha < 0.0) || (!at_lower && alpha > 0.0)
                } else {
                    (at_lower && alpha > 0.0) || (!at_lower && alpha < 0.0)
                };
                if !ok {
                    continue;
                }
                let ratio = d[j].abs() / alpha.abs();
                let better = match enter {
                    None => true,
                    Some((_, best, a)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && alpha.abs() > a),
                };
                if better {
                    enter = Some((j, ratio, alpha.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Some(LpStatus::Infeasible);
            };

            let w = self.ftran(self.col(q));
            if w[r].abs() <= PIVOT_TOL {
                return None;
            }
            let out = self.basis[r];
            self.x[out] = bound;
            self.is_basic[out] = false;
            self.is_basic[q] = true;
            self.basis[r] = q;
            let piv = w[r];
            for k in 0..m {
                self.binv[r * m + k] /= piv;
            }
            for i in 0..m {
                if i == r || w[i] == 0.0 {
                    continue;
                }
                let f = w[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    return None;
                }
            } else {
                self.recompute_basic();
            }
        }
    }

    /// Runs the simplex on cost vector `cost` (indexed over all columns).
    fn run(&mut self, cost: &[f64], max_iter: usize) -> LpStatus {
        let m = self.m;
        let total = self.n_struct + self.art.len();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            // duals
            let mut pi = vec![0.0; m];
            for (p, &j) in self.basis.iter().enumerate() {
                let cb = cost[j];
                if cb != 0.0 {
                    for (k, pk) in pi.iter_mut().enumerate() {
                        *pk += cb * self.binv[p * m + k];
                    }
                }
            }
            // pricing
            let bland = degenerate >= BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                if self.is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let mut d = cost[j];
                for &(i, a) in self.col(j) {
                    d -= pi[i] * a;
                }
                let at_lower = self.x[j] <= self.lower[j];
                let score = if at_lower && d < -DUAL_TOL {
                    -d
                } else if !at_lower && d > DUAL_TOL {
                    d
                } else {
                    continue;
                };
                let dir = if at_lower { 1.0 } else { -1.0 };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if score > best {
                    best = score;
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return LpStatus::Optimal;
            };
            self.iterations += 1;

            let w = self.ftran(self.col(q));
            // ratio test
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            for p in 0..m {
                let wp = dir * w[p];
                let b = self.basis[p];
                let (limit, bound) = if wp > PIVOT_TOL {
                    ((self.x[b] - self.lower[b]).max(0.0) / wp, self.lower[b])
                } else if wp < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.x[b]).max(0.0) / -wp, self.upper[b])
                } else {
                    continue;
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    match leave {
                        Some((lp, _)) if bland => b < self.basis[lp],
                        Some((lp, _)) => w[p].abs() > w[lp].abs(),
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some((p, bound));
                }
            }
            if !theta.is_finite() {
                return LpStatus::Unbounded;
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            for p in 0..m {
                let b = self.basis[p];
                self.x[b] -= dir * theta * w[p];
            }
            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.x[q] += dir * theta;
                    self.x[out] = bound;
                    self.is_basic[out] = false;
                    self.is_basic[q] = true;
                    self.basis[r] = q;
                    let piv = w[r];
                    for k in 0..m {
                        self.binv[r * m + k] /= piv;
                    }
                    for i in 0..m {
                        if i == r || w[i] == 0.0 {
                            continue;
                        }
                        let f = w[i];
                        for k in 0..m {
                            self.binv[i * m + k] -= f * self.binv[r * m + k];
                        }
                    }
                    self.pivots_since_refactor += 1;
                    if self.pivots_since_refactor >= REFACTOR_EVERY && !self.refactor() {
                        return LpStatus::IterationLimit;
                    }
                }
            }
        }
    }
}

/// Solves the LP with column bounds overridden by `lower`/`upper`.
pub fn solve_lp_bounded(p: &LpProblem, lower: &[f64], upper: &[f64], max_iter: usize) -> LpSolution {
    let m = p.num_rows;
    let n = p.num_cols();
    let mut x: Vec<f64> = lower.to_vec();
    // infeasible bounds
    if lower.iter().zip(upper).any(|(l, u)| l > &(u + FEAS_TOL)) {
        return LpSolution {
            status: LpStatus::Infeasible,
            x,
            objective: f64::INFINITY,
            iterations: 0,
            basis: None,
        };
    }
    let mut resid = p.rhs.clone();
    for (j, col) in p.cols.iter().enumerate() {
        if x[j] != 0.0 {
            for &(i, a) in col {
                resid[i] -= a * x[j];
            }
        }
    }
    let mut art = Vec::with_capacity(m);
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        let s = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
        art.push(vec![(i, s)]);
        binv[i * m + i] = s;
        x.push(resid[i].abs());
    }
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    lo.extend(std::iter::repeat_n(0.0, m));
    up.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut is_basic = vec![false; n + m];
    for flag in is_basic.iter_mut().skip(n) {
        *flag = true;
    }

    let mut s = Simplex {
        m,
        cols: p.cols.iter().collect(),
        art,
        n_struct: n,
        lower: lo,
        upper: up,
        rhs: &p.rhs,
        x,
        basis: (n..n + m).collect(),
        is_basic,
        binv,
        pivots_since_refactor: 0,
        iterations: 0,
    };

    let mut phase1 = vec![0.0; n + m];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    let st = s.run(&phase1, max_iter);
    if st == LpStatus::IterationLimit {
        return finish(p, s, LpStatus::IterationLimit);
    }
    let infeas: f64 = s.x[n..].iter().sum();
    if infeas > 1e-7 {
        return finish(p, s, LpStatus::Infeasible);
    }
    // pin artificials at zero; any still basic stay there harmlessly
    for j in n..n + m {
        s.upper[j] = 0.0;
        if !s.is_basic[j] {
            s.x[j] = 0.0;
        }
    }
    let mut phase2 = p.cost.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    let st = s.run(&phase2, max_iter);
    if st == LpStatus::Optimal {
        // clean numerical drift before reporting
        s.refactor();
    }
    finish(p, s, st)
}

fn finish(p: &LpProblem, s: Simplex<'_>, status: LpStatus) -> LpSolution {
    let n = p.num_cols();
    let basis = (status == LpStatus::Optimal).then(|| Basis {
        art: s.art.clone(),
        basis: s.basis.clone(),
        x: s.x.clone(),
    });
    let mut x = s.x;
    x.truncate(n);
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.clamp(s.lower[j], s.upper[j]);
    }
    let objective = if status == LpStatus::Optimal {
        p.objective(&x)
    } else {
        f64::INFINITY
    };
    LpSolution {
        status,
        x,
        objective,
        iterations: s.iterations,
        basis,
    }
}

/// Re-solves after bounds were tightened, starting from `warm` with the
/// dual simplex. Falls back to a cold solve when the start is unusable.
pub fn solve_lp_warm(p: &LpProblem, lower: &[f64], upper: &[f64], warm: &Basis, max_iter: usize) -> LpSolution {
    let m = p.num_rows;
    let n = p.num_cols();
    let cold = || solve_lp_bounded(p, lower, upper, max_iter);
    if warm.basis.len() != m || warm.x.len() != n + m || lower.iter().zip(upper).any(|(l, u)| l > &(u + FEAS_TOL)) {
        return cold();
    }
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    lo.extend(std::iter::repeat_n(0.0, m));
    up.extend(std::iter::repeat_n(0.0, m));
    let mut is_basic = vec![false; n + m];
    for &j in &warm.basis {
        is_basic[j] = true;
    }
    let mut x = warm.x.clone();
    for j in 0..n + m {
        if !is_basic[j] {
            x[j] = x[j].clamp(lo[j], up[j]);
        }
    }
    let mut s = Simplex {
        m,
        cols: p.cols.iter().collect(),
        art: warm.art.clone(),
        n_struct: n,
        lower: lo,
        upper: up,
        rhs: &p.rhs,
        x,
        basis: warm.basis.clone(),
        is_basic,
        binv: vec![0.0; m * m],
        pivots_since_refactor: 0,
        iterations: 0,
    };
    if !s.refactor() {
        return cold();
    }
    let mut cost = p.cost.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    match s.run_dual(&cost, max_iter) {
        Some(LpStatus::Optimal) => {}
        Some(LpStatus::Infeasible) => return finish(p, s, LpStatus::Infeasible),
        _ => return cold(),
    }
    // primal pass mops up any dual drift
    match s.run(&cost, max_iter) {
        LpStatus::Optimal => {
            s.refactor();
            finish(p, s, LpStatus::Optimal)
        }
        _ => cold(),
    }
}

pub fn solve_lp(p: &LpProblem, max_iter: usize) -> LpSolution {
    solve_lp_bounded(p, &p.lower, &p.upper, max_iter)
}
