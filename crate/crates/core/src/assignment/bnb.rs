//! Depth-first branch-and-bound over binary columns of an [`LpProblem`].

use std::rc::Rc;
use std::time::{Duration, Instant};

use super::lp::{solve_lp_bounded, solve_lp_warm, Basis, LpProblem, LpStatus};

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;
const LP_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbOptions {
    pub node_limit: usize,
    /// Wall-clock guard. Results stay deterministic as long as the node
    /// limit is reached first.
    pub time_budget: Duration,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            node_limit: 20_000,
            time_budget: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub optimal: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipFailure {
    Infeasible,
    NoIncumbent,
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Optimal basis of the parent.
    warm: Option<Rc<Basis>>,
}

/// Problem structure the search can exploit.
#[derive(Default)]
pub struct MipHints<'a> {
    /// Sets of binary columns whose values sum to one in every feasible
    /// point. A fractional set is split in two instead of branching on a
    /// single column.
    pub groups: Vec<Vec<usize>>,
    /// Builds a feasible point from a fractional LP solution.
    pub heuristic: Option<&'a dyn Fn(&[f64]) -> Option<Vec<f64>>>,
}

enum Branch {
    Column(usize),
    /// Columns kept free in the first child; the rest stay free in the
    /// second.
    Split(Vec<usize>, Vec<usize>),
}

fn is_fractional(v: f64) -> bool {
    let f = v - v.floor();
    f > INT_TOL && f < 1.0 - INT_TOL
}

fn choose_branch(x: &[f64], binary: &[bool], upper: &[f64], hints: &MipHints<'_>) -> Option<Branch> {
    // the set whose largest value is smallest, lowest index on ties
    let mut pick: Option<(usize, f64)> = None;
    for (g, cols) in hints.groups.iter().enumerate() {
        if !cols.iter().any(|&j| is_fractional(x[j])) {
            continue;
        }
        let top = cols.iter().map(|&j| x[j]).fold(0.0, f64::max);
        if pick.is_none_or(|(_, t)| top < t - 1e-12) {
            pick = Some((g, top));
        }
    }
    if let Some((g, _)) = pick {
        let mut free: Vec<usize> = hints.groups[g].iter().copied().filter(|&j| upper[j] > 0.0).collect();
        free.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        let positive = free.iter().filter(|&&j| x[j] > INT_TOL).count();
        let mut mass = 0.0;
        let mut k = 0;
        while k + 1 < positive {
            mass += x[free[k]];
            k += 1;
            if mass >= 0.5 {
                break;
            }
        }
        let rest = free.split_off(k.max(1));
        return Some(Branch::Split(free, rest));
    }
    // most fractional binary, lowest index on ties
    let mut branch: Option<(usize, f64)> = None;
    for (j, &is_bin) in binary.iter().enumerate() {
        if is_bin && is_fractional(x[j]) {
            let f = x[j] - x[j].floor();
            let score = (f - 0.5).abs();
            if branch.is_none_or(|(_, s)| score < s - 1e-12) {
                branch = Some((j, score));
            }
        }
    }
    branch.map(|(j, _)| Branch::Column(j))
}

/// Minimises `p` with the columns flagged in `binary` restricted to {0, 1}.
/// `incumbent` seeds the search with a known feasible point.
pub fn solve_mip(
    p: &LpProblem,
    binary: &[bool],
    incumbent: Option<(Vec<f64>, f64)>,
    options: BnbOptions,
    hints: &MipHints<'_>,
) -> Result<MipResult, MipFailure> {
    let started = Instant::now();
    let mut best = incumbent;
    let mut stack = vec![Node {
        lower: p.lower.clone(),
        upper: p.upper.clone(),
        warm: None,
    }];
    let mut nodes = 0usize;
    let mut complete = true;

    while let Some(node) = stack.pop() {
        if nodes >= options.node_limit || started.elapsed() > options.time_budget {
            complete = false;
            break;
        }
        nodes += 1;
        let sol = match &node.warm {
            Some(b) => solve_lp_warm(p, &node.lower, &node.upper, b, LP_MAX_ITER),
            None => solve_lp_bounded(p, &node.lower, &node.upper, LP_MAX_ITER),
        };
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                complete = false;
                continue;
            }
        }
        if let Some((_, obj)) = &best {
            if sol.objective >= obj - PRUNE_TOL {
                continue;
            }
        }
        match choose_branch(&sol.x, binary, &node.upper, hints) {
            None => {
                let mut x = sol.x;
                for (j, &is_bin) in binary.iter().enumerate() {
                    if is_bin {
                        x[j] = x[j].round();
                    }
                }
                let obj = p.objective(&x);
                if best.as_ref().is_none_or(|(_, b)| obj < b - PRUNE_TOL) {
                    best = Some((x, obj));
                }
            }
            Some(branch) => {
                let warm = sol.basis.clone().map(Rc::new);
                if let Some(h) = hints.heuristic {
                    if let Some(x) = h(&sol.x) {
                        let obj = p.objective(&x);
                        if best.as_ref().is_none_or(|(_, b)| obj < b - PRUNE_TOL) {
                            best = Some((x, obj));
                        }
                    }
                }
                let (first, second) = match branch {
                    Branch::Column(j) => {
                        let mut down = Node {
                            lower: node.lower.clone(),
                            upper: node.upper.clone(),
                            warm: warm.clone(),
                        };
                        down.upper[j] = 0.0;
                        let mut up = node;
                        up.lower[j] = 1.0;
                        up.warm = warm;
                        (up, down)
                    }
                    Branch::Split(keep, rest) => {
                        let mut a = Node {
                            lower: node.lower.clone(),
                            upper: node.upper.clone(),
                            warm: warm.clone(),
                        };
                        for &j in &rest {
                            a.upper[j] = 0.0;
                        }
                        let mut b = node;
                        b.warm = warm;
                        for &j in &keep {
                            b.upper[j] = 0.0;
                        }
                        (a, b)
                    }
                };
                // the child holding more of the LP mass is explored first
                stack.push(second);
                stack.push(first);
            }
        }
    }
    match best {
        Some((x, objective)) => Ok(MipResult {
            x,
            objective,
            optimal: complete,
            nodes,
        }),
        None if complete => Err(MipFailure::Infeasible),
        None => Err(MipFailure::NoIncumbent),
    }
}
