//! Per-epoch assignment MILP over the RTVZ graph.
//!
//! Columns: one binary per graph edge, one binary dummy per request and,
//! when any zone weight is positive, a pair of continuous deviations per
//! zone. Rows: one per vehicle, one per request, one per zone.

mod bnb;
pub mod lp;

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::ObjectiveSpec;
use crate::graphs::{EdgeKind, RtvzGraph};
use crate::ids::{RequestId, VehicleId};

pub use bnb::{solve_mip, BnbOptions, MipFailure, MipHints, MipResult};
use lp::LpProblem;

const ROW_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("assignment model is infeasible")]
    ModelInfeasible,
    #[error("search budget exhausted without an incumbent")]
    BudgetExceededWithNoIncumbent,
    #[error("solution violates {row} (activity {activity})")]
    ConstraintViolationInSolution { row: String, activity: f64 },
    #[error("solution vector has {got} entries, model has {expected} columns")]
    WrongLength { got: usize, expected: usize },
}

#[derive(Debug, Clone)]
pub struct AssignmentModel {
    pub lp: LpProblem,
    pub binary: Vec<bool>,
    pub num_edges: usize,
    pub num_requests: usize,
    pub num_zones: usize,
    pub uses_zones: bool,
    pub vehicle_ids: Vec<VehicleId>,
    pub request_ids: Vec<RequestId>,
    pub edge_vehicle: Vec<usize>,
    pub edge_kind: Vec<EdgeKind>,
    /// Request positions covered by each edge.
    pub edge_requests: Vec<Vec<usize>>,
    pub edge_supply: Vec<Vec<f64>>,
    pub default_edge: Vec<usize>,
    pub objective: ObjectiveSpec,
}

impl AssignmentModel {
    pub fn num_vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    fn dummy_col(&self, r: usize) -> usize {
        self.num_edges + r
    }

    /// Objective of an integral choice computed directly, with the zone
    /// deviations at their optimal values.
    pub fn evaluate(&self, chosen: &[usize], unserved: &[usize]) -> f64 {
        let mut obj: f64 = chosen.iter().map(|&e| self.objective.edge_cost[e]).sum();
        obj += self.objective.dummy_cost * unserved.len() as f64;
        if self.uses_zones {
            for z in 0..self.num_zones {
                let y: f64 = chosen.iter().map(|&e| self.edge_supply[e][z]).sum();
                obj += self.objective.zone_weight[z] * (self.objective.phi[z] - y).abs();
            }
        }
        obj
    }
}

pub fn build_model(graph: &RtvzGraph, objective: &ObjectiveSpec) -> AssignmentModel {
    let nv = graph.vehicles.len();
    let nr = graph.requests.len();
    let nz = graph.num_zones;
    let ne = graph.edges.len();
    let uses_zones = objective.uses_zones();
    let num_rows = nv + nr + if uses_zones { nz } else { 0 };

    let mut cols = Vec::with_capacity(ne + nr + 2 * nz);
    let mut cost = Vec::with_capacity(cols.capacity());
    let mut edge_requests = Vec::with_capacity(ne);
    let mut default_edge = vec![usize::MAX; nv];
    for (j, e) in graph.edges.iter().enumerate() {
        if default_edge[e.vehicle] == usize::MAX {
            default_edge[e.vehicle] = j;
        }
        let mut col = vec![(e.vehicle, 1.0)];
        let members = match e.kind {
            EdgeKind::Trip(t) => graph.trip_members[t.index()].clone(),
            _ => vec![],
        };
        for &r in &members {
            col.push((nv + r, 1.0));
        }
        if uses_zones {
            for (z, &y) in e.supply.y.iter().enumerate() {
                if y != 0.0 {
                    col.push((nv + nr + z, y));
                }
            }
        }
        cols.push(col);
        cost.push(objective.edge_cost[j]);
        edge_requests.push(members);
    }
    for r in 0..nr {
        cols.push(vec![(nv + r, 1.0)]);
        cost.push(objective.dummy_cost);
    }
    let mut rhs = vec![1.0; nv + nr];
    if uses_zones {
        for z in 0..nz {
            cols.push(vec![(nv + nr + z, 1.0)]);
            cost.push(objective.zone_weight[z]);
        }
        for z in 0..nz {
            cols.push(vec![(nv + nr + z, -1.0)]);
            cost.push(objective.zone_weight[z]);
        }
        rhs.extend_from_slice(&objective.phi);
    }
    let n = cols.len();
    let n_bin = ne + nr;
    let mut upper = vec![1.0; n_bin];
    upper.resize(n, f64::INFINITY);

    AssignmentModel {
        lp: LpProblem {
            num_rows,
            cols,
            cost,
            lower: vec![0.0; n],
            upper,
            rhs,
        },
        binary: (0..n).map(|j| j < n_bin).collect(),
        num_edges: ne,
        num_requests: nr,
        num_zones: nz,
        uses_zones,
        vehicle_ids: graph.vehicles.iter().map(|v| v.id).collect(),
        request_ids: graph.requests.clone(),
        edge_vehicle: graph.edges.iter().map(|e| e.vehicle).collect(),
        edge_kind: graph.edges.iter().map(|e| e.kind).collect(),
        edge_requests,
        edge_supply: graph.edges.iter().map(|e| e.supply.y.clone()).collect(),
        default_edge,
        objective: objective.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleDecision {
    pub vehicle: VehicleId,
    /// Index of the chosen edge in the graph.
    pub edge: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub decisions: Vec<VehicleDecision>,
    pub unserved: Vec<RequestId>,
    pub objective: f64,
    pub optimal: bool,
    /// Realised supply per zone from the chosen edges.
    pub zone_supply: Vec<f64>,
    /// `phi - supply` per zone.
    pub deviation: Vec<f64>,
}

/// Solution vector for an assignment.
pub fn encode(model: &AssignmentModel, a: &Assignment) -> Vec<f64> {
    let mut x = vec![0.0; model.lp.num_cols()];
    for d in &a.decisions {
        x[d.edge] = 1.0;
    }
    for id in &a.unserved {
        if let Some(r) = model.request_ids.iter().position(|q| q == id) {
            x[model.dummy_col(r)] = 1.0;
        }
    }
    if model.uses_zones {
        let base = model.num_edges + model.num_requests;
        for (z, &dev) in a.deviation.iter().enumerate() {
            x[base + z] = dev.max(0.0);
            x[base + model.num_zones + z] = (-dev).max(0.0);
        }
    }
    x
}

/// Typed assignment from a raw solution vector, checking every row.
pub fn decode(model: &AssignmentModel, x: &[f64], optimal: bool) -> Result<Assignment, AssignmentError> {
    if x.len() != model.lp.num_cols() {
        return Err(AssignmentError::WrongLength {
            got: x.len(),
            expected: model.lp.num_cols(),
        });
    }
    for (j, &b) in model.binary.iter().enumerate() {
        if b && (x[j] - x[j].round()).abs() > ROW_TOL {
            return Err(AssignmentError::ConstraintViolationInSolution {
                row: format!("integrality of column {j}"),
                activity: x[j],
            });
        }
    }
    let nv = model.num_vehicles();
    let mut vehicle_sum = vec![0.0f64; nv];
    let mut chosen = vec![usize::MAX; nv];
    let mut request_sum = vec![0.0f64; model.num_requests];
    for e in 0..model.num_edges {
        if x[e] > 0.5 {
            let v = model.edge_vehicle[e];
            vehicle_sum[v] += 1.0;
            chosen[v] = e;
            for &r in &model.edge_requests[e] {
                request_sum[r] += 1.0;
            }
        }
    }
    let mut unserved = Vec::new();
    let mut unserved_pos = Vec::new();
    for r in 0..model.num_requests {
        if x[model.dummy_col(r)] > 0.5 {
            request_sum[r] += 1.0;
            unserved.push(model.request_ids[r]);
            unserved_pos.push(r);
        }
    }
    for (v, &s) in vehicle_sum.iter().enumerate() {
        if (s - 1.0).abs() > ROW_TOL {
            return Err(AssignmentError::ConstraintViolationInSolution {
                row: format!("vehicle {}", model.vehicle_ids[v]),
                activity: s,
            });
        }
    }
    for (r, &s) in request_sum.iter().enumerate() {
        if (s - 1.0).abs() > ROW_TOL {
            return Err(AssignmentError::ConstraintViolationInSolution {
                row: format!("request {}", model.request_ids[r]),
                activity: s,
            });
        }
    }
    let zone_supply: Vec<f64> = (0..model.num_zones)
        .map(|z| chosen.iter().map(|&e| model.edge_supply[e][z]).sum())
        .collect();
    let deviation = zone_supply
        .iter()
        .zip(&model.objective.phi)
        .map(|(y, phi)| phi - y)
        .collect();
    Ok(Assignment {
        decisions: chosen
            .iter()
            .enumerate()
            .map(|(v, &e)| VehicleDecision {
                vehicle: model.vehicle_ids[v],
                edge: e,
                kind: model.edge_kind[e],
            })
            .collect(),
        unserved,
        objective: model.evaluate(&chosen, &unserved_pos),
        optimal,
        zone_supply,
        deviation,
    })
}

/// Every vehicle on its default edge and every request unserved.
fn default_solution(model: &AssignmentModel) -> Vec<f64> {
    let mut x = vec![0.0; model.lp.num_cols()];
    for &e in &model.default_edge {
        x[e] = 1.0;
    }
    for r in 0..model.num_requests {
        x[model.dummy_col(r)] = 1.0;
    }
    if model.uses_zones {
        let base = model.num_edges + model.num_requests;
        for z in 0..model.num_zones {
            let y: f64 = model.default_edge.iter().map(|&e| model.edge_supply[e][z]).sum();
            let dev = model.objective.phi[z] - y;
            x[base + z] = dev.max(0.0);
            x[base + model.num_zones + z] = (-dev).max(0.0);
        }
    }
    x
}

/// The model with vehicles that have a single edge fixed on it and their
/// rows dropped.
struct Reduced {
    lp: LpProblem,
    /// Original column of each reduced column.
    kept: Vec<usize>,
    position: Vec<Option<usize>>,
    fixed: Vec<usize>,
    fixed_cost: f64,
    num_cols: usize,
}

impl Reduced {
    fn new(model: &AssignmentModel) -> Self {
        let nv = model.num_vehicles();
        let p = &model.lp;
        let mut edges_of = vec![0usize; nv];
        for &v in &model.edge_vehicle {
            edges_of[v] += 1;
        }
        let fixed: Vec<usize> = (0..nv)
            .filter(|&v| edges_of[v] == 1)
            .map(|v| model.default_edge[v])
            .collect();
        let mut drop_col = vec![false; p.num_cols()];
        for &e in &fixed {
            drop_col[e] = true;
        }
        let mut row_map = vec![None; p.num_rows];
        let mut rows = 0;
        for (i, slot) in row_map.iter_mut().enumerate() {
            if i >= nv || edges_of[i] != 1 {
                *slot = Some(rows);
                rows += 1;
            }
        }
        let mut rhs: Vec<f64> = (0..p.num_rows)
            .filter(|&i| row_map[i].is_some())
            .map(|i| p.rhs[i])
            .collect();
        for &e in &fixed {
            for &(i, a) in &p.cols[e] {
                if let Some(r) = row_map[i] {
                    rhs[r] -= a;
                }
            }
        }
        let kept: Vec<usize> = (0..p.num_cols()).filter(|&j| !drop_col[j]).collect();
        let mut position = vec![None; p.num_cols()];
        for (k, &j) in kept.iter().enumerate() {
            position[j] = Some(k);
        }
        let lp = LpProblem {
            num_rows: rows,
            cols: kept
                .iter()
                .map(|&j| {
                    p.cols[j]
                        .iter()
                        .filter_map(|&(i, a)| row_map[i].map(|r| (r, a)))
                        .collect()
                })
                .collect(),
            cost: kept.iter().map(|&j| p.cost[j]).collect(),
            lower: kept.iter().map(|&j| p.lower[j]).collect(),
            upper: kept.iter().map(|&j| p.upper[j]).collect(),
            rhs,
        };
        let fixed_cost = fixed.iter().map(|&e| p.cost[e]).sum();
        Self {
            lp,
            kept,
            position,
            fixed,
            fixed_cost,
            num_cols: p.num_cols(),
        }
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_cols];
        for (k, &j) in self.kept.iter().enumerate() {
            out[j] = x[k];
        }
        for &e in &self.fixed {
            out[e] = 1.0;
        }
        out
    }

    fn shrink(&self, x: &[f64]) -> Vec<f64> {
        self.kept.iter().map(|&j| x[j]).collect()
    }
}

/// Column sets of the vehicle rows and request rows; each sums to one.
fn choice_groups(model: &AssignmentModel) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); model.num_vehicles() + model.num_requests];
    for e in 0..model.num_edges {
        groups[model.edge_vehicle[e]].push(e);
        for &r in &model.edge_requests[e] {
            groups[model.num_vehicles() + r].push(e);
        }
    }
    for r in 0..model.num_requests {
        groups[model.num_vehicles() + r].push(model.dummy_col(r));
    }
    groups
}

/// Integral point near a fractional one: vehicles in order of their
/// strongest column take the heaviest edge whose requests are still free,
/// falling back to the default edge.
fn round_solution(model: &AssignmentModel, x: &[f64]) -> Vec<f64> {
    let nv = model.num_vehicles();
    let mut options: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for e in 0..model.num_edges {
        if x[e] > 1e-6 {
            options[model.edge_vehicle[e]].push(e);
        }
    }
    for o in &mut options {
        o.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    }
    let mut order: Vec<usize> = (0..nv).collect();
    let top = |v: usize| options[v].first().map_or(0.0, |&e| x[e]);
    order.sort_by(|&a, &b| top(b).total_cmp(&top(a)).then(a.cmp(&b)));
    let mut taken = vec![false; model.num_requests];
    let mut chosen = model.default_edge.clone();
    for v in order {
        if let Some(&e) = options[v]
            .iter()
            .find(|&&e| model.edge_requests[e].iter().all(|&r| !taken[r]))
        {
            chosen[v] = e;
            for &r in &model.edge_requests[e] {
                taken[r] = true;
            }
        }
    }
    let mut out = vec![0.0; model.lp.num_cols()];
    for &e in &chosen {
        out[e] = 1.0;
    }
    for r in 0..model.num_requests {
        if !taken[r] {
            out[model.dummy_col(r)] = 1.0;
        }
    }
    if model.uses_zones {
        let base = model.num_edges + model.num_requests;
        for z in 0..model.num_zones {
            let y: f64 = chosen.iter().map(|&e| model.edge_supply[e][z]).sum();
            let dev = model.objective.phi[z] - y;
            out[base + z] = dev.max(0.0);
            out[base + model.num_zones + z] = (-dev).max(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub node_limit: usize,
    pub time_budget: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let b = BnbOptions::default();
        Self {
            node_limit: b.node_limit,
            time_budget: b.time_budget,
        }
    }
}

/// Exact optimum by LP-based branch-and-bound, seeded with the
/// all-default incumbent. Falls back to the incumbent when the budget runs
/// out, flagged `optimal = false`.
pub fn solve_assignment(model: &AssignmentModel, options: SolveOptions) -> Result<Assignment, AssignmentError> {
    if model.default_edge.contains(&usize::MAX) {
        return Err(AssignmentError::ModelInfeasible);
    }
    let x0 = default_solution(model);
    let obj0 = model.lp.objective(&x0);
    let reduced = Reduced::new(model);
    let round = |x: &[f64]| Some(reduced.shrink(&round_solution(model, &reduced.expand(x))));
    let hints = MipHints {
        groups: choice_groups(model)
            .iter()
            .map(|g| g.iter().filter_map(|&j| reduced.position[j]).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect(),
        heuristic: Some(&round),
    };
    let binary: Vec<bool> = reduced.kept.iter().map(|&j| model.binary[j]).collect();
    let res = solve_mip(
        &reduced.lp,
        &binary,
        Some((reduced.shrink(&x0), obj0 - reduced.fixed_cost)),
        BnbOptions {
            node_limit: options.node_limit,
            time_budget: options.time_budget,
        },
        &hints,
    )
    .map(|mut r| {
        r.x = reduced.expand(&r.x);
        r
    })
    .map_err(|e| match e {
        MipFailure::Infeasible => AssignmentError::ModelInfeasible,
        MipFailure::NoIncumbent => AssignmentError::BudgetExceededWithNoIncumbent,
    })?;
    log::debug!("assignment search used {} nodes", res.nodes);
    if !res.optimal {
        log::warn!("assignment search stopped after {} nodes; using incumbent", res.nodes);
    }
    decode(model, &res.x, res.optimal)
}

/// CPLEX-style LP text for cross-checking with external solvers.
pub fn write_lp_format(model: &AssignmentModel) -> String {
    let name = |j: usize| -> String {
        let ne = model.num_edges;
        let nr = model.num_requests;
        let nz = model.num_zones;
        if j < ne {
            format!("x{j}")
        } else if j < ne + nr {
            format!("l{}", model.request_ids[j - ne])
        } else if j < ne + nr + nz {
            format!("dp{}", j - ne - nr)
        } else {
            format!("dm{}", j - ne - nr - nz)
        }
    };
    let mut out = String::from("\\ rtvz assignment\nMinimize\n obj:");
    for (j, &c) in model.lp.cost.iter().enumerate() {
        let _ = write!(out, " {}", term_abs(c, &name(j)));
    }
    out.push_str("\nSubject To\n");
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.lp.num_rows];
    for (j, col) in model.lp.cols.iter().enumerate() {
        for &(i, a) in col {
            rows[i].push((j, a));
        }
    }
    let nv = model.num_vehicles();
    for (i, row) in rows.iter().enumerate() {
        let label = if i < nv {
            format!("v{}", model.vehicle_ids[i])
        } else if i < nv + model.num_requests {
            format!("r{}", model.request_ids[i - nv])
        } else {
            format!("z{}", i - nv - model.num_requests)
        };
        let _ = write!(out, " {label}:");
        for &(j, a) in row {
            let _ = write!(out, " {}", term_abs(a, &name(j)));
        }
        let _ = writeln!(out, " = {}", model.lp.rhs[i]);
    }
    out.push_str("Bounds\n");
    for j in 0..model.lp.num_cols() {
        if !model.binary[j] {
            let _ = writeln!(out, " {} >= 0", name(j));
        }
    }
    out.push_str("Binary\n");
    for j in 0..model.lp.num_cols() {
        if model.binary[j] {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    out.push_str("End\n");
    out
}

fn term_abs(c: f64, name: &str) -> String {
    if c < 0.0 {
        format!("- {} {name}", -c)
    } else {
        format!("+ {c} {name}")
    }
}
