//! Edge costs for the integrated assignment: added VMT, per-zone supply
//! contribution vectors and the objective coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{EdgeKind, RtvzGraph};
use crate::ids::{NodeId, Seconds};
use crate::network::{ShortestPathTables, ZoneSet};
use crate::routing::{Schedule, StopKind};
use crate::sim::VehicleState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("beta ({beta}) must exceed the sum of zone weights ({alpha_sum})")]
    BetaTooSmall { beta: f64, alpha_sum: f64 },
    #[error("gamma must be at least 1, got {0}")]
    GammaBelowOne(f64),
    #[error("zone weights must be finite and non-negative")]
    NegativeAlpha,
    #[error("{got} zone weights for {zones} zones")]
    AlphaLength { got: usize, zones: usize },
}

/// A point the route must reach, with the load change applied on arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Waypoint {
    pub node: NodeId,
    /// Earliest departure from the waypoint (waiting accrues in its zone).
    pub time: Seconds,
    /// +1 for a pickup, -1 for a dropoff, 0 for a pass-through target.
    pub load_delta: i32,
}

/// Route shape consumed by [`supply_contribution`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplyRoute {
    pub start: NodeId,
    pub start_time: Seconds,
    pub initial_load: u32,
    pub waypoints: Vec<Waypoint>,
}

impl SupplyRoute {
    pub fn stay(node: NodeId, time: Seconds, load: u32) -> Self {
        Self {
            start: node,
            start_time: time,
            initial_load: load,
            waypoints: vec![],
        }
    }

    /// Empty drive to `target` departing at `time`.
    pub fn drive(start: NodeId, time: Seconds, target: NodeId, tables: &ShortestPathTables) -> Self {
        Self {
            start,
            start_time: time,
            initial_load: 0,
            waypoints: vec![Waypoint {
                node: target,
                time: time + tables.time(start, target),
                load_delta: 0,
            }],
        }
    }

    /// Panics if the schedule starts at a virtual depot.
    pub fn from_schedule(s: &Schedule) -> Self {
        Self {
            start: s.start_node.expect("schedule with a physical start"),
            start_time: s.start_time,
            initial_load: s.initial_load,
            waypoints: s
                .stops
                .iter()
                .map(|st| Waypoint {
                    node: st.node,
                    time: st.time,
                    load_delta: match st.kind {
                        StopKind::Pickup => 1,
                        StopKind::Dropoff => -1,
                    },
                })
                .collect(),
        }
    }
}

/// Seats made available to each zone over the horizon, in units of
/// vehicle seats (seat-seconds divided by the horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyVector {
    pub y: Vec<f64>,
}

impl SupplyVector {
    pub fn zeros(n: usize) -> Self {
        Self { y: vec![0.0; n] }
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn add_assign(&mut self, other: &SupplyVector) {
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += b;
        }
    }
}

/// Raw seat-seconds per zone over `[now, now + horizon]`.
pub fn seat_seconds(
    route: &SupplyRoute,
    now: Seconds,
    zones: &ZoneSet,
    tables: &ShortestPathTables,
    horizon: Seconds,
    capacity: u32,
) -> Vec<f64> {
    let end = now + horizon;
    let mut acc = vec![0.0; zones.len()];
    let mut add = |node: NodeId, o: i64, from: Seconds, to: Seconds| {
        let lo = from.max(now);
        let hi = to.min(end);
        if hi > lo && o > 0 {
            acc[zones.zone_of(node).index()] += (o * (hi - lo)) as f64;
        }
    };

    let mut o = capacity as i64 - route.initial_load as i64;
    let mut cur = route.start;
    // time before the route starts (finishing an edge) counts toward the start node
    add(cur, o, now, route.start_time);
    let mut t = route.start_time.max(now);
    for wp in &route.waypoints {
        if t >= end {
            break;
        }
        let path = tables
            .path_between(cur, wp.node)
            .expect("route between unreachable nodes");
        for hop in path.windows(2) {
            let dt = tables.time(hop[0], hop[1]);
            add(hop[1], o, t, t + dt);
            t += dt;
        }
        if wp.time > t {
            add(wp.node, o, t, wp.time);
            t = wp.time;
        }
        o -= wp.load_delta as i64;
        cur = wp.node;
    }
    add(cur, o, t, end);
    acc
}

/// Seat supply per zone over the horizon: each traversed edge's time goes
/// to the zone of its head node, weighted by the seats free while driving
/// it. The vehicle parks at its last waypoint for whatever remains.
pub fn supply_contribution(
    route: &SupplyRoute,
    now: Seconds,
    zones: &ZoneSet,
    tables: &ShortestPathTables,
    horizon: Seconds,
    capacity: u32,
) -> SupplyVector {
    let h = horizon as f64;
    SupplyVector {
        y: seat_seconds(route, now, zones, tables, horizon, capacity)
            .into_iter()
            .map(|s| s / h)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Weight on the supply deviation of each zone.
    pub alpha: Vec<f64>,
    /// Penalty for leaving a request unserved this epoch.
    pub beta: f64,
    /// Multiplier on solo trips taken by idle or rebalancing vehicles.
    pub gamma: f64,
}

impl CostParams {
    /// Uniform `alpha` with the default rejection penalty.
    pub fn uniform(num_zones: usize, alpha: f64, gamma: f64) -> Self {
        let alpha = vec![alpha; num_zones];
        let beta = default_beta(&alpha);
        Self { alpha, beta, gamma }
    }

    pub fn validate(&self, num_zones: usize) -> Result<(), CostError> {
        if self.alpha.len() != num_zones {
            return Err(CostError::AlphaLength {
                got: self.alpha.len(),
                zones: num_zones,
            });
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(CostError::NegativeAlpha);
        }
        let alpha_sum: f64 = self.alpha.iter().sum();
        if !(self.beta > alpha_sum) {
            return Err(CostError::BetaTooSmall {
                beta: self.beta,
                alpha_sum,
            });
        }
        if !(self.gamma >= 1.0) {
            return Err(CostError::GammaBelowOne(self.gamma));
        }
        Ok(())
    }
}

/// Rejection penalty large enough that serving a reachable request always
/// beats dropping it, for trips up to a thousand kilometres.
pub fn default_beta(alpha: &[f64]) -> f64 {
    alpha.iter().sum::<f64>() + 1000.0
}

/// Linear objective over the RTVZ edges. VMT enters in kilometres.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub edge_cost: Vec<f64>,
    pub dummy_cost: f64,
    pub zone_weight: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ObjectiveSpec {
    pub fn uses_zones(&self) -> bool {
        self.zone_weight.iter().any(|&a| a > 0.0)
    }
}

pub fn assemble_objective(graph: &RtvzGraph, phi: &[f64], params: &CostParams) -> Result<ObjectiveSpec, CostError> {
    params.validate(graph.num_zones)?;
    let edge_cost = graph
        .edges
        .iter()
        .map(|e| {
            let km = e.u_m / 1000.0;
            let state = graph.vehicles[e.vehicle].state;
            match e.kind {
                EdgeKind::Trip(t) if graph.trips[t.index()].requests.len() == 1 && state != VehicleState::Active => {
                    params.gamma * km
                }
                _ => km,
            }
        })
        .collect();
    Ok(ObjectiveSpec {
        edge_cost,
        dummy_cost: params.beta,
        zone_weight: params.alpha.clone(),
        phi: phi.to_vec(),
    })
}
