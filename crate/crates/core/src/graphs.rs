//! Shareability graph, trip enumeration and the RTVZ graph that links
//! vehicles to trips and to rebalancing zones.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::costs::{supply_contribution, SupplyRoute, SupplyVector};
use crate::demand::Request;
use crate::ids::{RequestId, Seconds, TripId, VehicleId, ZoneId};
use crate::network::{ShortestPathTables, ZoneSet};
use crate::routing::{insertion_feasible, pairwise_shareable, LosParams, Schedule};
use crate::sim::{Vehicle, VehicleState};

/// Pairwise request shareability graph over the outstanding requests, which
/// are referred to by their position in the input slice.
#[derive(Debug, Clone)]
pub struct PrsGraph {
    pub requests: Vec<RequestId>,
    adj: Vec<Vec<bool>>,
}

impl PrsGraph {
    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.adj[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn build_prs_graph(
    requests: &[Request],
    now: Seconds,
    capacity: u32,
    los: LosParams,
    tables: &ShortestPathTables,
) -> PrsGraph {
    let n = requests.len();
    let mut adj = vec![vec![false; n]; n];
    if capacity >= 2 {
        for i in 0..n {
            for j in i + 1..n {
                let ok = pairwise_shareable(&requests[i], &requests[j], now, capacity, los, tables);
                adj[i][j] = ok;
                adj[j][i] = ok;
            }
        }
    }
    PrsGraph {
        requests: requests.iter().map(|r| r.id).collect(),
        adj,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub id: TripId,
    pub requests: Vec<RequestId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripLimits {
    /// Largest trip considered; capped by vehicle capacity.
    pub max_size: usize,
    /// Trips retained per size above one.
    pub max_per_size: usize,
}

impl Default for TripLimits {
    fn default() -> Self {
        Self {
            max_size: 4,
            max_per_size: 400,
        }
    }
}

/// Enumerated trips with, for each, the vehicles that can serve it and their
/// optimal schedules.
#[derive(Debug, Clone, Default)]
pub struct TripSet {
    pub trips: Vec<Trip>,
    /// Request positions (into the outstanding slice) per trip, ascending.
    pub members: Vec<Vec<usize>>,
    /// (vehicle position, schedule) pairs per trip, by vehicle position.
    pub feasible: Vec<Vec<(usize, Schedule)>>,
}

/// Necessary condition: every pickup reachable from the plan origin in time.
fn reachable(v: &Vehicle, trip: &[&Request], now: Seconds, los: LosParams, tables: &ShortestPathTables) -> bool {
    let (node, t0) = v.plan_origin(now);
    trip.iter()
        .all(|r| t0.saturating_add(tables.time(node, r.origin)) <= r.arrival + los.max_wait)
}

fn feasible_vehicles(
    trip: &[&Request],
    candidates: impl Iterator<Item = usize>,
    vehicles: &[Vehicle],
    now: Seconds,
    los: LosParams,
    tables: &ShortestPathTables,
) -> Vec<(usize, Schedule)> {
    candidates
        .filter(|&vi| reachable(&vehicles[vi], trip, now, los, tables))
        .filter_map(|vi| {
            insertion_feasible(&vehicles[vi], trip, now, los, tables)
                .ok()
                .map(|s| (vi, s))
        })
        .collect()
}

/// Grows trips clique by clique. A k-trip is considered only when every
/// (k-1)-subset was retained, and only vehicles feasible for all of those
/// subsets are tried (feasibility is monotone under removing requests).
/// All singletons are listed even when no vehicle can serve them.
pub fn enumerate_trips(
    prs: &PrsGraph,
    requests: &[Request],
    vehicles: &[Vehicle],
    now: Seconds,
    los: LosParams,
    tables: &ShortestPathTables,
    limits: TripLimits,
) -> TripSet {
    let capacity = vehicles.iter().map(|v| v.capacity).max().unwrap_or(0) as usize;
    let max_size = limits.max_size.min(capacity);
    let mut set = TripSet::default();
    let push = |set: &mut TripSet, members: Vec<usize>, feas: Vec<(usize, Schedule)>| {
        set.trips.push(Trip {
            id: TripId::from(set.trips.len()),
            requests: members.iter().map(|&i| requests[i].id).collect(),
        });
        set.members.push(members);
        set.feasible.push(feas);
    };

    let mut level: Vec<usize> = Vec::new();
    for i in 0..requests.len() {
        let feas = feasible_vehicles(&[&requests[i]], 0..vehicles.len(), vehicles, now, los, tables);
        if !feas.is_empty() {
            level.push(set.trips.len());
        }
        push(&mut set, vec![i], feas);
    }

    for _size in 2..=max_size {
        let index: HashMap<Vec<usize>, usize> = level.iter().map(|&t| (set.members[t].clone(), t)).collect();
        let mut next = Vec::new();
        'grow: for &t in &level {
            let base = set.members[t].clone();
            let last = *base.last().expect("non-empty trip");
            for r in last + 1..requests.len() {
                if !base.iter().all(|&m| prs.adjacent(m, r)) {
                    continue;
                }
                let mut cand = base.clone();
                cand.push(r);
                // all (k-1)-subsets must have survived
                let mut subsets = Vec::with_capacity(cand.len());
                for skip in 0..cand.len() {
                    let sub: Vec<usize> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &m)| m)
                        .collect();
                    match index.get(&sub) {
                        Some(&s) => subsets.push(s),
                        None => break,
                    }
                }
                if subsets.len() != cand.len() {
                    continue;
                }
                let mut common: Vec<usize> = set.feasible[subsets[0]].iter().map(|(v, _)| *v).collect();
                for &s in &subsets[1..] {
                    let other = &set.feasible[s];
                    common.retain(|v| other.iter().any(|(w, _)| w == v));
                }
                if common.is_empty() {
                    continue;
                }
                let trip: Vec<&Request> = cand.iter().map(|&i| &requests[i]).collect();
                let feas = feasible_vehicles(&trip, common.into_iter(), vehicles, now, los, tables);
                if feas.is_empty() {
                    continue;
                }
                next.push(set.trips.len());
                push(&mut set, cand, feas);
                if next.len() >= limits.max_per_size {
                    break 'grow;
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    /// Serve a trip (on top of any committed requests).
    Trip(TripId),
    /// Idle vehicle heads to a zone centroid; its own zone means stay put.
    Zone(ZoneId),
    /// Active or rebalancing vehicle keeps its current plan.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtvzEdge {
    /// Position of the vehicle in [`RtvzGraph::vehicles`].
    pub vehicle: usize,
    pub kind: EdgeKind,
    /// Added VMT in metres.
    pub u_m: f64,
    pub supply: SupplyVector,
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleNode {
    pub id: VehicleId,
    pub state: VehicleState,
    pub zone: ZoneId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtvzOptions {
    /// Add edges from idle vehicles to every other zone.
    pub zone_edges: bool,
}

/// Vehicle/trip/zone graph. Every vehicle's first edge is its default
/// (stay or keep); each request implicitly has a dummy edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RtvzGraph {
    pub now: Seconds,
    pub horizon: Seconds,
    pub num_zones: usize,
    pub vehicles: Vec<VehicleNode>,
    pub requests: Vec<RequestId>,
    pub trips: Vec<Trip>,
    /// Request positions per trip.
    pub trip_members: Vec<Vec<usize>>,
    pub edges: Vec<RtvzEdge>,
}

impl RtvzGraph {
    pub fn edges_of(&self, vehicle: usize) -> impl Iterator<Item = (usize, &RtvzEdge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.vehicle == vehicle)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_rtvz_graph(
    trips: &TripSet,
    requests: &[Request],
    vehicles: &[Vehicle],
    zones: &ZoneSet,
    tables: &ShortestPathTables,
    now: Seconds,
    horizon: Seconds,
    options: RtvzOptions,
) -> RtvzGraph {
    let mut per_vehicle: Vec<Vec<(usize, &Schedule)>> = vec![Vec::new(); vehicles.len()];
    for (t, feas) in trips.feasible.iter().enumerate() {
        for (vi, s) in feas {
            per_vehicle[*vi].push((t, s));
        }
    }

    let mut nodes = Vec::with_capacity(vehicles.len());
    let mut edges = Vec::new();
    for (vi, v) in vehicles.iter().enumerate() {
        let (origin, start) = v.plan_origin(now);
        let own_zone = zones.zone_of(origin);
        nodes.push(VehicleNode {
            id: v.id,
            state: v.state,
            zone: own_zone,
        });
        let supply = |route: &SupplyRoute| supply_contribution(route, now, zones, tables, horizon, v.capacity);

        // default edge
        let (kind, route) = match v.state {
            VehicleState::Idle => (EdgeKind::Zone(own_zone), SupplyRoute::stay(origin, start, 0)),
            VehicleState::Rebalancing => {
                let target = v.rebalance.expect("rebalancing vehicle has a target").node;
                (EdgeKind::Keep, SupplyRoute::drive(origin, start, target, tables))
            }
            VehicleState::Active => (
                EdgeKind::Keep,
                SupplyRoute::from_schedule(&v.current_schedule(now, tables)),
            ),
        };
        edges.push(RtvzEdge {
            vehicle: vi,
            kind,
            u_m: 0.0,
            supply: supply(&route),
            schedule: None,
        });

        let committed = match v.state {
            VehicleState::Active => v.remaining_vmt(now, tables),
            _ => 0.0,
        };
        for &(t, s) in &per_vehicle[vi] {
            edges.push(RtvzEdge {
                vehicle: vi,
                kind: EdgeKind::Trip(trips.trips[t].id),
                u_m: s.total_vmt - committed,
                supply: supply(&SupplyRoute::from_schedule(s)),
                schedule: Some(s.clone()),
            });
        }

        if options.zone_edges && v.state == VehicleState::Idle {
            for z in zones.zones() {
                if z.id == own_zone {
                    continue;
                }
                edges.push(RtvzEdge {
                    vehicle: vi,
                    kind: EdgeKind::Zone(z.id),
                    u_m: tables.distance(origin, z.centroid),
                    supply: supply(&SupplyRoute::drive(origin, start, z.centroid, tables)),
                    schedule: None,
                });
            }
        }
    }

    RtvzGraph {
        now,
        horizon,
        num_zones: zones.len(),
        vehicles: nodes,
        requests: requests.iter().map(|r| r.id).collect(),
        trips: trips.trips.clone(),
        trip_members: trips.members.clone(),
        edges,
    }
}

/// Human-readable listing of the graph for debugging.
pub fn dump_rtvz(graph: &RtvzGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# rtvz now={} horizon={} zones={}",
        graph.now, graph.horizon, graph.num_zones
    );
    for v in &graph.vehicles {
        let _ = writeln!(out, "vehicle {} state={:?} zone={}", v.id, v.state, v.zone);
    }
    for t in &graph.trips {
        let ids: Vec<String> = t.requests.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "trip {} requests={}", t.id, ids.join(" "));
    }
    for (i, e) in graph.edges.iter().enumerate() {
        let target = match e.kind {
            EdgeKind::Trip(t) => format!("trip:{t}"),
            EdgeKind::Zone(z) => format!("zone:{z}"),
            EdgeKind::Keep => "keep".to_string(),
        };
        let y: Vec<String> = e
            .supply
            .y
            .iter()
            .enumerate()
            .filter(|(_, y)| **y != 0.0)
            .map(|(z, y)| format!("{z}:{y:.4}"))
            .collect();
        let _ = writeln!(
            out,
            "edge {i} vehicle={} {target} u_m={:.1} y=[{}]",
            graph.vehicles[e.vehicle].id,
            e.u_m,
            y.join(" ")
        );
    }
    for r in &graph.requests {
        let _ = writeln!(out, "dummy request={r}");
    }
    out
}
