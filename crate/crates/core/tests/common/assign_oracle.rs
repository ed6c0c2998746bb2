//! Brute-force references for the epoch assignment problem.

use std::collections::HashMap;

use rand::Rng;
use ridepool_core::graphs::{RtvzOptions, TripLimits};
use ridepool_core::network::{build_rect_zones, Rect};
use ridepool_core::sim::{RebalanceTarget, VehicleState};
use ridepool_core::{
    all_pairs_shortest, build_prs_graph, build_rtvz_graph, enumerate_trips, insertion_feasible, LosParams, NodeId,
    ObjectiveSpec, Request, RequestId, RoadNetwork, RtvzGraph, Seconds, ShortestPathTables, Vehicle, VehicleId, ZoneId,
    ZoneSet,
};

pub struct Instance {
    pub net: RoadNetwork,
    pub tables: ShortestPathTables,
    pub zones: ZoneSet,
    pub requests: Vec<Request>,
    pub vehicles: Vec<Vehicle>,
    pub now: Seconds,
}

pub const LOS: LosParams = LosParams {
    max_wait: 420,
    max_delay: 900,
};

/// 6x6 grid, 400 m blocks, split into `k` vertical strips as zones; up to
/// four vehicles in mixed states and up to four fresh requests.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let net = super::grid(6, 400.0, 48.0);
    let tables = all_pairs_shortest(&net);
    let k = rng.random_range(1..=6usize);
    let width = 2000.0 / k as f64;
    let rects: Vec<Rect> = (0..k)
        .map(|i| Rect {
            min_x: i as f64 * width - if i == 0 { 1.0 } else { 0.0 },
            min_y: -1.0,
            max_x: (i + 1) as f64 * width + if i + 1 == k { 1.0 } else { 0.0 },
            max_y: 2001.0,
        })
        .collect();
    let zones = build_rect_zones(&net, &rects).unwrap();
    let now: Seconds = 1000;
    let n = net.num_nodes() as u32;
    let mut next_id = 0u64;
    let mut fresh = |rng: &mut dyn rand::RngCore, arrival: Seconds| loop {
        let o = NodeId(rng.random_range(0..n));
        let d = NodeId(rng.random_range(0..n));
        if o != d {
            next_id += 1;
            return Request::new(RequestId(next_id), o, d, arrival, &tables).unwrap();
        }
    };

    let nv = rng.random_range(0..=4usize);
    let mut vehicles = Vec::new();
    for i in 0..nv {
        let node = NodeId(rng.random_range(0..n));
        let mut v = Vehicle::new(VehicleId(i as u32), rng.random_range(2..=4), node, now);
        match rng.random_range(0..3) {
            0 => {}
            1 => {
                let z = &zones.zones()[rng.random_range(0..zones.len())];
                v.state = VehicleState::Rebalancing;
                v.rebalance = Some(RebalanceTarget {
                    zone: z.id,
                    node: z.centroid,
                });
            }
            _ => {
                let arrival = now - rng.random_range(0..200);
                let q = fresh(rng, arrival);
                if let Ok(s) = insertion_feasible(&v, &[&q], now, LOS, &tables) {
                    v.commit(&s, vec![q]);
                }
            }
        }
        vehicles.push(v);
    }
    let nr = rng.random_range(1..=4usize);
    let requests = (0..nr)
        .map(|_| {
            let arrival = now - rng.random_range(0..200);
            fresh(rng, arrival)
        })
        .collect();
    Instance {
        net,
        tables,
        zones,
        requests,
        vehicles,
        now,
    }
}

impl Instance {
    pub fn graph(&self, zone_edges: bool, horizon: Seconds) -> RtvzGraph {
        let cap = self.vehicles.iter().map(|v| v.capacity).max().unwrap_or(4);
        let prs = build_prs_graph(&self.requests, self.now, cap, LOS, &self.tables);
        let trips = enumerate_trips(
            &prs,
            &self.requests,
            &self.vehicles,
            self.now,
            LOS,
            &self.tables,
            TripLimits::default(),
        );
        build_rtvz_graph(
            &trips,
            &self.requests,
            &self.vehicles,
            &self.zones,
            &self.tables,
            self.now,
            horizon,
            RtvzOptions { zone_edges },
        )
    }
}

pub fn zone_count(g: &RtvzGraph) -> usize {
    g.num_zones
}

/// Requests covered by an edge, by position in `graph.requests`.
fn covered(graph: &RtvzGraph, e: usize) -> Vec<usize> {
    use ridepool_core::graphs::EdgeKind;
    match graph.edges[e].kind {
        EdgeKind::Trip(t) => {
            let trip = &graph.trips[t.index()];
            trip.requests
                .iter()
                .map(|id| graph.requests.iter().position(|r| r == id).unwrap())
                .collect()
        }
        _ => vec![],
    }
}

/// Objective of choosing `edges` (one per vehicle), written out from the
/// cost definition.
pub fn cost_of(graph: &RtvzGraph, obj: &ObjectiveSpec, edges: &[usize]) -> f64 {
    let mut served = vec![false; graph.requests.len()];
    let mut total = 0.0;
    let mut supply = vec![0.0; graph.num_zones];
    for &e in edges {
        total += obj.edge_cost[e];
        for r in covered(graph, e) {
            served[r] = true;
        }
        for (z, y) in graph.edges[e].supply.y.iter().enumerate() {
            supply[z] += y;
        }
    }
    total += obj.dummy_cost * served.iter().filter(|s| !**s).count() as f64;
    for z in 0..graph.num_zones {
        total += obj.zone_weight[z] * (obj.phi[z] - supply[z]).abs();
    }
    total
}

/// Best objective over every combination of one edge per vehicle in which
/// no request is covered twice. Returns (objective, requests served).
pub fn exhaustive(graph: &RtvzGraph, obj: &ObjectiveSpec) -> (f64, usize) {
    let per_vehicle: Vec<Vec<usize>> = (0..graph.vehicles.len())
        .map(|v| graph.edges_of(v).map(|(i, _)| i).collect())
        .collect();
    let mut best = (f64::INFINITY, 0);
    let mut pick = Vec::new();
    fn rec(
        graph: &RtvzGraph,
        obj: &ObjectiveSpec,
        per_vehicle: &[Vec<usize>],
        pick: &mut Vec<usize>,
        best: &mut (f64, usize),
    ) {
        if pick.len() == per_vehicle.len() {
            let mut seen = vec![0; graph.requests.len()];
            for &e in pick.iter() {
                for r in covered(graph, e) {
                    seen[r] += 1;
                }
            }
            if seen.iter().any(|&c| c > 1) {
                return;
            }
            let c = cost_of(graph, obj, pick);
            let served = seen.iter().filter(|&&c| c == 1).count();
            if c < best.0 {
                *best = (c, served);
            }
            return;
        }
        for &e in &per_vehicle[pick.len()] {
            pick.push(e);
            rec(graph, obj, per_vehicle, pick, best);
            pick.pop();
        }
    }
    rec(graph, obj, &per_vehicle, &mut pick, &mut best);
    best
}

/// Min-cost matching of vehicles to disjoint trips by dynamic programming
/// over (vehicle, covered-request bitmask); zone terms are ignored, so this
/// is the plain trip-vehicle assignment.
pub fn rtv_matching(graph: &RtvzGraph, edge_cost: &[f64], beta: f64) -> f64 {
    use ridepool_core::graphs::EdgeKind;
    let nr = graph.requests.len();
    let full = 1usize << nr;
    let mut dp: HashMap<usize, f64> = HashMap::new();
    dp.insert(0, 0.0);
    for v in 0..graph.vehicles.len() {
        let mut next: HashMap<usize, f64> = HashMap::new();
        for (&mask, &c) in &dp {
            // staying with the current plan costs nothing
            let e = next.entry(mask).or_insert(f64::INFINITY);
            *e = e.min(c);
            for (i, edge) in graph.edges_of(v) {
                if !matches!(edge.kind, EdgeKind::Trip(_)) {
                    continue;
                }
                let m: usize = covered(graph, i).iter().map(|r| 1 << r).sum();
                if m & mask != 0 {
                    continue;
                }
                let e = next.entry(mask | m).or_insert(f64::INFINITY);
                *e = e.min(c + edge_cost[i]);
            }
        }
        dp = next;
    }
    (0..full)
        .filter_map(|m| dp.get(&m).map(|c| c + beta * (nr - m.count_ones() as usize) as f64))
        .fold(f64::INFINITY, f64::min)
}

pub fn random_phi(rng: &mut impl Rng, zones: usize) -> Vec<f64> {
    (0..zones).map(|_| rng.random_range(0.0..8.0)).collect()
}

pub fn zone_ids(z: &ZoneSet) -> Vec<ZoneId> {
    z.zones().iter().map(|z| z.id).collect()
}
