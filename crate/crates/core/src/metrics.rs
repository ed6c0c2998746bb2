//! Performance measures recomputed from the event journal alone.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, RequestId, Seconds, VehicleId};
use crate::network::{RoadNetwork, ShortestPathTables};
use crate::sim::{DriveClass, EventKind, Journal};

/// Static facts the journal does not carry.
#[derive(Debug, Clone, Copy)]
pub struct MetricsContext<'a> {
    pub net: &'a RoadNetwork,
    pub tables: &'a ShortestPathTables,
    pub capacity: u32,
    pub max_wait: Seconds,
    pub max_delay: Seconds,
    /// Half-open `[start, end)` measurement window.
    pub window: (Seconds, Seconds),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
}

impl Distribution {
    pub fn from_values(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        Self {
            count: v.len(),
            mean: Some(v.iter().sum::<f64>() / v.len() as f64),
            p50: Some(q(0.5)),
            p90: Some(q(0.9)),
            max: v.last().copied(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub wait: usize,
    pub delay: usize,
    pub capacity: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.wait + self.delay + self.capacity
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub requests: usize,
    pub served: usize,
    pub expired: usize,
    /// In-window requests still waiting or on board when the run ended.
    pub unresolved: usize,
    pub service_rate: Option<f64>,
    /// Kilometres per served request.
    pub vmr: Option<f64>,
    pub active_vmr: Option<f64>,
    pub idle_vmr: Option<f64>,
    pub rebalancing_vmr: Option<f64>,
    pub shared_trip_ratio: Option<f64>,
    pub avg_wait: Option<f64>,
    pub avg_delay: Option<f64>,
    /// Mean load as a fraction of capacity while vehicles are on a tour.
    pub avg_occupancy: Option<f64>,
    pub total_vmt_km: f64,
    pub tour_sizes: BTreeMap<usize, usize>,
    pub tour_distance_km: Distribution,
    /// Level-of-service breaches over the whole journal.
    pub violations: Violations,
}

const CSV_FIELDS: [&str; 20] = [
    "requests",
    "served",
    "expired",
    "unresolved",
    "service_rate",
    "vmr",
    "active_vmr",
    "idle_vmr",
    "rebalancing_vmr",
    "shared_trip_ratio",
    "avg_wait",
    "avg_delay",
    "avg_occupancy",
    "total_vmt_km",
    "tours",
    "mean_tour_size",
    "mean_tour_km",
    "wait_violations",
    "delay_violations",
    "capacity_violations",
];

impl MetricsReport {
    pub fn csv_header() -> String {
        CSV_FIELDS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let o = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let tours: usize = self.tour_sizes.values().sum();
        let mean_size = if tours > 0 {
            Some(self.tour_sizes.iter().map(|(s, c)| s * c).sum::<usize>() as f64 / tours as f64)
        } else {
            None
        };
        [
            self.requests.to_string(),
            self.served.to_string(),
            self.expired.to_string(),
            self.unresolved.to_string(),
            o(self.service_rate),
            o(self.vmr),
            o(self.active_vmr),
            o(self.idle_vmr),
            o(self.rebalancing_vmr),
            o(self.shared_trip_ratio),
            o(self.avg_wait),
            o(self.avg_delay),
            o(self.avg_occupancy),
            format!("{}", self.total_vmt_km),
            tours.to_string(),
            o(mean_size),
            o(self.tour_distance_km.mean),
            self.violations.wait.to_string(),
            self.violations.delay.to_string(),
            self.violations.capacity.to_string(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, Default)]
struct RequestLog {
    arrival: Option<Seconds>,
    pickup: Option<Seconds>,
    dropoff: Option<Seconds>,
    origin: Option<NodeId>,
    destination: Option<NodeId>,
    vehicle: Option<VehicleId>,
    expired: bool,
}

/// A vehicle's service period between leaving idle and becoming idle again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub vehicle: VehicleId,
    pub start: Seconds,
    /// `None` if the journal ends mid-tour.
    pub end: Option<Seconds>,
    pub size: usize,
    /// Active plus deadhead metres driven during the tour.
    pub distance_m: f64,
}

/// Distance of each drive event, from the vehicle's previous position.
fn drive_lengths(journal: &Journal, net: &RoadNetwork) -> Vec<f64> {
    let mut pos: HashMap<VehicleId, NodeId> = HashMap::new();
    let mut out = vec![0.0; journal.events.len()];
    for (i, e) in journal.events.iter().enumerate() {
        let (Some(v), Some(n)) = (e.vehicle, e.node) else {
            continue;
        };
        match e.kind {
            EventKind::Init => {
                pos.insert(v, n);
            }
            k if k.drive_class().is_some() => {
                if let Some(&from) = pos.get(&v) {
                    out[i] = net.edge_between(from, n).map_or(0.0, |ed| ed.length_m);
                }
                pos.insert(v, n);
            }
            _ => {}
        }
    }
    out
}

fn tours_with_lengths(journal: &Journal, lengths: &[f64]) -> Vec<Tour> {
    let mut open: HashMap<VehicleId, (Tour, BTreeSet<RequestId>)> = HashMap::new();
    let mut done = Vec::new();
    for (i, e) in journal.events.iter().enumerate() {
        let Some(v) = e.vehicle else { continue };
        match e.kind {
            EventKind::Assign => {
                open.entry(v).or_insert_with(|| {
                    (
                        Tour {
                            vehicle: v,
                            start: e.time,
                            end: None,
                            size: 0,
                            distance_m: 0.0,
                        },
                        BTreeSet::new(),
                    )
                });
            }
            EventKind::Pickup => {
                if let (Some((_, set)), Some(r)) = (open.get_mut(&v), e.request) {
                    set.insert(r);
                }
            }
            EventKind::DriveActive | EventKind::DriveDeadhead => {
                if let Some((t, _)) = open.get_mut(&v) {
                    t.distance_m += lengths[i];
                }
            }
            EventKind::Idle => {
                if let Some((mut t, set)) = open.remove(&v) {
                    t.end = Some(e.time);
                    t.size = set.len();
                    done.push(t);
                }
            }
            _ => {}
        }
    }
    let mut rest: Vec<Tour> = open
        .into_values()
        .map(|(mut t, set)| {
            t.size = set.len();
            t
        })
        .collect();
    done.append(&mut rest);
    done.sort_by(|a, b| a.vehicle.cmp(&b.vehicle).then(a.start.cmp(&b.start)));
    done
}

/// Tours segmented at idle boundaries. Rebalancing legs are not part of
/// any tour.
pub fn tour_statistics(journal: &Journal, net: &RoadNetwork) -> Vec<Tour> {
    tours_with_lengths(journal, &drive_lengths(journal, net))
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

pub fn compute_metrics(journal: &Journal, ctx: &MetricsContext<'_>) -> MetricsReport {
    let (m0, m1) = ctx.window;
    let in_window = |t: Seconds| t >= m0 && t < m1;
    let lengths = drive_lengths(journal, ctx.net);

    let mut reqs: BTreeMap<RequestId, RequestLog> = BTreeMap::new();
    // per-vehicle (time, occupancy after) from service events
    let mut loads: HashMap<VehicleId, Vec<(Seconds, u32)>> = HashMap::new();
    let mut vmt = [0.0f64; 3];
    let mut total_vmt = 0.0;
    let mut violations = Violations::default();
    let mut last_time = Seconds::MIN;

    for (i, e) in journal.events.iter().enumerate() {
        last_time = last_time.max(e.time);
        if let Some(o) = e.occupancy {
            if o > ctx.capacity {
                violations.capacity += 1;
            }
        }
        match e.kind {
            EventKind::Request => {
                if let Some(r) = e.request {
                    let log = reqs.entry(r).or_default();
                    log.arrival = Some(e.time);
                    log.origin = e.node;
                }
            }
            EventKind::Expire => {
                if let Some(r) = e.request {
                    reqs.entry(r).or_default().expired = true;
                }
            }
            EventKind::Pickup | EventKind::Dropoff => {
                if let (Some(r), Some(v)) = (e.request, e.vehicle) {
                    let log = reqs.entry(r).or_default();
                    log.vehicle = Some(v);
                    if e.kind == EventKind::Pickup {
                        log.pickup = Some(e.time);
                    } else {
                        log.dropoff = Some(e.time);
                        log.destination = e.node;
                    }
                    loads.entry(v).or_default().push((e.time, e.occupancy.unwrap_or(0)));
                }
            }
            k => {
                if let Some(class) = k.drive_class() {
                    total_vmt += lengths[i];
                    if in_window(e.time) {
                        let slot = match class {
                            DriveClass::Active => 0,
                            DriveClass::Deadhead => 1,
                            DriveClass::Rebalance => 2,
                        };
                        vmt[slot] += lengths[i];
                    }
                }
            }
        }
    }

    // occupancy step function: load after the last event at each instant
    let load_at = |v: VehicleId| -> Vec<(Seconds, u32)> {
        let mut steps: Vec<(Seconds, u32)> = Vec::new();
        for &(t, o) in loads.get(&v).map(|x| x.as_slice()).unwrap_or(&[]) {
            match steps.last_mut() {
                Some(last) if last.0 == t => last.1 = o,
                _ => steps.push((t, o)),
            }
        }
        steps
    };
    let mut steps_cache: HashMap<VehicleId, Vec<(Seconds, u32)>> = HashMap::new();

    let mut requests = 0;
    let mut served = 0;
    let mut expired = 0;
    let mut shared = 0;
    let mut wait_sum = 0.0;
    let mut delay_sum = 0.0;
    for log in reqs.values() {
        if let (Some(p), Some(d), Some(a), Some(o), Some(dest)) =
            (log.pickup, log.dropoff, log.arrival, log.origin, log.destination)
        {
            let w = p - a;
            let dl = d - p - ctx.tables.time(o, dest);
            if w < 0 || w > ctx.max_wait {
                violations.wait += 1;
            }
            if dl < 0 || dl > ctx.max_delay {
                violations.delay += 1;
            }
        }
        let Some(a) = log.arrival else { continue };
        if !in_window(a) {
            continue;
        }
        requests += 1;
        if log.expired {
            expired += 1;
        }
        let (Some(p), Some(d), Some(v)) = (log.pickup, log.dropoff, log.vehicle) else {
            continue;
        };
        served += 1;
        wait_sum += (p - a) as f64;
        if let (Some(o), Some(dest)) = (log.origin, log.destination) {
            delay_sum += (d - p - ctx.tables.time(o, dest)) as f64;
        }
        let steps = steps_cache.entry(v).or_insert_with(|| load_at(v));
        let is_shared = steps.iter().enumerate().any(|(k, &(t, o))| {
            let next = steps.get(k + 1).map_or(Seconds::MAX, |s| s.0);
            o >= 2 && t.max(p) < next.min(d)
        });
        if is_shared {
            shared += 1;
        }
    }

    // occupancy over tours, clipped to the window
    let tours = tours_with_lengths(journal, &lengths);
    let mut seat_time = 0.0;
    let mut tour_time = 0.0;
    for t in &tours {
        let lo = t.start.max(m0);
        let hi = t.end.unwrap_or(last_time).min(m1);
        if hi <= lo {
            continue;
        }
        tour_time += (hi - lo) as f64;
        let steps = steps_cache.entry(t.vehicle).or_insert_with(|| load_at(t.vehicle));
        for (k, &(s, o)) in steps.iter().enumerate() {
            let next = steps.get(k + 1).map_or(Seconds::MAX, |x| x.0);
            let a = s.max(lo);
            let b = next.min(hi);
            if b > a {
                seat_time += o as f64 * (b - a) as f64;
            }
        }
    }

    let in_window_tours: Vec<&Tour> = tours.iter().filter(|t| in_window(t.start)).collect();
    let mut tour_sizes = BTreeMap::new();
    for t in &in_window_tours {
        *tour_sizes.entry(t.size).or_insert(0) += 1;
    }
    let km = |m: f64| m / 1000.0;
    MetricsReport {
        requests,
        served,
        expired,
        unresolved: requests - served - expired,
        service_rate: ratio(served as f64, requests),
        vmr: ratio(km(vmt[0] + vmt[1] + vmt[2]), served),
        active_vmr: ratio(km(vmt[0]), served),
        idle_vmr: ratio(km(vmt[1]), served),
        rebalancing_vmr: ratio(km(vmt[2]), served),
        shared_trip_ratio: ratio(shared as f64, served),
        avg_wait: ratio(wait_sum, served),
        avg_delay: ratio(delay_sum, served),
        avg_occupancy: (tour_time > 0.0).then(|| seat_time / (tour_time * ctx.capacity as f64)),
        total_vmt_km: km(total_vmt),
        tour_sizes,
        tour_distance_km: Distribution::from_values(in_window_tours.iter().map(|t| km(t.distance_m)).collect()),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{all_pairs_shortest, EdgeRecord, NodeRecord};
    use crate::sim::Event;

    fn line() -> (RoadNetwork, ShortestPathTables) {
        let nodes = (0..4)
            .map(|i| NodeRecord {
                node_id: i.to_string(),
                x: i as f64,
                y: 0.0,
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..3 {
            for (a, b) in [(i, i + 1), (i + 1, i)] {
                edges.push(EdgeRecord {
                    from: a.to_string(),
                    to: b.to_string(),
                    length_m: 1000.0,
                    time_s: 100.0,
                });
            }
        }
        let net = RoadNetwork::from_records(nodes, edges).unwrap();
        let t = all_pairs_shortest(&net);
        (net, t)
    }

    fn ev(t: Seconds, k: EventKind, v: Option<u32>, r: Option<u64>, n: u32, o: Option<u32>) -> Event {
        Event {
            time: t,
            kind: k,
            vehicle: v.map(VehicleId),
            request: r.map(RequestId),
            node: Some(NodeId(n)),
            occupancy: o,
        }
    }

    fn ctx<'a>(net: &'a RoadNetwork, t: &'a ShortestPathTables) -> MetricsContext<'a> {
        MetricsContext {
            net,
            tables: t,
            capacity: 4,
            max_wait: 420,
            max_delay: 900,
            window: (0, 10_000),
        }
    }

    #[test]
    fn solo_direct_trip() {
        let (net, t) = line();
        use EventKind::*;
        let j = Journal {
            comments: vec![],
            events: vec![
                ev(0, Init, Some(0), None, 0, Some(0)),
                ev(0, Request, None, Some(1), 0, None),
                ev(0, Assign, Some(0), Some(1), 0, Some(0)),
                ev(0, Pickup, Some(0), Some(1), 0, Some(1)),
                ev(100, DriveActive, Some(0), None, 1, Some(1)),
                ev(200, DriveActive, Some(0), None, 2, Some(1)),
                ev(200, Dropoff, Some(0), Some(1), 2, Some(0)),
                ev(200, Idle, Some(0), None, 2, Some(0)),
            ],
        };
        let m = compute_metrics(&j, &ctx(&net, &t));
        assert_eq!(m.served, 1);
        assert_eq!(m.service_rate, Some(1.0));
        assert_eq!(m.vmr, Some(2.0));
        assert_eq!(m.active_vmr, Some(2.0));
        assert_eq!(m.idle_vmr, Some(0.0));
        assert_eq!(m.shared_trip_ratio, Some(0.0));
        assert_eq!(m.avg_wait, Some(0.0));
        assert_eq!(m.avg_delay, Some(0.0));
        assert_eq!(m.tour_sizes.get(&1), Some(&1));
        assert_eq!(m.avg_occupancy, Some(0.25));
        assert_eq!(m.violations.total(), 0);
    }

    #[test]
    fn overlapping_passengers_are_shared() {
        let (net, t) = line();
        use EventKind::*;
        let j = Journal {
            comments: vec![],
            events: vec![
                ev(0, Init, Some(0), None, 0, Some(0)),
                ev(0, Request, None, Some(1), 0, None),
                ev(0, Request, None, Some(2), 0, None),
                ev(0, Assign, Some(0), Some(1), 0, Some(0)),
                ev(0, Assign, Some(0), Some(2), 0, Some(0)),
                ev(0, Pickup, Some(0), Some(1), 0, Some(1)),
                ev(0, Pickup, Some(0), Some(2), 0, Some(2)),
                ev(100, DriveActive, Some(0), None, 1, Some(2)),
                ev(100, Dropoff, Some(0), Some(1), 1, Some(1)),
                ev(100, Dropoff, Some(0), Some(2), 1, Some(0)),
                ev(100, Idle, Some(0), None, 1, Some(0)),
            ],
        };
        let m = compute_metrics(&j, &ctx(&net, &t));
        assert_eq!(m.shared_trip_ratio, Some(1.0));
        assert_eq!(m.avg_occupancy, Some(0.5));
        assert_eq!(m.tour_sizes.get(&2), Some(&1));
    }

    #[test]
    fn empty_journal_reports_nulls() {
        let (net, t) = line();
        let m = compute_metrics(&Journal::default(), &ctx(&net, &t));
        assert_eq!(m.requests, 0);
        assert!(m.service_rate.is_none() && m.vmr.is_none());
    }

    #[test]
    fn back_to_back_service_is_one_tour() {
        let (net, _) = line();
        use EventKind::*;
        let j = Journal {
            comments: vec![],
            events: vec![
                ev(0, Init, Some(0), None, 0, Some(0)),
                ev(0, Assign, Some(0), Some(1), 0, Some(0)),
                ev(0, Pickup, Some(0), Some(1), 0, Some(1)),
                ev(100, DriveActive, Some(0), None, 1, Some(1)),
                ev(100, Dropoff, Some(0), Some(1), 1, Some(0)),
                ev(100, Assign, Some(0), Some(2), 1, Some(0)),
                ev(200, DriveDeadhead, Some(0), None, 2, Some(0)),
                ev(200, Pickup, Some(0), Some(2), 2, Some(1)),
                ev(300, DriveActive, Some(0), None, 3, Some(1)),
                ev(300, Dropoff, Some(0), Some(2), 3, Some(0)),
                ev(300, Idle, Some(0), None, 3, Some(0)),
            ],
        };
        let tours = tour_statistics(&j, &net);
        assert_eq!(tours.len(), 1);
        assert_eq!(tours[0].size, 2);
        assert_eq!(tours[0].distance_m, 3000.0);
    }
}
