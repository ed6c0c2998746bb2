//! Unpruned permutation search for the single-vehicle routing problem.

use rand::Rng;
use ridepool_core::routing::{Depot, OnboardRequest, PendingRequest};
use ridepool_core::{NodeId, RequestId, RoutingInstance, Schedule, Seconds, ShortestPathTables};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OStop {
    Drop(usize),
    PendPick(usize),
    PendDrop(usize),
}

/// Walks `order` from the depot; returns (vmt, end time) when every window
/// and the capacity hold.
pub fn evaluate(inst: &RoutingInstance, tables: &ShortestPathTables, order: &[OStop]) -> Option<(f64, Seconds)> {
    let (mut cur, mut t) = match inst.depot {
        Depot::At { node, time } => (Some(node), time),
        Depot::Virtual { time } => (None, time),
    };
    let mut load = inst.onboard.len() as u32;
    let mut vmt = 0.0;
    let mut picked: Vec<Option<Seconds>> = vec![None; inst.pending.len()];
    for &s in order {
        let node = match s {
            OStop::Drop(i) => inst.onboard[i].destination,
            OStop::PendPick(i) => inst.pending[i].origin,
            OStop::PendDrop(i) => inst.pending[i].destination,
        };
        let arrive = match cur {
            Some(c) => {
                vmt += tables.distance(c, node);
                t + tables.time(c, node)
            }
            None => t,
        };
        cur = Some(node);
        match s {
            OStop::Drop(i) => {
                if arrive > inst.onboard[i].latest_dropoff {
                    return None;
                }
                t = arrive;
                load -= 1;
            }
            OStop::PendPick(i) => {
                let p = &inst.pending[i];
                let service = arrive.max(p.earliest_pickup);
                if service > p.latest_pickup {
                    return None;
                }
                load += 1;
                if load > inst.capacity {
                    return None;
                }
                picked[i] = Some(service);
                t = service;
            }
            OStop::PendDrop(i) => {
                let p = &inst.pending[i];
                let pick = picked[i]?;
                if arrive > pick + p.direct_time + p.max_delay {
                    return None;
                }
                t = arrive;
                load -= 1;
            }
        }
    }
    Some((vmt, t))
}

fn permute(items: &mut Vec<OStop>, k: usize, out: &mut Vec<Vec<OStop>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Every ordering of the stops in which each pickup precedes its dropoff.
pub fn valid_orders(inst: &RoutingInstance) -> Vec<Vec<OStop>> {
    let mut items: Vec<OStop> = (0..inst.onboard.len()).map(OStop::Drop).collect();
    for i in 0..inst.pending.len() {
        items.push(OStop::PendPick(i));
        items.push(OStop::PendDrop(i));
    }
    let mut all = Vec::new();
    permute(&mut items, 0, &mut all);
    all.retain(|o| {
        (0..inst.pending.len()).all(|i| {
            let p = o.iter().position(|&s| s == OStop::PendPick(i)).unwrap();
            let d = o.iter().position(|&s| s == OStop::PendDrop(i)).unwrap();
            p < d
        })
    });
    all
}

/// Minimum VMT over all feasible orderings, or `None` when none is feasible.
pub fn best_vmt(inst: &RoutingInstance, tables: &ShortestPathTables) -> Option<f64> {
    valid_orders(inst)
        .iter()
        .filter_map(|o| evaluate(inst, tables, o))
        .map(|(v, _)| v)
        .min_by(|a, b| a.total_cmp(b))
}

/// Translates a returned schedule back into oracle stops and re-walks it.
pub fn replay(inst: &RoutingInstance, tables: &ShortestPathTables, s: &Schedule) -> Option<(f64, Seconds)> {
    use ridepool_core::routing::StopKind;
    let order: Vec<OStop> = s
        .stops
        .iter()
        .map(|st| {
            if let Some(i) = inst.onboard.iter().position(|o| o.id == st.request) {
                return OStop::Drop(i);
            }
            let i = inst.pending.iter().position(|p| p.id == st.request).unwrap();
            match st.kind {
                StopKind::Pickup => OStop::PendPick(i),
                StopKind::Dropoff => OStop::PendDrop(i),
            }
        })
        .collect();
    if order.len() != inst.num_stops() {
        return None;
    }
    evaluate(inst, tables, &order)
}

/// Random instance over `n` nodes with 2 to 4 pending requests, an
/// occasional onboard passenger and a mix of tight and loose windows.
pub fn random_instance(rng: &mut impl Rng, tables: &ShortestPathTables, n: u32) -> RoutingInstance {
    let now: Seconds = 3600;
    let pending_count = rng.random_range(2..=4usize);
    let onboard_count = if pending_count < 4 {
        rng.random_range(0..=1usize)
    } else {
        0
    };
    let virtual_depot = onboard_count == 0 && rng.random_bool(0.2);
    let depot = if virtual_depot {
        Depot::Virtual { time: now }
    } else {
        Depot::At {
            node: NodeId(rng.random_range(0..n)),
            time: now,
        }
    };
    let pick_pair = |rng: &mut dyn rand::RngCore| loop {
        let a = NodeId(rng.random_range(0..n));
        let b = NodeId(rng.random_range(0..n));
        if a != b {
            return (a, b);
        }
    };
    let onboard = (0..onboard_count)
        .map(|i| {
            let (_, d) = pick_pair(rng);
            OnboardRequest {
                id: RequestId(100 + i as u64),
                destination: d,
                latest_dropoff: now + rng.random_range(600..2400),
            }
        })
        .collect();
    let pending = (0..pending_count)
        .map(|i| {
            let (o, d) = pick_pair(rng);
            let arrival = now + rng.random_range(-300..200);
            let wait = rng.random_range(300..1200);
            PendingRequest {
                id: RequestId(i as u64),
                origin: o,
                destination: d,
                earliest_pickup: arrival,
                latest_pickup: arrival + wait,
                direct_time: tables.time(o, d),
                max_delay: rng.random_range(200..1800),
            }
        })
        .collect();
    RoutingInstance {
        depot,
        capacity: rng
            .random_range(2..=4u32)
            .max((onboard_count + 2 * pending_count).div_ceil(2) as u32),
        onboard,
        pending,
    }
}
