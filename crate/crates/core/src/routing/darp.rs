use super::{Depot, RoutingError, RoutingInstance, Schedule, Stop, StopKind, VMT_TIE_EPS};
use crate::ids::{NodeId, RequestId, Seconds};
use crate::network::ShortestPathTables;

const MAX_STOPS: usize = 16;

#[derive(Debug, Clone, Copy)]
struct StopSpec {
    node: NodeId,
    kind: StopKind,
    request: RequestId,
    /// Index into the pending list for pending stops.
    slot: Option<usize>,
    earliest: Seconds,
    /// Hard deadline for pickups and onboard dropoffs; an upper bound for
    /// pending dropoffs, whose real deadline depends on the pickup time.
    latest: Seconds,
    /// For pending dropoffs: the matching pickup stop.
    pickup_stop: Option<usize>,
}

#[derive(Debug, Clone)]
struct Best {
    vmt: f64,
    end: Seconds,
    order: Vec<usize>,
    times: Vec<Seconds>,
}

struct Search<'a> {
    tables: &'a ShortestPathTables,
    stops: Vec<StopSpec>,
    direct: Vec<Seconds>,
    max_delay: Vec<Seconds>,
    capacity: u32,
    pickup_time: Vec<Seconds>,
    order: Vec<usize>,
    times: Vec<Seconds>,
    best: Option<Best>,
}

impl Search<'_> {
    fn dominated(&self, vmt: f64, t: Seconds) -> bool {
        match &self.best {
            None => false,
            Some(b) => vmt > b.vmt + VMT_TIE_EPS || (vmt >= b.vmt - VMT_TIE_EPS && t > b.end),
        }
    }

    fn deadline(&self, s: &StopSpec) -> Seconds {
        match (s.kind, s.slot) {
            (StopKind::Dropoff, Some(slot)) => self.pickup_time[slot] + self.direct[slot] + self.max_delay[slot],
            _ => s.latest,
        }
    }

    /// Every unvisited stop must still be reachable before its deadline.
    fn lookahead_ok(&self, visited: u32, cur: NodeId, t: Seconds) -> bool {
        for (i, s) in self.stops.iter().enumerate() {
            if visited & (1 << i) != 0 {
                continue;
            }
            let arrive = t + self.tables.time(cur, s.node);
            let limit = match (s.kind, s.pickup_stop) {
                (StopKind::Dropoff, Some(p)) if visited & (1 << p) != 0 => self.deadline(s),
                _ => s.latest,
            };
            if arrive > limit {
                return false;
            }
        }
        true
    }

    fn go(&mut self, visited: u32, cur: Option<NodeId>, t: Seconds, load: u32, vmt: f64) {
        let n = self.stops.len();
        if self.order.len() == n {
            let better = match &self.best {
                None => true,
                Some(b) => vmt < b.vmt - VMT_TIE_EPS || ((vmt - b.vmt).abs() <= VMT_TIE_EPS && t < b.end),
            };
            if better {
                self.best = Some(Best {
                    vmt,
                    end: t,
                    order: self.order.clone(),
                    times: self.times.clone(),
                });
            }
            return;
        }
        for i in 0..n {
            if visited & (1 << i) != 0 {
                continue;
            }
            let s = self.stops[i];
            let new_load = match s.kind {
                StopKind::Pickup => {
                    if load + 1 > self.capacity {
                        continue;
                    }
                    load + 1
                }
                StopKind::Dropoff => {
                    if let Some(p) = s.pickup_stop {
                        if visited & (1 << p) == 0 {
                            continue;
                        }
                    }
                    load - 1
                }
            };
            let (travel, dist) = match cur {
                Some(c) => (self.tables.time(c, s.node), self.tables.distance(c, s.node)),
                None => (0, 0.0),
            };
            let service = (t + travel).max(s.earliest);
            if service > self.deadline(&s) {
                continue;
            }
            let nvmt = vmt + dist;
            if self.dominated(nvmt, service) {
                continue;
            }
            let nvisited = visited | (1 << i);
            let saved = s.slot.map(|slot| self.pickup_time[slot]);
            if let (StopKind::Pickup, Some(slot)) = (s.kind, s.slot) {
                self.pickup_time[slot] = service;
            }
            if self.lookahead_ok(nvisited, s.node, service) {
                self.order.push(i);
                self.times.push(service);
                self.go(nvisited, Some(s.node), service, new_load, nvmt);
                self.order.pop();
                self.times.pop();
            }
            if let (Some(slot), Some(v)) = (s.slot, saved) {
                self.pickup_time[slot] = v;
            }
        }
    }
}

/// Exact minimum-VMT stop ordering by depth-first enumeration of
/// precedence-respecting sequences, pruned on time windows, capacity and the
/// incumbent. Ties are broken by earlier completion, then by the stop order
/// (onboard dropoffs by id, then pending pickup/dropoff pairs by id).
///
/// Dropoffs end the route: there is no return leg.
pub fn solve_darp(inst: &RoutingInstance, tables: &ShortestPathTables) -> Result<Schedule, RoutingError> {
    let limit = (2 * inst.capacity as usize).min(MAX_STOPS);
    if inst.num_stops() > limit {
        return Err(RoutingError::TooManyStops {
            stops: inst.num_stops(),
            limit,
        });
    }
    if inst.onboard.len() > inst.capacity as usize {
        return Err(RoutingError::OverCapacity {
            onboard: inst.onboard.len(),
            capacity: inst.capacity,
        });
    }
    if matches!(inst.depot, Depot::Virtual { .. }) && !inst.onboard.is_empty() {
        return Err(RoutingError::VirtualWithOnboard);
    }

    let mut onboard = inst.onboard.clone();
    onboard.sort_by_key(|o| o.id);
    let mut pending = inst.pending.clone();
    pending.sort_by_key(|p| p.id);

    let mut stops = Vec::with_capacity(inst.num_stops());
    for o in &onboard {
        stops.push(StopSpec {
            node: o.destination,
            kind: StopKind::Dropoff,
            request: o.id,
            slot: None,
            earliest: Seconds::MIN,
            latest: o.latest_dropoff,
            pickup_stop: None,
        });
    }
    for (slot, p) in pending.iter().enumerate() {
        let pickup_idx = stops.len();
        stops.push(StopSpec {
            node: p.origin,
            kind: StopKind::Pickup,
            request: p.id,
            slot: Some(slot),
            earliest: p.earliest_pickup,
            latest: p.latest_pickup,
            pickup_stop: None,
        });
        stops.push(StopSpec {
            node: p.destination,
            kind: StopKind::Dropoff,
            request: p.id,
            slot: Some(slot),
            earliest: Seconds::MIN,
            latest: p.latest_pickup + p.direct_time + p.max_delay,
            pickup_stop: Some(pickup_idx),
        });
    }

    let (start_node, start_time) = match inst.depot {
        Depot::At { node, time } => (Some(node), time),
        Depot::Virtual { time } => (None, time),
    };
    let initial_load = onboard.len() as u32;
    if stops.is_empty() {
        return Ok(Schedule {
            start_node,
            start_time,
            initial_load,
            stops: vec![],
            total_vmt: 0.0,
            duration: 0,
        });
    }

    let mut search = Search {
        tables,
        direct: pending.iter().map(|p| p.direct_time).collect(),
        max_delay: pending.iter().map(|p| p.max_delay).collect(),
        pickup_time: vec![0; pending.len()],
        capacity: inst.capacity,
        order: Vec::with_capacity(stops.len()),
        times: Vec::with_capacity(stops.len()),
        best: None,
        stops,
    };
    if let Some(node) = start_node {
        if !search.lookahead_ok(0, node, start_time) {
            return Err(RoutingError::Infeasible);
        }
    }
    search.go(0, start_node, start_time, initial_load, 0.0);

    let best = search.best.ok_or(RoutingError::Infeasible)?;
    let mut load = initial_load;
    let stops = best
        .order
        .iter()
        .zip(&best.times)
        .map(|(&i, &time)| {
            let s = search.stops[i];
            match s.kind {
                StopKind::Pickup => load += 1,
                StopKind::Dropoff => load -= 1,
            }
            Stop {
                node: s.node,
                kind: s.kind,
                request: s.request,
                time,
                load_after: load,
            }
        })
        .collect();
    Ok(Schedule {
        start_node,
        start_time,
        initial_load,
        stops,
        total_vmt: best.vmt,
        duration: best.end - start_time,
    })
}
