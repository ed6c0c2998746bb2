//! Rolling-horizon fleet simulator.

mod config;
mod journal;
mod vehicle;

use std::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::assignment::{build_model, solve_assignment, AssignmentError, SolveOptions};
use crate::costs::{assemble_objective, default_beta, CostError, CostParams};
use crate::demand::{target_supply, DemandError, RateTable, Request};
use crate::graphs::{build_prs_graph, build_rtvz_graph, enumerate_trips, EdgeKind, RtvzGraph, RtvzOptions, TripLimits};
use crate::ids::{NodeId, RequestId, Seconds, VehicleId, ZoneId};
use crate::metrics::{compute_metrics, MetricsContext, MetricsReport};
use crate::network::{RoadNetwork, ShortestPathTables, ZoneSet};
use crate::rebalancing::{epoch_rng, probabilistic_rebalance};
use crate::routing::{LosParams, StopKind};

pub use config::{SimConfig, Variant};
pub use journal::{Event, EventKind, Journal, JournalError, JOURNAL_HEADER};
pub use vehicle::{DriveClass, InFlight, Odometer, RebalanceTarget, Vehicle, VehicleState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zone set is empty")]
    EmptyZoneSet,
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("node `{0}` used by the scenario cannot reach or be reached from the rest of the network")]
    Disconnected(String),
}

/// Static inputs of a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: RoadNetwork,
    pub tables: ShortestPathTables,
    pub zones: ZoneSet,
    pub requests: Vec<Request>,
    pub rates: RateTable,
}

impl Scenario {
    /// Fails fast when a request endpoint or zone centroid has no path to
    /// or from some other node.
    pub fn check_connectivity(&self) -> Result<(), SimError> {
        let n = self.net.num_nodes();
        let mut used: Vec<NodeId> = self.zones.zones().iter().map(|z| z.centroid).collect();
        for r in &self.requests {
            used.push(r.origin);
            used.push(r.destination);
        }
        used.sort();
        used.dedup();
        for &u in &used {
            for k in 0..n {
                let k = NodeId::from(k);
                if !self.tables.is_reachable(u, k) || !self.tables.is_reachable(k, u) {
                    return Err(SimError::Disconnected(self.net.label(u).to_string()));
                }
            }
        }
        Ok(())
    }
}

/// Mutable simulation state between epochs.
#[derive(Debug, Clone)]
pub struct EpochState {
    pub clock: Seconds,
    pub epoch: u64,
    pub fleet: Vec<Vehicle>,
    pub outstanding: Vec<Request>,
    pub served: Vec<Request>,
    pub expired: Vec<Request>,
    pub events: Vec<Event>,
    pub ingested: usize,
    /// Epochs where the solver returned a non-proven incumbent.
    pub suboptimal_epochs: usize,
}

/// Largest-remainder split of `fleet` vehicles over zones proportional to
/// the start-interval rates (uniform when all are zero), each vehicle on a
/// uniformly drawn node of its zone.
pub fn initialize_fleet(
    zones: &ZoneSet,
    rates: &RateTable,
    fleet: usize,
    capacity: u32,
    start: Seconds,
    seed: u64,
) -> Result<Vec<Vehicle>, SimError> {
    if zones.is_empty() {
        return Err(SimError::EmptyZoneSet);
    }
    let counts = fleet_counts(zones, rates, fleet, start);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(fleet);
    for (z, &c) in zones.zones().iter().zip(&counts) {
        for _ in 0..c {
            let node = z.nodes[rng.random_range(0..z.nodes.len())];
            out.push(Vehicle::new(VehicleId::from(out.len()), capacity, node, start));
        }
    }
    Ok(out)
}

/// Per-zone vehicle counts used by [`initialize_fleet`].
pub fn fleet_counts(zones: &ZoneSet, rates: &RateTable, fleet: usize, start: Seconds) -> Vec<usize> {
    let k = rates.interval_of(start);
    let mut w: Vec<f64> = zones.zones().iter().map(|z| rates.get(z.id, k).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        w = vec![1.0; zones.len()];
    }
    let total: f64 = w.iter().sum();
    let quotas: Vec<f64> = w.iter().map(|x| fleet as f64 * x / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = fleet - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..zones.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for z in order {
        if left == 0 {
            break;
        }
        counts[z] += 1;
        left -= 1;
    }
    counts
}

impl EpochState {
    pub fn new(fleet: Vec<Vehicle>, start: Seconds, epoch_s: Seconds) -> Self {
        let events = fleet
            .iter()
            .map(|v| {
                Event::new(start, EventKind::Init)
                    .vehicle(v.id)
                    .node(v.node)
                    .occupancy(0)
            })
            .collect();
        Self {
            clock: start + epoch_s,
            epoch: 0,
            fleet,
            outstanding: Vec::new(),
            served: Vec::new(),
            expired: Vec::new(),
            events,
            ingested: 0,
            suboptimal_epochs: 0,
        }
    }

    /// Requests matched to a vehicle but not yet dropped off.
    pub fn in_service(&self) -> usize {
        self.fleet.iter().map(|v| v.requests.len()).sum()
    }
}

fn los(config: &SimConfig) -> LosParams {
    LosParams {
        max_wait: config.max_wait_s,
        max_delay: config.max_delay_s,
    }
}

/// Cost parameters actually used by `config.variant`.
pub fn cost_params(config: &SimConfig, num_zones: usize) -> CostParams {
    let alpha = if config.variant.uses_supply_term() {
        config.alpha
    } else {
        0.0
    };
    let alpha = vec![alpha; num_zones];
    let beta = config
        .beta
        .unwrap_or_else(|| default_beta(&vec![config.alpha; num_zones]));
    CostParams {
        alpha,
        beta,
        gamma: config.gamma,
    }
}

/// Builds the RTVZ graph for the current state.
pub fn epoch_graph(state: &EpochState, scenario: &Scenario, config: &SimConfig) -> RtvzGraph {
    let now = state.clock;
    let los = los(config);
    let prs = build_prs_graph(&state.outstanding, now, config.capacity, los, &scenario.tables);
    let trips = enumerate_trips(
        &prs,
        &state.outstanding,
        &state.fleet,
        now,
        los,
        &scenario.tables,
        TripLimits {
            max_size: config.max_trip_size,
            max_per_size: config.max_trips_per_size,
        },
    );
    build_rtvz_graph(
        &trips,
        &state.outstanding,
        &state.fleet,
        &scenario.zones,
        &scenario.tables,
        now,
        config.horizon_s,
        RtvzOptions {
            zone_edges: config.variant.zone_edges(),
        },
    )
}

/// Adds `new_requests` to the outstanding set and expires requests that
/// no vehicle can reach inside their wait window.
pub fn ingest_requests(state: &mut EpochState, scenario: &Scenario, config: &SimConfig, new_requests: Vec<Request>) {
    let now = state.clock;
    let tables = &scenario.tables;
    for r in new_requests {
        state
            .events
            .push(Event::new(r.arrival, EventKind::Request).request(r.id).node(r.origin));
        state.ingested += 1;
        state.outstanding.push(r);
    }

    // drop requests no vehicle can reach inside the wait window
    let origins: Vec<(NodeId, Seconds)> = state.fleet.iter().map(|v| v.plan_origin(now)).collect();
    let mut keep = Vec::with_capacity(state.outstanding.len());
    for r in std::mem::take(&mut state.outstanding) {
        let earliest = origins
            .iter()
            .map(|&(n, t)| t.saturating_add(tables.time(n, r.origin)))
            .min()
            .unwrap_or(Seconds::MAX);
        if earliest > r.arrival + config.max_wait_s {
            state
                .events
                .push(Event::new(now, EventKind::Expire).request(r.id).node(r.origin));
            state.expired.push(r);
        } else {
            keep.push(r);
        }
    }
    state.outstanding = keep;
}

/// One decision epoch at `state.clock`: ingest, expire, match, commit,
/// then drive every vehicle forward by one epoch.
pub fn step_epoch(
    state: &mut EpochState,
    scenario: &Scenario,
    config: &SimConfig,
    new_requests: Vec<Request>,
) -> Result<(), SimError> {
    let now = state.clock;
    let tables = &scenario.tables;
    let zones = &scenario.zones;
    ingest_requests(state, scenario, config, new_requests);

    let graph = epoch_graph(state, scenario, config);
    let phi = target_supply(&scenario.rates, zones, now, config.horizon_s)?;
    let params = cost_params(config, zones.len());
    let objective = assemble_objective(&graph, &phi.phi, &params)?;
    let model = build_model(&graph, &objective);
    let assignment = solve_assignment(
        &model,
        SolveOptions {
            node_limit: config.solver_node_limit,
            time_budget: Duration::from_secs_f64(config.solver_time_budget_s),
        },
    )?;
    if !assignment.optimal {
        state.suboptimal_epochs += 1;
    }

    let mut matched: Vec<RequestId> = Vec::new();
    for d in &assignment.decisions {
        let edge = &graph.edges[d.edge];
        let v = &mut state.fleet[edge.vehicle];
        match edge.kind {
            EdgeKind::Trip(t) => {
                let members = &graph.trip_members[t.index()];
                let trip: Vec<Request> = members.iter().map(|&i| state.outstanding[i].clone()).collect();
                for r in &trip {
                    state.events.push(
                        Event::new(now, EventKind::Assign)
                            .vehicle(v.id)
                            .request(r.id)
                            .node(r.origin)
                            .occupancy(v.occupancy()),
                    );
                    matched.push(r.id);
                }
                v.commit(edge.schedule.as_ref().expect("trip edge has a schedule"), trip);
            }
            EdgeKind::Zone(z) => {
                let (origin, _) = v.plan_origin(now);
                if zones.zone_of(origin) != z {
                    start_rebalance(v, z, zones, now, &mut state.events);
                }
            }
            EdgeKind::Keep => {}
        }
    }
    state.outstanding.retain(|r| !matched.contains(&r.id));

    if config.variant.probabilistic_rebalancing() {
        // supply already committed by vehicles that are not idle
        let mut supply = vec![0.0; zones.len()];
        for d in &assignment.decisions {
            let edge = &graph.edges[d.edge];
            if state.fleet[edge.vehicle].state != VehicleState::Idle {
                for (s, y) in supply.iter_mut().zip(&edge.supply.y) {
                    *s += y;
                }
            }
        }
        let mut rng = epoch_rng(config.seed, state.epoch);
        let plan = probabilistic_rebalance(&state.fleet, &phi.phi, &supply, zones, tables, now, &mut rng);
        for d in plan.directives {
            let v = state
                .fleet
                .iter_mut()
                .find(|v| v.id == d.vehicle)
                .expect("directive for a known vehicle");
            start_rebalance(v, d.zone, zones, now, &mut state.events);
        }
    }

    let t_end = now + config.epoch_s;
    let mut moves = Vec::new();
    for v in &mut state.fleet {
        if v.in_flight.is_none() {
            v.free_at = v.free_at.max(now);
        }
        advance(v, t_end, &scenario.net, tables, &mut moves, &mut state.served);
    }
    // stable: per-vehicle order is preserved
    moves.sort_by_key(|e: &Event| e.time);
    state.events.extend(moves);

    state.clock = t_end;
    state.epoch += 1;
    Ok(())
}

fn start_rebalance(v: &mut Vehicle, zone: ZoneId, zones: &ZoneSet, now: Seconds, events: &mut Vec<Event>) {
    let node = zones.zone(zone).centroid;
    v.rebalance = Some(RebalanceTarget { zone, node });
    v.state = VehicleState::Rebalancing;
    events.push(
        Event::new(now, EventKind::Rebalance)
            .vehicle(v.id)
            .node(node)
            .occupancy(0),
    );
}

/// Moves `v` along its plan (or rebalancing target) until `t_end`. Edges
/// are entered only before `t_end` and always finished; stops are served
/// the moment the vehicle reaches them, after waiting for the pickup time.
fn advance(
    v: &mut Vehicle,
    t_end: Seconds,
    net: &RoadNetwork,
    tables: &ShortestPathTables,
    events: &mut Vec<Event>,
    served: &mut Vec<Request>,
) {
    loop {
        if let Some(f) = v.in_flight {
            if f.arrive > t_end {
                return;
            }
            v.in_flight = None;
            v.node = f.to;
            v.free_at = f.arrive;
            events.push(
                Event::new(f.arrive, EventKind::drive(f.class))
                    .vehicle(v.id)
                    .node(f.to)
                    .occupancy(f.occupancy),
            );
            continue;
        }
        let t = v.free_at;
        let target = match (v.plan.first(), v.rebalance) {
            (Some(s), _) => s.node,
            (None, Some(rb)) => rb.node,
            (None, None) => {
                if v.state != VehicleState::Idle {
                    v.state = VehicleState::Idle;
                    events.push(Event::new(t, EventKind::Idle).vehicle(v.id).node(v.node).occupancy(0));
                }
                return;
            }
        };
        if target == v.node {
            match v.next_stop_kind() {
                Some(kind) => {
                    let stop = v.plan[0].clone();
                    let req = v.request_mut(stop.request).expect("stop for a matched request");
                    let service = match kind {
                        StopKind::Pickup => t.max(req.arrival),
                        StopKind::Dropoff => t,
                    };
                    if service > t_end {
                        return;
                    }
                    let ev_kind = match kind {
                        StopKind::Pickup => {
                            req.pickup = Some(service);
                            EventKind::Pickup
                        }
                        StopKind::Dropoff => {
                            req.dropoff = Some(service);
                            EventKind::Dropoff
                        }
                    };
                    if kind == StopKind::Dropoff {
                        let pos = v.requests.iter().position(|r| r.id == stop.request).unwrap();
                        served.push(v.requests.remove(pos));
                    }
                    v.plan.remove(0);
                    v.free_at = service;
                    events.push(
                        Event::new(service, ev_kind)
                            .vehicle(v.id)
                            .request(stop.request)
                            .node(v.node)
                            .occupancy(v.occupancy()),
                    );
                }
                None => {
                    // reached the rebalancing centroid
                    v.rebalance = None;
                    v.state = VehicleState::Idle;
                    events.push(Event::new(t, EventKind::Idle).vehicle(v.id).node(v.node).occupancy(0));
                    return;
                }
            }
            continue;
        }
        if t >= t_end {
            return;
        }
        let path = tables.path_between(v.node, target).expect("committed target reachable");
        let next = path[1];
        let edge = net.edge_between(v.node, next).expect("path hop is an edge");
        let class = v.drive_class();
        v.odometer.add(class, edge.length_m);
        v.in_flight = Some(InFlight {
            from: v.node,
            to: next,
            depart: t,
            arrive: t + edge.time_s,
            length_m: edge.length_m,
            class,
            occupancy: v.occupancy(),
        });
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub journal: Journal,
    pub report: MetricsReport,
    pub state: EpochState,
}

#[derive(Serialize)]
struct JournalStamp<'a> {
    config: &'a SimConfig,
}

/// Epoch-by-epoch driver over a scenario.
#[derive(Debug)]
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    config: &'a SimConfig,
    pub state: EpochState,
    next: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, config: &'a SimConfig) -> Result<Self, SimError> {
        config.validate().map_err(SimError::Config)?;
        scenario.check_connectivity()?;
        // surface an invalid horizon before any work
        target_supply(&scenario.rates, &scenario.zones, config.start_s, config.horizon_s)?;
        cost_params(config, scenario.zones.len()).validate(scenario.zones.len())?;
        let fleet = initialize_fleet(
            &scenario.zones,
            &scenario.rates,
            config.fleet,
            config.capacity,
            config.start_s,
            config.seed,
        )?;
        let next = scenario
            .requests
            .iter()
            .position(|r| r.arrival >= config.start_s)
            .unwrap_or(scenario.requests.len());
        Ok(Self {
            scenario,
            config,
            state: EpochState::new(fleet, config.start_s, config.epoch_s),
            next,
        })
    }

    pub fn finished(&self) -> bool {
        self.state.clock > self.config.end_s()
    }

    /// Requests that arrived since the previous epoch, up to the clock.
    fn take_batch(&mut self) -> Vec<Request> {
        let reqs = &self.scenario.requests;
        let mut batch = Vec::new();
        while self.next < reqs.len() && reqs[self.next].arrival <= self.state.clock {
            batch.push(reqs[self.next].clone());
            self.next += 1;
        }
        batch
    }

    pub fn step(&mut self) -> Result<(), SimError> {
        let batch = self.take_batch();
        step_epoch(&mut self.state, self.scenario, self.config, batch)
    }

    /// The RTVZ graph the next step will solve, without advancing.
    pub fn peek_graph(&self) -> RtvzGraph {
        let mut probe = Simulation {
            scenario: self.scenario,
            config: self.config,
            state: self.state.clone(),
            next: self.next,
        };
        let batch = probe.take_batch();
        ingest_requests(&mut probe.state, self.scenario, self.config, batch);
        epoch_graph(&probe.state, self.scenario, self.config)
    }

    pub fn journal(&self) -> Journal {
        let stamp = serde_json::to_string(&JournalStamp { config: self.config }).expect("config serializes");
        Journal {
            comments: vec![format!("ridepool journal seed={} {}", self.config.seed, stamp)],
            events: self.state.events.clone(),
        }
    }

    pub fn finish(self) -> SimOutput {
        let journal = self.journal();
        let ctx = MetricsContext {
            net: &self.scenario.net,
            tables: &self.scenario.tables,
            capacity: self.config.capacity,
            max_wait: self.config.max_wait_s,
            max_delay: self.config.max_delay_s,
            window: self.config.window(),
        };
        let report = compute_metrics(&journal, &ctx);
        SimOutput {
            journal,
            report,
            state: self.state,
        }
    }
}

/// Runs warm-up, measurement and cool-off, then computes metrics over the
/// requests that arrived inside the measurement window.
pub fn run_scenario(scenario: &Scenario, config: &SimConfig) -> Result<SimOutput, SimError> {
    let mut sim = Simulation::new(scenario, config)?;
    while !sim.finished() {
        sim.step()?;
    }
    Ok(sim.finish())
}
