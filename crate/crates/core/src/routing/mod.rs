//! Single-vehicle dial-a-ride subproblem: exact VMT-optimal stop ordering
//! under pickup/dropoff time windows and seat capacity.

mod darp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::Request;
use crate::ids::{NodeId, RequestId, Seconds};
use crate::network::ShortestPathTables;
use crate::sim::Vehicle;

pub use darp::solve_darp;

/// Two routes whose VMT differs by less than this are considered tied.
pub const VMT_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("no stop ordering satisfies the time windows and capacity")]
    Infeasible,
    #[error("instance has {stops} stops, limit is {limit}")]
    TooManyStops { stops: usize, limit: usize },
    #[error("{onboard} passengers on board exceed capacity {capacity}")]
    OverCapacity { onboard: usize, capacity: u32 },
    #[error("virtual depot cannot carry onboard passengers")]
    VirtualWithOnboard,
}

/// Level-of-service limits: maximum wait and maximum trip delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosParams {
    pub max_wait: Seconds,
    pub max_delay: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub node: NodeId,
    pub kind: StopKind,
    pub request: RequestId,
    /// Service time (after any waiting for the pickup window to open).
    pub time: Seconds,
    pub load_after: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// `None` for the virtual depot used by shareability checks.
    pub start_node: Option<NodeId>,
    pub start_time: Seconds,
    pub initial_load: u32,
    pub stops: Vec<Stop>,
    pub total_vmt: f64,
    pub duration: Seconds,
}

impl Schedule {
    pub fn end_time(&self) -> Seconds {
        self.start_time + self.duration
    }

    /// VMT of an explicit stop sequence from `start`, using table distances.
    pub fn vmt_of(start: NodeId, stops: &[Stop], tables: &ShortestPathTables) -> f64 {
        let mut cur = start;
        let mut vmt = 0.0;
        for s in stops {
            vmt += tables.distance(cur, s.node);
            cur = s.node;
        }
        vmt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depot {
    At {
        node: NodeId,
        time: Seconds,
    },
    /// The vehicle materialises at its first pickup at `time` at no cost.
    Virtual {
        time: Seconds,
    },
}

impl Depot {
    pub fn time(&self) -> Seconds {
        match *self {
            Depot::At { time, .. } | Depot::Virtual { time } => time,
        }
    }
}

/// A request still waiting to be picked up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingRequest {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub earliest_pickup: Seconds,
    pub latest_pickup: Seconds,
    pub direct_time: Seconds,
    pub max_delay: Seconds,
}

impl PendingRequest {
    pub fn from_request(r: &Request, los: LosParams) -> Self {
        Self {
            id: r.id,
            origin: r.origin,
            destination: r.destination,
            earliest_pickup: r.arrival,
            latest_pickup: r.arrival + los.max_wait,
            direct_time: r.direct_time,
            max_delay: los.max_delay,
        }
    }
}

/// A passenger already in the vehicle; only the dropoff remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnboardRequest {
    pub id: RequestId,
    pub destination: NodeId,
    pub latest_dropoff: Seconds,
}

impl OnboardRequest {
    /// Deadline from the recorded pickup time.
    pub fn from_request(r: &Request, picked_up_at: Seconds, los: LosParams) -> Self {
        Self {
            id: r.id,
            destination: r.destination,
            latest_dropoff: picked_up_at + r.direct_time + los.max_delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingInstance {
    pub depot: Depot,
    pub capacity: u32,
    pub onboard: Vec<OnboardRequest>,
    pub pending: Vec<PendingRequest>,
}

impl RoutingInstance {
    pub fn num_stops(&self) -> usize {
        self.onboard.len() + 2 * self.pending.len()
    }
}

/// Two requests can share a ride if a vehicle appearing at either pickup
/// right now can serve both within their windows.
pub fn pairwise_shareable(
    a: &Request,
    b: &Request,
    now: Seconds,
    capacity: u32,
    los: LosParams,
    tables: &ShortestPathTables,
) -> bool {
    let inst = RoutingInstance {
        depot: Depot::Virtual { time: now },
        capacity,
        onboard: vec![],
        pending: vec![
            PendingRequest::from_request(a, los),
            PendingRequest::from_request(b, los),
        ],
    };
    solve_darp(&inst, tables).is_ok()
}

/// Routing instance for `vehicle` serving its committed requests plus `trip`.
pub fn insertion_instance(vehicle: &Vehicle, trip: &[&Request], now: Seconds, los: LosParams) -> RoutingInstance {
    let (node, time) = vehicle.plan_origin(now);
    let mut onboard = Vec::new();
    let mut pending = Vec::new();
    for r in &vehicle.requests {
        match r.pickup {
            Some(p) => onboard.push(OnboardRequest::from_request(r, p, los)),
            None => pending.push(PendingRequest::from_request(r, los)),
        }
    }
    pending.extend(trip.iter().map(|r| PendingRequest::from_request(r, los)));
    RoutingInstance {
        depot: Depot::At { node, time },
        capacity: vehicle.capacity,
        onboard,
        pending,
    }
}

/// Optimal schedule for `vehicle` after adding `trip`, or an error when the
/// combination is infeasible.
pub fn insertion_feasible(
    vehicle: &Vehicle,
    trip: &[&Request],
    now: Seconds,
    los: LosParams,
    tables: &ShortestPathTables,
) -> Result<Schedule, RoutingError> {
    solve_darp(&insertion_instance(vehicle, trip, now, los), tables)
}
