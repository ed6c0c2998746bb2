use serde::{Deserialize, Serialize};

use crate::demand::Request;
use crate::ids::{NodeId, RequestId, Seconds, VehicleId, ZoneId};
use crate::network::ShortestPathTables;
use crate::routing::{Schedule, Stop, StopKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleState {
    Idle,
    Rebalancing,
    Active,
}

/// How a driven edge is classified for VMT accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriveClass {
    Active,
    Deadhead,
    Rebalance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Odometer {
    pub active_m: f64,
    pub deadhead_m: f64,
    pub rebalance_m: f64,
}

impl Odometer {
    pub fn total(&self) -> f64 {
        self.active_m + self.deadhead_m + self.rebalance_m
    }

    pub fn add(&mut self, class: DriveClass, m: f64) {
        match class {
            DriveClass::Active => self.active_m += m,
            DriveClass::Deadhead => self.deadhead_m += m,
            DriveClass::Rebalance => self.rebalance_m += m,
        }
    }
}

/// An edge the vehicle has committed to finishing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight {
    pub from: NodeId,
    pub to: NodeId,
    pub depart: Seconds,
    pub arrive: Seconds,
    pub length_m: f64,
    pub class: DriveClass,
    pub occupancy: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RebalanceTarget {
    pub zone: ZoneId,
    pub node: NodeId,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub capacity: u32,
    /// Last node reached.
    pub node: NodeId,
    /// Time the vehicle became free at `node`.
    pub free_at: Seconds,
    pub in_flight: Option<InFlight>,
    pub state: VehicleState,
    /// Matched requests not yet dropped off; `pickup` is set once on board.
    pub requests: Vec<Request>,
    /// Remaining committed stops in service order.
    pub plan: Vec<Stop>,
    pub rebalance: Option<RebalanceTarget>,
    pub odometer: Odometer,
}

impl Vehicle {
    pub fn new(id: VehicleId, capacity: u32, node: NodeId, time: Seconds) -> Self {
        Self {
            id,
            capacity,
            node,
            free_at: time,
            in_flight: None,
            state: VehicleState::Idle,
            requests: Vec::new(),
            plan: Vec::new(),
            rebalance: None,
            odometer: Odometer::default(),
        }
    }

    /// Where and when a new plan can start: the end of the current edge, or
    /// the current node.
    pub fn plan_origin(&self, now: Seconds) -> (NodeId, Seconds) {
        match self.in_flight {
            Some(f) => (f.to, f.arrive.max(now)),
            None => (self.node, self.free_at.max(now)),
        }
    }

    pub fn occupancy(&self) -> u32 {
        self.requests.iter().filter(|r| r.pickup.is_some()).count() as u32
    }

    pub fn onboard_ids(&self) -> Vec<RequestId> {
        self.requests
            .iter()
            .filter(|r| r.pickup.is_some())
            .map(|r| r.id)
            .collect()
    }

    /// VMT of the remaining plan from the plan origin.
    pub fn remaining_vmt(&self, now: Seconds, tables: &ShortestPathTables) -> f64 {
        let (origin, _) = self.plan_origin(now);
        Schedule::vmt_of(origin, &self.plan, tables)
    }

    /// The committed plan as a schedule starting at the plan origin.
    pub fn current_schedule(&self, now: Seconds, tables: &ShortestPathTables) -> Schedule {
        let (origin, start) = self.plan_origin(now);
        let end = self.plan.last().map_or(start, |s| s.time);
        Schedule {
            start_node: Some(origin),
            start_time: start,
            initial_load: self.occupancy(),
            stops: self.plan.clone(),
            total_vmt: Schedule::vmt_of(origin, &self.plan, tables),
            duration: end - start,
        }
    }

    /// Replace the plan with `schedule` and take on `trip`.
    pub fn commit(&mut self, schedule: &Schedule, trip: Vec<Request>) {
        self.requests.extend(trip);
        self.plan = schedule.stops.clone();
        self.rebalance = None;
        self.state = if self.plan.is_empty() {
            VehicleState::Idle
        } else {
            VehicleState::Active
        };
    }

    /// Current edge class for a departure in the current state.
    pub fn drive_class(&self) -> DriveClass {
        match self.state {
            VehicleState::Rebalancing => DriveClass::Rebalance,
            _ if self.occupancy() > 0 => DriveClass::Active,
            _ => DriveClass::Deadhead,
        }
    }

    pub(crate) fn request_mut(&mut self, id: RequestId) -> Option<&mut Request> {
        self.requests.iter_mut().find(|r| r.id == id)
    }

    pub(crate) fn next_stop_kind(&self) -> Option<StopKind> {
        self.plan.first().map(|s| s.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odometer_splits_sum() {
        let mut o = Odometer::default();
        o.add(DriveClass::Active, 100.0);
        o.add(DriveClass::Deadhead, 50.0);
        o.add(DriveClass::Rebalance, 25.0);
        assert_eq!(o.total(), 175.0);
    }

    #[test]
    fn plan_origin_follows_edge_in_flight() {
        let mut v = Vehicle::new(VehicleId(0), 4, NodeId(0), 0);
        assert_eq!(v.plan_origin(30), (NodeId(0), 30));
        v.in_flight = Some(InFlight {
            from: NodeId(0),
            to: NodeId(1),
            depart: 20,
            arrive: 50,
            length_m: 100.0,
            class: DriveClass::Deadhead,
            occupancy: 0,
        });
        assert_eq!(v.plan_origin(30), (NodeId(1), 50));
    }
}
