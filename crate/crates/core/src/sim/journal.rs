use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vehicle::DriveClass;
use crate::ids::{NodeId, RequestId, Seconds, VehicleId};
use crate::network::RoadNetwork;

pub const JOURNAL_HEADER: &str = "time,event_kind,vehicle_id,request_id,node,occupancy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Init,
    Request,
    Expire,
    Assign,
    Pickup,
    Dropoff,
    Rebalance,
    Idle,
    DriveActive,
    DriveDeadhead,
    DriveRebalance,
}

impl EventKind {
    const ALL: [EventKind; 11] = [
        EventKind::Init,
        EventKind::Request,
        EventKind::Expire,
        EventKind::Assign,
        EventKind::Pickup,
        EventKind::Dropoff,
        EventKind::Rebalance,
        EventKind::Idle,
        EventKind::DriveActive,
        EventKind::DriveDeadhead,
        EventKind::DriveRebalance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Request => "request",
            EventKind::Expire => "expire",
            EventKind::Assign => "assign",
            EventKind::Pickup => "pickup",
            EventKind::Dropoff => "dropoff",
            EventKind::Rebalance => "rebalance",
            EventKind::Idle => "idle",
            EventKind::DriveActive => "drive_active",
            EventKind::DriveDeadhead => "drive_deadhead",
            EventKind::DriveRebalance => "drive_rebalance",
        }
    }

    pub fn drive(class: DriveClass) -> Self {
        match class {
            DriveClass::Active => EventKind::DriveActive,
            DriveClass::Deadhead => EventKind::DriveDeadhead,
            DriveClass::Rebalance => EventKind::DriveRebalance,
        }
    }

    pub fn drive_class(self) -> Option<DriveClass> {
        match self {
            EventKind::DriveActive => Some(DriveClass::Active),
            EventKind::DriveDeadhead => Some(DriveClass::Deadhead),
            EventKind::DriveRebalance => Some(DriveClass::Rebalance),
            _ => None,
        }
    }
}

impl FromStr for EventKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        EventKind::ALL.iter().copied().find(|k| k.as_str() == s).ok_or(())
    }
}

/// One journal record. Drive events are stamped at arrival and name the
/// node reached; their occupancy is the load carried over the edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub time: Seconds,
    pub kind: EventKind,
    pub vehicle: Option<VehicleId>,
    pub request: Option<RequestId>,
    pub node: Option<NodeId>,
    pub occupancy: Option<u32>,
}

impl Event {
    pub fn new(time: Seconds, kind: EventKind) -> Self {
        Self {
            time,
            kind,
            vehicle: None,
            request: None,
            node: None,
            occupancy: None,
        }
    }

    pub fn vehicle(mut self, v: VehicleId) -> Self {
        self.vehicle = Some(v);
        self
    }

    pub fn request(mut self, r: RequestId) -> Self {
        self.request = Some(r);
        self
    }

    pub fn node(mut self, n: NodeId) -> Self {
        self.node = Some(n);
        self
    }

    pub fn occupancy(mut self, o: u32) -> Self {
        self.occupancy = Some(o);
        self
    }
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Journal {
    /// Free-form text emitted as `#` comment lines ahead of the records.
    pub comments: Vec<String>,
    pub events: Vec<Event>,
}

impl Journal {
    pub fn to_csv(&self, net: &RoadNetwork) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(JOURNAL_HEADER);
        out.push('\n');
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.time,
                e.kind.as_str(),
                opt(e.vehicle),
                opt(e.request),
                e.node.map(|n| net.label(n)).unwrap_or_default(),
                opt(e.occupancy)
            );
        }
        out
    }

    pub fn parse(text: &str, net: &RoadNetwork) -> Result<Journal, JournalError> {
        let mut j = Journal::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |reason: String| JournalError::Malformed { line, reason };
            if let Some(c) = raw.strip_prefix('#') {
                j.comments.push(c.trim_start().to_string());
                continue;
            }
            if raw.trim().is_empty() || raw == JOURNAL_HEADER {
                continue;
            }
            let f: Vec<&str> = raw.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", f.len())));
            }
            let time = f[0].parse().map_err(|_| bad(format!("bad time `{}`", f[0])))?;
            let kind = f[1].parse().map_err(|_| bad(format!("unknown event `{}`", f[1])))?;
            let num = |s: &str| -> Result<Option<u64>, JournalError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| JournalError::Malformed {
                        line,
                        reason: format!("bad number `{s}`"),
                    })
                }
            };
            let node = if f[4].is_empty() {
                None
            } else {
                Some(
                    net.node_id(f[4])
                        .ok_or_else(|| bad(format!("unknown node `{}`", f[4])))?,
                )
            };
            j.events.push(Event {
                time,
                kind,
                vehicle: num(f[2])?.map(|v| VehicleId(v as u32)),
                request: num(f[3])?.map(RequestId),
                node,
                occupancy: num(f[5])?.map(|o| o as u32),
            });
        }
        Ok(j)
    }
}
