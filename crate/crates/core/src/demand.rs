//! Request ingestion, historical demand rates and per-zone target supply.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, RequestId, Seconds, ZoneId};
use crate::network::{RoadNetwork, ShortestPathTables, ZoneSet};

/// Length of one demand-rate interval.
pub const DEFAULT_INTERVAL: Seconds = 900;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("malformed request record at row {row}: {reason}")]
    MalformedRecord { row: usize, reason: String },
    #[error("request at row {row} references unknown node `{node}`")]
    UnknownNode { row: usize, node: String },
    #[error("duplicate request id {0}")]
    DuplicateId(RequestId),
    #[error("request {0} has identical origin and destination")]
    DegenerateRequest(RequestId),
    #[error("request {0} has no path from origin to destination")]
    UnreachableRequest(RequestId),
    #[error("rate estimation needs at least one day of history")]
    EmptyHistory,
    #[error("horizon {horizon}s exceeds two demand intervals ({limit}s)")]
    HorizonTooLong { horizon: Seconds, limit: Seconds },
    #[error("horizon must be positive, got {0}s")]
    NonPositiveHorizon(Seconds),
}

/// A ride request. `pickup`/`dropoff` are filled in by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub arrival: Seconds,
    /// Shortest origin-destination travel time if served alone.
    pub direct_time: Seconds,
    pub direct_distance: f64,
    pub pickup: Option<Seconds>,
    pub dropoff: Option<Seconds>,
}

impl Request {
    pub fn new(
        id: RequestId,
        origin: NodeId,
        destination: NodeId,
        arrival: Seconds,
        tables: &ShortestPathTables,
    ) -> Result<Self, DemandError> {
        if origin == destination {
            return Err(DemandError::DegenerateRequest(id));
        }
        if !tables.is_reachable(origin, destination) {
            return Err(DemandError::UnreachableRequest(id));
        }
        Ok(Self {
            id,
            origin,
            destination,
            arrival,
            direct_time: tables.time(origin, destination),
            direct_distance: tables.distance(origin, destination),
            pickup: None,
            dropoff: None,
        })
    }

    pub fn wait(&self) -> Option<Seconds> {
        self.pickup.map(|p| p - self.arrival)
    }

    pub fn delay(&self) -> Option<Seconds> {
        Some(self.dropoff? - self.pickup? - self.direct_time)
    }
}

/// Reads `id,time_s,origin_node,dest_node` or
/// `id,time_s,origin_x,origin_y,dest_x,dest_y`. Coordinates snap to the
/// nearest node. Output is sorted by arrival time, then id.
pub fn load_requests<R: Read>(
    reader: R,
    net: &RoadNetwork,
    tables: &ShortestPathTables,
) -> Result<Vec<Request>, DemandError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DemandError::MalformedRecord {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("id");
    let time_col = col("time_s");
    let (Some(id_col), Some(time_col)) = (id_col, time_col) else {
        return Err(DemandError::MalformedRecord {
            row: 0,
            reason: "header must contain `id` and `time_s`".into(),
        });
    };
    enum Layout {
        Nodes(usize, usize),
        Coords([usize; 4]),
    }
    let layout = match (col("origin_node"), col("dest_node")) {
        (Some(o), Some(d)) => Layout::Nodes(o, d),
        _ => match (col("origin_x"), col("origin_y"), col("dest_x"), col("dest_y")) {
            (Some(a), Some(b), Some(c), Some(d)) => Layout::Coords([a, b, c, d]),
            _ => {
                return Err(DemandError::MalformedRecord {
                    row: 0,
                    reason: "header needs origin_node,dest_node or origin_x,origin_y,dest_x,dest_y".into(),
                })
            }
        },
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DemandError::MalformedRecord {
            row,
            reason: e.to_string(),
        })?;
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| DemandError::MalformedRecord {
                row,
                reason: format!("missing column {i}"),
            })
        };
        let num = |i: usize| -> Result<f64, DemandError> {
            field(i)?.parse::<f64>().map_err(|e| DemandError::MalformedRecord {
                row,
                reason: e.to_string(),
            })
        };
        let id = RequestId(
            field(id_col)?
                .parse::<u64>()
                .map_err(|e| DemandError::MalformedRecord {
                    row,
                    reason: e.to_string(),
                })?,
        );
        let arrival = num(time_col)?;
        if !arrival.is_finite() {
            return Err(DemandError::MalformedRecord {
                row,
                reason: "non-finite time".into(),
            });
        }
        let (origin, destination) = match layout {
            Layout::Nodes(o, d) => {
                let node = |i: usize| -> Result<NodeId, DemandError> {
                    let label = field(i)?;
                    net.node_id(label).ok_or_else(|| DemandError::UnknownNode {
                        row,
                        node: label.to_string(),
                    })
                };
                (node(o)?, node(d)?)
            }
            Layout::Coords([ox, oy, dx, dy]) => {
                let snap = |x: f64, y: f64| {
                    net.nearest_node(x, y).ok_or_else(|| DemandError::UnknownNode {
                        row,
                        node: format!("({x}, {y})"),
                    })
                };
                (snap(num(ox)?, num(oy)?)?, snap(num(dx)?, num(dy)?)?)
            }
        };
        if !seen.insert(id) {
            return Err(DemandError::DuplicateId(id));
        }
        out.push(Request::new(
            id,
            origin,
            destination,
            arrival.floor() as Seconds,
            tables,
        )?);
    }
    out.sort_by_key(|r| (r.arrival, r.id));
    Ok(out)
}

/// Serializes requests in the node-label layout.
pub fn write_requests(requests: &[Request], net: &RoadNetwork) -> String {
    let mut s = String::from("id,time_s,origin_node,dest_node\n");
    for r in requests {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            r.arrival,
            net.label(r.origin),
            net.label(r.destination)
        ));
    }
    s
}

/// Average requests per (zone, interval). Missing cells read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub interval_length: Seconds,
    lambda: BTreeMap<(ZoneId, i64), f64>,
}

impl RateTable {
    pub fn new(interval_length: Seconds) -> Self {
        Self {
            interval_length,
            lambda: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, zone: ZoneId, interval: i64, lambda: f64) {
        self.lambda.insert((zone, interval), lambda.max(0.0));
    }

    pub fn get(&self, zone: ZoneId, interval: i64) -> f64 {
        self.lambda.get(&(zone, interval)).copied().unwrap_or(0.0)
    }

    pub fn interval_of(&self, t: Seconds) -> i64 {
        t.div_euclid(self.interval_length)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ZoneId, i64, f64)> + '_ {
        self.lambda.iter().map(|(&(z, k), &v)| (z, k, v))
    }

    /// Reads `zone_id,interval_index,lambda`.
    pub fn load<R: Read>(reader: R, interval_length: Seconds) -> Result<Self, DemandError> {
        #[derive(Deserialize)]
        struct Row {
            zone_id: u32,
            interval_index: i64,
            lambda: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut table = Self::new(interval_length);
        for (row, rec) in rdr.deserialize::<Row>().enumerate() {
            let rec = rec.map_err(|e| DemandError::MalformedRecord {
                row,
                reason: e.to_string(),
            })?;
            if !(rec.lambda.is_finite() && rec.lambda >= 0.0) {
                return Err(DemandError::MalformedRecord {
                    row,
                    reason: "lambda must be finite and non-negative".into(),
                });
            }
            table.set(ZoneId(rec.zone_id), rec.interval_index, rec.lambda);
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("zone_id,interval_index,lambda\n");
        for (z, k, v) in self.iter() {
            s.push_str(&format!("{z},{k},{v}\n"));
        }
        s
    }
}

/// Mean per-day count of requests originating in each zone and interval.
pub fn estimate_rates(
    days: &[Vec<Request>],
    zones: &ZoneSet,
    interval_length: Seconds,
) -> Result<RateTable, DemandError> {
    if days.is_empty() {
        return Err(DemandError::EmptyHistory);
    }
    let mut counts: BTreeMap<(ZoneId, i64), u64> = BTreeMap::new();
    for day in days {
        for r in day {
            let k = r.arrival.div_euclid(interval_length);
            *counts.entry((zones.zone_of(r.origin), k)).or_default() += 1;
        }
    }
    let mut table = RateTable::new(interval_length);
    let n = days.len() as f64;
    for ((z, k), c) in counts {
        table.set(z, k, c as f64 / n);
    }
    Ok(table)
}

/// Desired seat supply per zone over `[time, time + horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSupply {
    pub time: Seconds,
    pub horizon: Seconds,
    /// Share of the window that lies in the interval containing `time`.
    pub theta: f64,
    pub phi: Vec<f64>,
}

/// Fraction of `[t, t + horizon]` inside the interval that contains `t`.
pub fn window_theta(t: Seconds, horizon: Seconds, interval_length: Seconds) -> f64 {
    let k = t.div_euclid(interval_length);
    let interval_end = (k + 1) * interval_length;
    let inside = (t + horizon).min(interval_end) - t;
    inside as f64 / horizon as f64
}

/// Weighted mix of the current and next interval rates.
pub fn target_supply(
    rates: &RateTable,
    zones: &ZoneSet,
    t: Seconds,
    horizon: Seconds,
) -> Result<TargetSupply, DemandError> {
    if horizon <= 0 {
        return Err(DemandError::NonPositiveHorizon(horizon));
    }
    let limit = 2 * rates.interval_length;
    if horizon > limit {
        return Err(DemandError::HorizonTooLong { horizon, limit });
    }
    let theta = window_theta(t, horizon, rates.interval_length);
    let k = rates.interval_of(t);
    let phi = zones
        .zones()
        .iter()
        .map(|z| theta * rates.get(z.id, k) + (1.0 - theta) * rates.get(z.id, k + 1))
        .collect();
    Ok(TargetSupply {
        time: t,
        horizon,
        theta,
        phi,
    })
}
