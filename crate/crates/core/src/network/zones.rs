use serde::{Deserialize, Serialize};

use super::{NetworkError, RoadNetwork};
use crate::ids::{NodeId, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: ZoneId,
    pub bounds: Rect,
    /// Zone node closest to the geometric center of `bounds`.
    pub centroid: NodeId,
    pub nodes: Vec<NodeId>,
}

/// Partition of the network nodes into rebalancing zones.
#[derive(Debug, Clone)]
pub struct ZoneSet {
    zones: Vec<Zone>,
    node_zone: Vec<ZoneId>,
    cell_size: Option<f64>,
}

impl ZoneSet {
    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, id: ZoneId) -> &Zone {
        &self.zones[id.index()]
    }

    #[inline]
    pub fn zone_of(&self, node: NodeId) -> ZoneId {
        self.node_zone[node.index()]
    }

    pub fn cell_size(&self) -> Option<f64> {
        self.cell_size
    }

    fn from_assignment(net: &RoadNetwork, bounds: Vec<Rect>, cell_of: Vec<usize>, cell_size: Option<f64>) -> Self {
        // keep only non-empty cells, numbered in cell order
        let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); bounds.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            members[c].push(NodeId::from(i));
        }
        let mut remap = vec![usize::MAX; bounds.len()];
        let mut zones = Vec::new();
        for (c, nodes) in members.into_iter().enumerate() {
            if nodes.is_empty() {
                continue;
            }
            let id = ZoneId::from(zones.len());
            remap[c] = zones.len();
            let (cx, cy) = bounds[c].center();
            let centroid = *nodes
                .iter()
                .min_by(|a, b| {
                    let da = dist2(net, **a, cx, cy);
                    let db = dist2(net, **b, cx, cy);
                    da.total_cmp(&db).then(a.cmp(b))
                })
                .expect("non-empty");
            zones.push(Zone {
                id,
                bounds: bounds[c],
                centroid,
                nodes,
            });
        }
        let node_zone = cell_of.iter().map(|&c| ZoneId::from(remap[c])).collect();
        Self {
            zones,
            node_zone,
            cell_size,
        }
    }
}

fn dist2(net: &RoadNetwork, n: NodeId, x: f64, y: f64) -> f64 {
    let node = net.node(n);
    (node.x - x).powi(2) + (node.y - y).powi(2)
}

/// Cell index along one axis. Points on a grid line fall into the lower cell.
fn cell_index(offset: f64, cell: f64, count: usize) -> usize {
    if offset <= 0.0 {
        return 0;
    }
    let idx = (offset / cell).ceil() as usize;
    idx.saturating_sub(1).min(count - 1)
}

/// Square grid over the network bounding box, dropping cells without nodes.
/// Zones are numbered row-major (south to north, west to east).
pub fn build_grid_zones(net: &RoadNetwork, cell_size: f64) -> Result<ZoneSet, NetworkError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(NetworkError::InvalidCellSize(cell_size));
    }
    let (min_x, min_y, max_x, max_y) = net.bounding_box().ok_or(NetworkError::NoNodesInBoundingBox)?;
    let cols = (((max_x - min_x) / cell_size).ceil() as usize).max(1);
    let rows = (((max_y - min_y) / cell_size).ceil() as usize).max(1);

    let mut bounds = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            bounds.push(Rect {
                min_x: min_x + c as f64 * cell_size,
                min_y: min_y + r as f64 * cell_size,
                max_x: min_x + (c + 1) as f64 * cell_size,
                max_y: min_y + (r + 1) as f64 * cell_size,
            });
        }
    }
    let cell_of = net
        .nodes()
        .iter()
        .map(|n| {
            let c = cell_index(n.x - min_x, cell_size, cols);
            let r = cell_index(n.y - min_y, cell_size, rows);
            r * cols + c
        })
        .collect();
    Ok(ZoneSet::from_assignment(net, bounds, cell_of, Some(cell_size)))
}

/// Explicit rectangular zones; a node belongs to the first rectangle that
/// contains it. Rectangles that contain no node are dropped.
pub fn build_rect_zones(net: &RoadNetwork, rects: &[Rect]) -> Result<ZoneSet, NetworkError> {
    if net.num_nodes() == 0 {
        return Err(NetworkError::NoNodesInBoundingBox);
    }
    let mut cell_of = Vec::with_capacity(net.num_nodes());
    for n in net.nodes() {
        let c = rects
            .iter()
            .position(|r| r.contains(n.x, n.y))
            .ok_or_else(|| NetworkError::UncoveredNode(n.label.clone()))?;
        cell_of.push(c);
    }
    Ok(ZoneSet::from_assignment(net, rects.to_vec(), cell_of, None))
}
