//! Road network, shortest-path tables and the rebalancing-zone partition.

mod paths;
mod zones;

use std::collections::HashMap;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

use crate::ids::{NodeId, Seconds};

pub use paths::{all_pairs_shortest, ShortestPathTables, UNREACHABLE};
pub use zones::{build_grid_zones, build_rect_zones, Rect, Zone, ZoneSet};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed {file} record at row {row}: {reason}")]
    MalformedRecord {
        file: &'static str,
        row: usize,
        reason: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge at row {row} references unknown node `{node}`")]
    DanglingEdge { row: usize, node: String },
    #[error("edge at row {row} has a non-positive or non-finite weight")]
    NonPositiveWeight { row: usize },
    #[error("node `{to}` is unreachable from `{from}`")]
    Disconnected { from: String, to: String },
    #[error("no path from node {0} to node {1}")]
    Unreachable(NodeId, NodeId),
    #[error("network has no nodes")]
    NoNodesInBoundingBox,
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("node `{0}` is not covered by any zone rectangle")]
    UncoveredNode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub time_s: Seconds,
}

/// Raw node row as read from a `node_id,x,y` file.
#[derive(Debug, Clone, Deserialize)]
pub struct NodeRecord {
    pub node_id: String,
    pub x: f64,
    pub y: f64,
}

/// Raw edge row as read from a `from,to,length_m,time_s` file.
#[derive(Debug, Clone, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub time_s: f64,
}

/// Directed road graph. Node ids are dense indices; the external labels from
/// the input files are preserved for output.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, NodeId>,
    outgoing: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Validates and builds a network from parsed rows. Travel times are
    /// rounded up to whole seconds.
    pub fn from_records(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<Self, NetworkError> {
        let mut index = HashMap::with_capacity(nodes.len());
        let mut out_nodes = Vec::with_capacity(nodes.len());
        for (row, rec) in nodes.into_iter().enumerate() {
            if !rec.x.is_finite() || !rec.y.is_finite() {
                return Err(NetworkError::MalformedRecord {
                    file: "node",
                    row,
                    reason: "non-finite coordinate".into(),
                });
            }
            let id = NodeId::from(out_nodes.len());
            if index.insert(rec.node_id.clone(), id).is_some() {
                return Err(NetworkError::DuplicateNode(rec.node_id));
            }
            out_nodes.push(Node {
                label: rec.node_id,
                x: rec.x,
                y: rec.y,
            });
        }

        let mut out_edges = Vec::with_capacity(edges.len());
        let mut outgoing = vec![Vec::new(); out_nodes.len()];
        for (row, rec) in edges.into_iter().enumerate() {
            let lookup = |label: &str| {
                index.get(label).copied().ok_or_else(|| NetworkError::DanglingEdge {
                    row,
                    node: label.to_string(),
                })
            };
            let from = lookup(&rec.from)?;
            let to = lookup(&rec.to)?;
            let ok = |v: f64| v.is_finite() && v > 0.0;
            if !ok(rec.length_m) || !ok(rec.time_s) {
                return Err(NetworkError::NonPositiveWeight { row });
            }
            outgoing[from.index()].push(out_edges.len());
            out_edges.push(Edge {
                from,
                to,
                length_m: rec.length_m,
                time_s: rec.time_s.ceil() as Seconds,
            });
        }

        Ok(Self {
            nodes: out_nodes,
            edges: out_edges,
            index,
            outgoing,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].label
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.outgoing[id.index()].iter().map(|&e| &self.edges[e])
    }

    /// Best direct edge between two nodes, ordered by (time, length).
    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.outgoing(from)
            .filter(|e| e.to == to)
            .min_by(|a, b| a.time_s.cmp(&b.time_s).then(a.length_m.total_cmp(&b.length_m)))
    }

    /// Nearest node by Euclidean distance; ties go to the lower index.
    pub fn nearest_node(&self, x: f64, y: f64) -> Option<NodeId> {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.x - x).powi(2) + (n.y - y).powi(2);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| NodeId::from(i))
    }

    /// Every node reachable from every other node.
    pub fn is_strongly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let forward = self.reach_count(NodeId(0), false);
        let backward = self.reach_count(NodeId(0), true);
        forward == self.nodes.len() && backward == self.nodes.len()
    }

    fn reach_count(&self, start: NodeId, reverse: bool) -> usize {
        let n = self.nodes.len();
        let mut incoming = vec![Vec::new(); if reverse { n } else { 0 }];
        if reverse {
            for e in &self.edges {
                incoming[e.to.index()].push(e.from);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start.index()] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            let next: Vec<NodeId> = if reverse {
                incoming[v.index()].clone()
            } else {
                self.outgoing(v).map(|e| e.to).collect()
            };
            for w in next {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let first = self.nodes.first()?;
        let mut bb = (first.x, first.y, first.x, first.y);
        for n in &self.nodes {
            bb.0 = bb.0.min(n.x);
            bb.1 = bb.1.min(n.y);
            bb.2 = bb.2.max(n.x);
            bb.3 = bb.3.max(n.y);
        }
        Some(bb)
    }
}

fn read_rows<T, R>(reader: R, file: &'static str) -> Result<Vec<T>, NetworkError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (row, rec) in rdr.deserialize().enumerate() {
        rows.push(rec.map_err(|e| NetworkError::MalformedRecord {
            file,
            row,
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Reads `node_id,x,y` and `from,to,length_m,time_s` tables.
pub fn load_network<N: Read, E: Read>(nodes: N, edges: E) -> Result<RoadNetwork, NetworkError> {
    let node_rows = read_rows::<NodeRecord, _>(nodes, "node")?;
    let edge_rows = read_rows::<EdgeRecord, _>(edges, "edge")?;
    RoadNetwork::from_records(node_rows, edge_rows)
}

/// Serializes a network back to the node and edge file formats.
pub fn write_network(net: &RoadNetwork) -> (String, String) {
    let mut nodes = String::from("node_id,x,y\n");
    for n in net.nodes() {
        nodes.push_str(&format!("{},{},{}\n", n.label, n.x, n.y));
    }
    let mut edges = String::from("from,to,length_m,time_s\n");
    for e in net.edges() {
        edges.push_str(&format!(
            "{},{},{},{}\n",
            net.label(e.from),
            net.label(e.to),
            e.length_m,
            e.time_s
        ));
    }
    (nodes, edges)
}
