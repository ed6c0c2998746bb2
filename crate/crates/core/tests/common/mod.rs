#![allow(dead_code)]

pub mod assign_oracle;
pub mod darp_oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridepool_core::network::{EdgeRecord, NodeRecord};
use ridepool_core::RoadNetwork;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn node(label: &str, x: f64, y: f64) -> NodeRecord {
    NodeRecord {
        node_id: label.to_string(),
        x,
        y,
    }
}

pub fn edge(from: &str, to: &str, length_m: f64, time_s: f64) -> EdgeRecord {
    EdgeRecord {
        from: from.to_string(),
        to: to.to_string(),
        length_m,
        time_s,
    }
}

/// Adds both directions of every listed edge.
pub fn undirected(nodes: Vec<NodeRecord>, edges: &[(&str, &str, f64, f64)]) -> RoadNetwork {
    let mut recs = Vec::new();
    for &(a, b, l, t) in edges {
        recs.push(edge(a, b, l, t));
        recs.push(edge(b, a, l, t));
    }
    RoadNetwork::from_records(nodes, recs).unwrap()
}

/// Nodes `n0..` on the x axis at the given positions (metres), consecutive
/// nodes joined both ways with the given per-segment times.
pub fn line(xs: &[f64], times: &[f64]) -> RoadNetwork {
    assert_eq!(xs.len(), times.len() + 1);
    let nodes = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| node(&format!("n{i}"), x, 0.0))
        .collect();
    let labels: Vec<String> = (0..xs.len()).map(|i| format!("n{i}")).collect();
    let edges: Vec<(&str, &str, f64, f64)> = (0..times.len())
        .map(|i| (labels[i].as_str(), labels[i + 1].as_str(), xs[i + 1] - xs[i], times[i]))
        .collect();
    undirected(nodes, &edges)
}

/// Random strongly connected directed graph: a bidirectional ring plus
/// random chords, integer lengths and times. Chords use independent
/// length/time draws so the two metrics disagree on the best path.
pub fn random_network(rng: &mut impl Rng, n: usize, chords: usize) -> RoadNetwork {
    let nodes = (0..n)
        .map(|i| {
            node(
                &format!("v{i}"),
                rng.random_range(0.0..5000.0),
                rng.random_range(0.0..5000.0),
            )
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        for (a, b) in [(i, j), (j, i)] {
            edges.push(edge(
                &format!("v{a}"),
                &format!("v{b}"),
                rng.random_range(50..2000) as f64,
                rng.random_range(10..300) as f64,
            ));
        }
    }
    for _ in 0..chords {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push(edge(
                &format!("v{a}"),
                &format!("v{b}"),
                rng.random_range(50..2000) as f64,
                rng.random_range(10..300) as f64,
            ));
        }
    }
    RoadNetwork::from_records(nodes, edges).unwrap()
}

/// Square grid with `side` nodes per row, spacing in metres, uniform speed.
/// Labels are `r{row}c{col}`.
pub fn grid(side: usize, spacing: f64, secs_per_edge: f64) -> RoadNetwork {
    let label = |r: usize, c: usize| format!("r{r}c{c}");
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            nodes.push(node(&label(r, c), c as f64 * spacing, r as f64 * spacing));
            if c + 1 < side {
                edges.push(edge(&label(r, c), &label(r, c + 1), spacing, secs_per_edge));
                edges.push(edge(&label(r, c + 1), &label(r, c), spacing, secs_per_edge));
            }
            if r + 1 < side {
                edges.push(edge(&label(r, c), &label(r + 1, c), spacing, secs_per_edge));
                edges.push(edge(&label(r + 1, c), &label(r, c), spacing, secs_per_edge));
            }
        }
    }
    RoadNetwork::from_records(nodes, edges).unwrap()
}
