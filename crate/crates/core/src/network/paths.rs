use super::{NetworkError, RoadNetwork};
use crate::ids::{NodeId, Seconds};

/// Travel time stored for pairs without a path.
pub const UNREACHABLE: Seconds = Seconds::MAX;

/// Dense all-pairs tables. Paths minimise travel time; among equal-time paths
/// the shorter one wins, so `distance` is the length of the path that
/// `path_between` returns.
#[derive(Debug, Clone)]
pub struct ShortestPathTables {
    n: usize,
    time: Vec<Seconds>,
    distance: Vec<f64>,
    pred: Vec<u32>,
}

impl ShortestPathTables {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn time(&self, from: NodeId, to: NodeId) -> Seconds {
        self.time[from.index() * self.n + to.index()]
    }

    #[inline]
    pub fn distance(&self, from: NodeId, to: NodeId) -> f64 {
        self.distance[from.index() * self.n + to.index()]
    }

    #[inline]
    pub fn is_reachable(&self, from: NodeId, to: NodeId) -> bool {
        self.time(from, to) != UNREACHABLE
    }

    /// Node sequence of the time-optimal path, both endpoints included.
    pub fn path_between(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, NetworkError> {
        if !self.is_reachable(from, to) {
            return Err(NetworkError::Unreachable(from, to));
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = NodeId(self.pred[from.index() * self.n + cur.index()]);
            path.push(cur);
            if path.len() > self.n {
                // corrupt predecessor table
                return Err(NetworkError::Unreachable(from, to));
            }
        }
        path.reverse();
        Ok(path)
    }

    /// First pair among `pairs` that has no path.
    pub fn first_unreachable(&self, pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Option<(NodeId, NodeId)> {
        pairs.into_iter().find(|&(a, b)| !self.is_reachable(a, b))
    }
}

/// Floyd-Warshall over (time, distance) in lexicographic order.
pub fn all_pairs_shortest(net: &RoadNetwork) -> ShortestPathTables {
    let n = net.num_nodes();
    let mut time = vec![UNREACHABLE; n * n];
    let mut distance = vec![f64::INFINITY; n * n];
    let mut pred = vec![u32::MAX; n * n];
    for i in 0..n {
        time[i * n + i] = 0;
        distance[i * n + i] = 0.0;
        pred[i * n + i] = i as u32;
    }
    for e in net.edges() {
        let (i, j) = (e.from.index(), e.to.index());
        if i == j {
            continue;
        }
        let cell = i * n + j;
        if e.time_s < time[cell] || (e.time_s == time[cell] && e.length_m < distance[cell]) {
            time[cell] = e.time_s;
            distance[cell] = e.length_m;
            pred[cell] = i as u32;
        }
    }

    for k in 0..n {
        let row_k = k * n;
        for i in 0..n {
            let row_i = i * n;
            let t_ik = time[row_i + k];
            if t_ik == UNREACHABLE || i == k {
                continue;
            }
            let d_ik = distance[row_i + k];
            for j in 0..n {
                let t_kj = time[row_k + j];
                if t_kj == UNREACHABLE {
                    continue;
                }
                let nt = t_ik + t_kj;
                let cur = time[row_i + j];
                if nt > cur {
                    continue;
                }
                let nd = d_ik + distance[row_k + j];
                if nt < cur || nd < distance[row_i + j] - 1e-9 {
                    time[row_i + j] = nt;
                    distance[row_i + j] = nd;
                    pred[row_i + j] = pred[row_k + j];
                }
            }
        }
    }

    ShortestPathTables {
        n,
        time,
        distance,
        pred,
    }
}
