use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, RoadGraph, VertexId};

/// Directed arc of a routing graph. `key` is `2 * edge_id + direction`, with
/// direction 0 running along the edge geometry and 1 against it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub key: u64,
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
}

pub fn arc_key(edge: EdgeId, backward: bool) -> u64 {
    2 * edge + backward as u64
}

/// Dijkstra over a fixed arc set with a deterministic tie rule.
#[derive(Clone, Debug)]
pub struct Router {
    out: Vec<Vec<Arc>>,
    zero_arcs: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Arc keys in travel order.
    pub arcs: Vec<u64>,
    pub length_m: f64,
}

impl Route {
    pub fn edge_ids(&self) -> Vec<EdgeId> {
        self.arcs.iter().map(|k| k / 2).collect()
    }
}

impl Router {
    pub fn new(node_count: usize, arcs: impl IntoIterator<Item = Arc>) -> Self {
        let mut out = vec![Vec::new(); node_count];
        let mut zero_arcs = false;
        for a in arcs {
            zero_arcs |= a.length_m == 0.0;
            out[a.from].push(a);
        }
        for list in &mut out {
            list.sort_by_key(|a| a.key);
        }
        Router { out, zero_arcs }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    /// Distances from `source`; unreachable nodes are `f64::INFINITY`.
    pub fn distances(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.out.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((Dist(0.0), source)));
        while let Some(Reverse((Dist(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for a in &self.out[u] {
                let nd = d + a.length_m;
                if nd < dist[a.to] {
                    dist[a.to] = nd;
                    heap.push(Reverse((Dist(nd), a.to)));
                }
            }
        }
        dist
    }

    /// Minimum-length path; among equal lengths the lexicographically smallest
    /// arc-key sequence wins. `None` if `to` is unreachable.
    pub fn route(&self, from: usize, to: usize) -> Option<Route> {
        let dist = self.distances(from);
        if !dist[to].is_finite() {
            return None;
        }
        if from == to {
            return Some(Route { arcs: Vec::new(), length_m: 0.0 });
        }
        let tight = |a: &Arc| dist[a.from] + a.length_m == dist[a.to];

        // Nodes that reach `to` through tight arcs.
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); self.out.len()];
        for list in &self.out {
            for a in list.iter().filter(|a| dist[a.from].is_finite() && tight(a)) {
                reverse[a.to].push(a.from);
            }
        }
        let mut reaches = vec![false; self.out.len()];
        reaches[to] = true;
        let mut queue = VecDeque::from([to]);
        while let Some(v) = queue.pop_front() {
            for &u in &reverse[v] {
                if !reaches[u] {
                    reaches[u] = true;
                    queue.push_back(u);
                }
            }
        }

        let mut visited = vec![false; self.out.len()];
        visited[from] = true;
        let mut arcs = Vec::new();
        let mut cur = from;
        while cur != to {
            let next = self.out[cur].iter().find(|a| {
                tight(a)
                    && reaches[a.to]
                    && !visited[a.to]
                    // Zero-length arcs make the tight subgraph cyclic; then check
                    // that a simple continuation still exists.
                    && (!self.zero_arcs || self.reaches_avoiding(a.to, to, &visited, &dist))
            })?;
            arcs.push(next.key);
            visited[next.to] = true;
            cur = next.to;
        }
        Some(Route { arcs, length_m: dist[to] })
    }

    fn reaches_avoiding(&self, start: usize, target: usize, blocked: &[bool], dist: &[f64]) -> bool {
        let mut seen = blocked.to_vec();
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            if u == target {
                return true;
            }
            for a in &self.out[u] {
                if !seen[a.to] && dist[u] + a.length_m == dist[a.to] {
                    seen[a.to] = true;
                    queue.push_back(a.to);
                }
            }
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Router over the graph's vertices, indexed in ascending id order.
#[derive(Clone, Debug)]
pub struct GraphRouter {
    ids: Vec<VertexId>,
    slots: BTreeMap<VertexId, usize>,
    router: Router,
}

impl GraphRouter {
    pub fn new(graph: &RoadGraph) -> Self {
        let ids: Vec<VertexId> = graph.vertices().map(|v| v.id).collect();
        let slots: BTreeMap<VertexId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let arcs = graph.edges().flat_map(|e| {
            let (a, b) = (slots[&e.from], slots[&e.to]);
            let fwd = Arc { key: arc_key(e.id, false), from: a, to: b, length_m: e.length_m };
            let bwd = Arc { key: arc_key(e.id, true), from: b, to: a, length_m: e.length_m };
            std::iter::once(fwd).chain((!e.oneway).then_some(bwd))
        });
        let router = Router::new(ids.len(), arcs.collect::<Vec<_>>());
        GraphRouter { ids, slots, router }
    }

    pub fn shortest_path(&self, from: VertexId, to: VertexId) -> Result<Option<Route>> {
        let a = *self.slots.get(&from).ok_or(Error::UnknownVertex(from))?;
        let b = *self.slots.get(&to).ok_or(Error::UnknownVertex(to))?;
        Ok(self.router.route(a, b))
    }

    pub fn vertex_ids(&self) -> &[VertexId] {
        &self.ids
    }
}

/// Shortest directed path respecting oneway edges. `Ok(None)` means no path.
pub fn shortest_path(graph: &RoadGraph, from: VertexId, to: VertexId) -> Result<Option<Route>> {
    GraphRouter::new(graph).shortest_path(from, to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arc(key: u64, from: usize, to: usize, w: f64) -> Arc {
        Arc { key, from, to, length_m: w }
    }

    #[test]
    fn trivial_routes() {
        let r = Router::new(3, vec![arc(0, 0, 1, 5.0)]);
        assert_eq!(r.route(0, 0).unwrap(), Route { arcs: vec![], length_m: 0.0 });
        assert_eq!(r.route(0, 1).unwrap().arcs, vec![0]);
        assert_eq!(r.route(1, 0), None);
        assert_eq!(r.route(0, 2), None);
    }

    #[test]
    fn equal_length_ties_pick_smallest_sequence() {
        // 0 -> 3 via 1 (keys 8, 2) or via 2 (keys 4, 6): same length.
        let r = Router::new(4, vec![arc(8, 0, 1, 1.0), arc(2, 1, 3, 1.0), arc(4, 0, 2, 1.0), arc(6, 2, 3, 1.0)]);
        assert_eq!(r.route(0, 3).unwrap().arcs, vec![4, 6]);
        // Parallel arcs between the same pair.
        let r = Router::new(2, vec![arc(10, 0, 1, 1.0), arc(6, 0, 1, 1.0), arc(12, 0, 1, 0.5)]);
        assert_eq!(r.route(0, 1).unwrap().arcs, vec![12]);
    }

    #[test]
    fn zero_length_cycle_terminates() {
        let r = Router::new(
            4,
            vec![arc(0, 0, 1, 1.0), arc(2, 1, 2, 0.0), arc(4, 2, 1, 0.0), arc(6, 2, 3, 1.0), arc(8, 1, 3, 1.0)],
        );
        let route = r.route(0, 3).unwrap();
        assert_eq!(route.length_m, 2.0);
        assert_eq!(route.arcs, vec![0, 2, 6]);
    }

    fn brute_force_smallest(r: &Router, from: usize, to: usize) -> Option<(f64, Vec<u64>)> {
        // Enumerate all simple paths on a tiny graph.
        fn walk(r: &Router, u: usize, to: usize, seen: &mut Vec<bool>, path: &mut Vec<u64>, len: f64, best: &mut Option<(f64, Vec<u64>)>) {
            if u == to {
                let better = match best {
                    None => true,
                    Some((bl, bp)) => len < *bl || (len == *bl && path < bp),
                };
                if better {
                    *best = Some((len, path.clone()));
                }
                return;
            }
            for a in &r.out[u] {
                if !seen[a.to] {
                    seen[a.to] = true;
                    path.push(a.key);
                    walk(r, a.to, to, seen, path, len + a.length_m, best);
                    path.pop();
                    seen[a.to] = false;
                }
            }
        }
        let mut seen = vec![false; r.node_count()];
        seen[from] = true;
        let mut best = None;
        walk(r, from, to, &mut seen, &mut Vec::new(), 0.0, &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_enumeration_on_small_integer_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = 6;
            let arcs: Vec<Arc> = (0..12)
                .map(|k| arc(k, rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..4) as f64))
                .filter(|a| a.from != a.to)
                .collect();
            let r = Router::new(n, arcs);
            for (s, t) in [(0, 5), (1, 4), (2, 3)] {
                let got = r.route(s, t).map(|x| (x.length_m, x.arcs));
                assert_eq!(got, brute_force_smallest(&r, s, t));
            }
        }
    }
}
