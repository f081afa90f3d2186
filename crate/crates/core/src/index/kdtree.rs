use rayon::prelude::*;

use super::{chord2, KnnSearch, Neighbor, PointSet};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::graph::{RoadGraph, VertexId};

pub const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Balanced k-d tree over unit-sphere embeddings of the vertices.
///
/// Search runs on squared chord length, which orders points the same way as
/// great-circle distance. Anything within a hair of the k-th best chord is
/// re-ranked by exact haversine distance and then by id.
#[derive(Clone, Debug)]
pub struct KdIndex {
    set: PointSet,
    nodes: Vec<Node>,
}

impl KdIndex {
    pub fn new(points: &[(VertexId, GeoPoint)]) -> Self {
        let base = PointSet::new(points);
        let mut order: Vec<usize> = (0..base.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build(&base, &mut order, 0, 0, &mut nodes);
        }
        KdIndex { set: base.permuted(&order), nodes }
    }

    pub fn from_graph(graph: &RoadGraph) -> Self {
        KdIndex::new(&graph.vertex_points())
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.len() == 0
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    pub fn query_nearest(&self, q: GeoPoint) -> Result<Neighbor> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(self.query_knn(q, 1)?[0])
    }

    /// The `min(k, n)` closest vertices sorted by (distance, id).
    pub fn query_knn(&self, q: GeoPoint, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let mut search = KnnSearch::new(q, k);
        self.descend(0, &mut search);
        Ok(search.finish(&self.set, q))
    }

    pub fn batch_nearest(&self, queries: &[GeoPoint]) -> Result<Vec<Neighbor>> {
        queries.par_iter().map(|q| self.query_nearest(*q)).collect()
    }

    pub fn batch_knn(&self, queries: &[GeoPoint], k: usize) -> Result<Vec<Vec<Neighbor>>> {
        queries.par_iter().map(|q| self.query_knn(*q, k)).collect()
    }

    fn descend(&self, node: usize, search: &mut KnnSearch) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    search.offer(slot, chord2(&search.query, &self.set.units[slot]));
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = search.query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.descend(near, search);
                if diff * diff <= search.bound() {
                    self.descend(far, search);
                }
            }
        }
    }
}

fn build(set: &PointSet, order: &mut [usize], offset: usize, depth: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset, end: offset + order.len() });
        return id;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        set.units[a][axis]
            .total_cmp(&set.units[b][axis])
            .then(set.ids[a].cmp(&set.ids[b]))
    });
    let value = set.units[order[mid]][axis];
    nodes.push(Node::Split { axis, value, left: 0, right: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(set, lo, offset, depth + 1, nodes);
    let right = build(set, hi, offset + mid, depth + 1, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::NaiveScan;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn random_points(n: usize, seed: u64) -> Vec<(VertexId, GeoPoint)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n as i64)
            .map(|i| (i * 3 + 1, pt(rng.random_range(-60.0..60.0), rng.random_range(-180.0..180.0))))
            .collect()
    }

    #[test]
    fn empty_and_singleton() {
        let empty = KdIndex::new(&[]);
        assert!(matches!(empty.query_nearest(pt(0.0, 0.0)), Err(Error::EmptyIndex)));
        assert!(empty.query_knn(pt(0.0, 0.0), 3).unwrap().is_empty());
        let one = KdIndex::new(&[(42, pt(10.0, 10.0))]);
        let n = one.query_nearest(pt(-30.0, 100.0)).unwrap();
        assert_eq!(n.id, 42);
        assert!(matches!(one.query_knn(pt(0.0, 0.0), 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn exact_hit_and_tie_break() {
        let pts = vec![(9, pt(1.0, 1.0)), (4, pt(1.0, 1.0)), (7, pt(2.0, 2.0))];
        let kd = KdIndex::new(&pts);
        let n = kd.query_nearest(pt(1.0, 1.0)).unwrap();
        assert_eq!((n.id, n.distance_m), (4, 0.0));
        // Equidistant on the equator either side of the query.
        let pts = vec![(5, pt(0.0, 1.0)), (3, pt(0.0, -1.0))];
        assert_eq!(KdIndex::new(&pts).query_nearest(pt(0.0, 0.0)).unwrap().id, 3);
    }

    #[test]
    fn depth_is_logarithmic() {
        for n in [1usize, 17, 100, 1000, 12345] {
            let kd = KdIndex::new(&random_points(n, n as u64));
            assert_eq!(kd.len(), n);
            let bound = (n as f64).log2().ceil() as usize + 1;
            assert!(kd.depth() <= bound, "n={n} depth={}", kd.depth());
        }
    }

    #[test]
    fn knn_matches_naive() {
        let pts = random_points(5000, 1);
        let kd = KdIndex::new(&pts);
        let naive = NaiveScan::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..300 {
            let q = pt(rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0));
            let k = 1 + i % 12;
            let got = kd.query_knn(q, k).unwrap();
            assert_eq!(got, naive.query_knn(q, k).unwrap());
            // Oracle: full sort on exact distance, then id.
            let mut all: Vec<Neighbor> = pts
                .iter()
                .map(|(id, p)| Neighbor { id: *id, distance_m: crate::geo::haversine_distance(q, *p) })
                .collect();
            all.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m).then(a.id.cmp(&b.id)));
            all.truncate(k);
            assert_eq!(got, all);
            assert_eq!(kd.query_nearest(q).unwrap(), naive.query_nearest(q).unwrap());
        }
        let all = kd.query_knn(pt(0.0, 0.0), 10_000).unwrap();
        assert_eq!(all.len(), 5000);
        assert!(all.windows(2).all(|w| w[0].distance_m <= w[1].distance_m));
    }

    #[test]
    fn duplicates_and_clusters() {
        // Many coincident points exercise tie handling at leaf boundaries.
        let mut pts: Vec<(VertexId, GeoPoint)> = (0..200).map(|i| (1000 - i, pt(5.0, 5.0))).collect();
        pts.extend((0..200).map(|i| (i, pt(5.0 + (i % 7) as f64 * 1e-7, 5.0))));
        let kd = KdIndex::new(&pts);
        let naive = NaiveScan::new(&pts);
        for k in [1, 5, 50, 250] {
            assert_eq!(kd.query_knn(pt(5.0, 5.0), k).unwrap(), naive.query_knn(pt(5.0, 5.0), k).unwrap());
        }
    }
}
