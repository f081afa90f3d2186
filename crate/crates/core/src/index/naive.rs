use super::{chord2, widen_chord2, KnnSearch, Neighbor, PointSet, RadiusTest};
use crate::error::{Error, Result};
use crate::geo::{bbox_contains, BBox, GeoPoint, PointTrig};
use crate::graph::VertexId;

/// Unindexed reference: every query looks at every point.
#[derive(Clone, Debug)]
pub struct NaiveScan {
    set: PointSet,
}

impl NaiveScan {
    pub fn new(points: &[(VertexId, GeoPoint)]) -> Self {
        NaiveScan { set: PointSet::new(points) }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.len() == 0
    }

    pub fn query_radius(&self, center: GeoPoint, radius: f64) -> Vec<VertexId> {
        let test = RadiusTest::new(center, radius);
        let mut ids: Vec<VertexId> = (0..self.set.len())
            .filter(|&s| test.check(&self.set, s).is_some())
            .map(|s| self.set.ids[s])
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn query_bbox(&self, b: &BBox) -> Vec<VertexId> {
        let mut ids: Vec<VertexId> = (0..self.set.len())
            .filter(|&s| bbox_contains(b, self.set.points[s]))
            .map(|s| self.set.ids[s])
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Linear scan for the closest vertex, ties to the smaller id.
    pub fn query_nearest(&self, q: GeoPoint) -> Result<Neighbor> {
        if self.set.len() == 0 {
            return Err(Error::EmptyIndex);
        }
        let qt = PointTrig::from(q);
        let qu = q.unit_vector();
        let mut best = Neighbor { id: VertexId::MAX, distance_m: f64::INFINITY };
        let mut bound = f64::INFINITY;
        for s in 0..self.set.len() {
            if chord2(&qu, &self.set.units[s]) > bound {
                continue;
            }
            let d = qt.distance(&self.set.trig[s]);
            let id = self.set.ids[s];
            if d < best.distance_m || (d == best.distance_m && id < best.id) {
                best = Neighbor { id, distance_m: d };
                bound = widen_chord2(chord2(&qu, &self.set.units[s]));
            }
        }
        Ok(best)
    }

    pub fn query_knn(&self, q: GeoPoint, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let mut search = KnnSearch::new(q, k);
        for s in 0..self.set.len() {
            let c2 = chord2(&search.query, &self.set.units[s]);
            search.offer(s, c2);
        }
        Ok(search.finish(&self.set, q))
    }
}
