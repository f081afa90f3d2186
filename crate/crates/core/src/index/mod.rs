//! Spatial query layer over graph vertices.
//!
//! [`GridIndex`] answers radius and box queries by scanning only the cells that
//! overlap the query window. [`KdIndex`] answers nearest and k-nearest queries
//! on the unit sphere. [`NaiveScan`] is the unindexed reference both are
//! checked and benchmarked against.
//!
//! All three share one distance predicate: a cheap chord-length rejection
//! followed by an exact haversine comparison, so indexed and naive answers are
//! bit-identical.

mod grid;
mod kdtree;
mod naive;

pub use grid::{build_grid, GridIndex, DEFAULT_GRID_RESOLUTION};
pub use kdtree::{KdIndex, LEAF_SIZE};
pub use naive::NaiveScan;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::geo::{chord_for_distance, GeoPoint, PointTrig};
use crate::graph::VertexId;

/// A query answer: vertex id and great-circle distance in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    pub id: VertexId,
    pub distance_m: f64,
}

/// Column-oriented copy of the indexed points with cached trigonometry.
#[derive(Clone, Debug, Default)]
pub(crate) struct PointSet {
    pub ids: Vec<VertexId>,
    pub points: Vec<GeoPoint>,
    pub trig: Vec<PointTrig>,
    pub units: Vec<[f64; 3]>,
}

impl PointSet {
    pub fn new(items: &[(VertexId, GeoPoint)]) -> Self {
        let mut set = PointSet::default();
        set.ids.reserve(items.len());
        for (id, p) in items {
            set.ids.push(*id);
            set.points.push(*p);
            set.trig.push(PointTrig::from(*p));
            set.units.push(p.unit_vector());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        PointSet {
            ids: order.iter().map(|&i| self.ids[i]).collect(),
            points: order.iter().map(|&i| self.points[i]).collect(),
            trig: order.iter().map(|&i| self.trig[i]).collect(),
            units: order.iter().map(|&i| self.units[i]).collect(),
        }
    }
}

#[inline]
pub(crate) fn chord2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

/// Widens a squared chord so that floating-point noise in either the chord or
/// the haversine route can never reject a point the haversine would accept.
#[inline]
pub(crate) fn widen_chord2(c2: f64) -> f64 {
    let c = c2.sqrt() * (1.0 + 1e-6) + 1e-12;
    c * c
}

/// Closed-ball membership test shared by every radius query.
pub(crate) struct RadiusTest {
    center: PointTrig,
    center_unit: [f64; 3],
    radius: f64,
    chord_bound2: f64,
}

impl RadiusTest {
    pub fn new(center: GeoPoint, radius: f64) -> Self {
        let c = chord_for_distance(radius);
        RadiusTest {
            center: PointTrig::from(center),
            center_unit: center.unit_vector(),
            radius,
            chord_bound2: widen_chord2(c * c),
        }
    }

    #[inline]
    pub fn check(&self, set: &PointSet, slot: usize) -> Option<f64> {
        if chord2(&self.center_unit, &set.units[slot]) > self.chord_bound2 {
            return None;
        }
        let d = self.center.distance(&set.trig[slot]);
        (d <= self.radius).then_some(d)
    }
}

pub(crate) fn sort_neighbors(list: &mut [Neighbor]) {
    list.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m).then(a.id.cmp(&b.id)));
}

#[derive(PartialEq)]
struct HeapItem(f64);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Bounded k-best collector on squared chord length.
///
/// Every slot within a hair of the k-th best chord is kept, then re-ranked by
/// exact haversine distance and id, so the answer does not depend on the
/// order in which slots are offered.
pub(crate) struct KnnSearch {
    pub query: [f64; 3],
    k: usize,
    heap: BinaryHeap<HeapItem>,
    candidates: Vec<(usize, f64)>,
}

impl KnnSearch {
    pub fn new(q: GeoPoint, k: usize) -> Self {
        KnnSearch { query: q.unit_vector(), k, heap: BinaryHeap::with_capacity(k + 1), candidates: Vec::new() }
    }

    /// Squared chord beyond which no point can enter the final answer.
    #[inline]
    pub fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            widen_chord2(self.heap.peek().map(|h| h.0).unwrap_or(f64::INFINITY))
        }
    }

    #[inline]
    pub fn offer(&mut self, slot: usize, c2: f64) {
        if c2 > self.bound() {
            return;
        }
        self.candidates.push((slot, c2));
        if self.heap.len() < self.k {
            self.heap.push(HeapItem(c2));
        } else if c2 < self.heap.peek().map(|h| h.0).unwrap_or(f64::INFINITY) {
            self.heap.pop();
            self.heap.push(HeapItem(c2));
        }
    }

    pub fn finish(self, set: &PointSet, q: GeoPoint) -> Vec<Neighbor> {
        let limit = self.bound();
        let qt = PointTrig::from(q);
        let mut out: Vec<Neighbor> = self
            .candidates
            .into_iter()
            .filter(|(_, c2)| *c2 <= limit)
            .map(|(slot, _)| Neighbor { id: set.ids[slot], distance_m: qt.distance(&set.trig[slot]) })
            .collect();
        sort_neighbors(&mut out);
        out.truncate(self.k);
        out
    }
}
