use std::collections::HashMap;

use rayon::prelude::*;

use super::{sort_neighbors, Neighbor, PointSet, RadiusTest};
use crate::error::{Error, Result};
use crate::geo::{bbox_contains, BBox, GeoPoint, EARTH_RADIUS_M};
use crate::graph::{RoadGraph, VertexId};

/// About 1.1 km of latitude per cell.
pub const DEFAULT_GRID_RESOLUTION: f64 = 0.01;

type CellKey = (i64, i64);

/// Uniform lat/lon grid; cell key is `(floor(lon / res), floor(lat / res))`.
#[derive(Clone, Debug)]
pub struct GridIndex {
    resolution: f64,
    set: PointSet,
    cells: HashMap<CellKey, Vec<usize>>,
}

pub fn build_grid(graph: &RoadGraph, resolution: f64) -> Result<GridIndex> {
    GridIndex::new(&graph.vertex_points(), resolution)
}

impl GridIndex {
    pub fn new(points: &[(VertexId, GeoPoint)], resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid resolution must be > 0, got {resolution}")));
        }
        let set = PointSet::new(points);
        let mut cells: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (slot, p) in set.points.iter().enumerate() {
            cells.entry(cell_key(*p, resolution)).or_default().push(slot);
        }
        Ok(GridIndex { resolution, set, cells })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.len() == 0
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Vertex ids stored in one cell, in insertion order.
    pub fn cell_members(&self, key: (i64, i64)) -> Vec<VertexId> {
        self.cells
            .get(&key)
            .map(|slots| slots.iter().map(|&s| self.set.ids[s]).collect())
            .unwrap_or_default()
    }

    pub fn cell_of(&self, p: GeoPoint) -> (i64, i64) {
        cell_key(p, self.resolution)
    }

    pub(crate) fn points(&self) -> impl Iterator<Item = (VertexId, GeoPoint)> + '_ {
        self.set.ids.iter().copied().zip(self.set.points.iter().copied())
    }

    /// Vertices within `radius` meters of `center` (closed ball), sorted by id.
    pub fn query_radius(&self, center: GeoPoint, radius: f64) -> Result<Vec<VertexId>> {
        let mut ids: Vec<VertexId> = self
            .query_radius_with_distance(center, radius)?
            .into_iter()
            .map(|n| n.id)
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }

    /// Same as [`query_radius`](Self::query_radius) with distances, sorted by (distance, id).
    pub fn query_radius_with_distance(&self, center: GeoPoint, radius: f64) -> Result<Vec<Neighbor>> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be >= 0, got {radius}")));
        }
        let test = RadiusTest::new(center, radius);
        let mut out = Vec::new();
        let mut visit = |slot: usize| {
            if let Some(d) = test.check(&self.set, slot) {
                out.push(Neighbor { id: self.set.ids[slot], distance_m: d });
            }
        };
        match radius_window(center, radius, self.resolution) {
            Some(window) if window.cell_count() <= self.cells.len() => {
                for row in window.rows.0..=window.rows.1 {
                    for cols in &window.cols {
                        for col in cols.0..=cols.1 {
                            if let Some(slots) = self.cells.get(&(col, row)) {
                                slots.iter().for_each(|&s| visit(s));
                            }
                        }
                    }
                }
            }
            Some(window) => {
                for (key, slots) in &self.cells {
                    if window.contains(*key) {
                        slots.iter().for_each(|&s| visit(s));
                    }
                }
            }
            None => (0..self.set.len()).for_each(&mut visit),
        }
        sort_neighbors(&mut out);
        Ok(out)
    }

    /// Vertices inside the closed box, sorted by id.
    pub fn query_bbox(&self, b: &BBox) -> Vec<VertexId> {
        let rows = (floor_div(b.min_lat, self.resolution), floor_div(b.max_lat, self.resolution));
        let cols = (floor_div(b.min_lon, self.resolution), floor_div(b.max_lon, self.resolution));
        let window = Window { rows, cols: vec![cols] };
        let mut out = Vec::new();
        let mut visit = |slots: &Vec<usize>| {
            for &s in slots {
                if bbox_contains(b, self.set.points[s]) {
                    out.push(self.set.ids[s]);
                }
            }
        };
        if window.cell_count() <= self.cells.len() {
            for row in rows.0..=rows.1 {
                for col in cols.0..=cols.1 {
                    if let Some(slots) = self.cells.get(&(col, row)) {
                        visit(slots);
                    }
                }
            }
        } else {
            for (key, slots) in &self.cells {
                if window.contains(*key) {
                    visit(slots);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Radius queries in parallel on the current rayon pool; output order follows input.
    pub fn batch_radius(&self, queries: &[(GeoPoint, f64)]) -> Result<Vec<Vec<VertexId>>> {
        queries
            .par_iter()
            .map(|(c, r)| self.query_radius(*c, *r))
            .collect()
    }
}

fn floor_div(v: f64, res: f64) -> i64 {
    (v / res).floor() as i64
}

fn cell_key(p: GeoPoint, res: f64) -> CellKey {
    (floor_div(p.lon(), res), floor_div(p.lat(), res))
}

struct Window {
    rows: (i64, i64),
    cols: Vec<(i64, i64)>,
}

impl Window {
    fn cell_count(&self) -> usize {
        let rows = (self.rows.1 - self.rows.0 + 1).max(0) as usize;
        let cols: usize = self.cols.iter().map(|c| (c.1 - c.0 + 1).max(0) as usize).sum();
        rows.saturating_mul(cols)
    }

    fn contains(&self, (col, row): CellKey) -> bool {
        row >= self.rows.0 && row <= self.rows.1 && self.cols.iter().any(|c| col >= c.0 && col <= c.1)
    }
}

/// Candidate cell window for a spherical cap; `None` means scan everything.
fn radius_window(center: GeoPoint, radius: f64, res: f64) -> Option<Window> {
    let angle = radius / EARTH_RADIUS_M;
    if angle >= std::f64::consts::FRAC_PI_2 {
        return None;
    }
    // Slack absorbs rounding at cell borders; it only ever adds candidates.
    let slack = 1e-9;
    let dlat = angle.to_degrees() * (1.0 + slack) + slack;
    let (lat_lo, lat_hi) = (center.lat() - dlat, center.lat() + dlat);
    let rows = (floor_div(lat_lo.max(-90.0), res), floor_div(lat_hi.min(90.0), res));
    let full_lon = (floor_div(-180.0, res), floor_div(180.0, res));
    if lat_hi >= 90.0 || lat_lo <= -90.0 {
        return Some(Window { rows, cols: vec![full_lon] });
    }
    let ratio = angle.sin() / center.lat().to_radians().cos();
    if ratio >= 1.0 {
        return None;
    }
    let dlon = ratio.asin().to_degrees() * (1.0 + slack) + slack;
    if dlon >= 180.0 {
        return None;
    }
    let (lon_lo, lon_hi) = (center.lon() - dlon, center.lon() + dlon);
    let mut cols = Vec::with_capacity(2);
    if lon_lo < -180.0 {
        cols.push((floor_div(lon_lo + 360.0, res), full_lon.1));
        cols.push((full_lon.0, floor_div(lon_hi, res)));
    } else if lon_hi >= 180.0 {
        cols.push((floor_div(lon_lo, res), full_lon.1));
        cols.push((full_lon.0, floor_div(lon_hi - 360.0, res)));
    } else {
        cols.push((floor_div(lon_lo, res), floor_div(lon_hi, res)));
    }
    Some(Window { rows, cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;
    use crate::index::NaiveScan;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(GridIndex::new(&[], 0.0).is_err());
        assert!(GridIndex::new(&[], -1.0).is_err());
        assert!(GridIndex::new(&[], f64::NAN).is_err());
    }

    #[test]
    fn empty_and_single_cell() {
        let g = GridIndex::new(&[], 0.01).unwrap();
        assert!(g.is_empty());
        assert!(g.query_radius(pt(0.0, 0.0), 1000.0).unwrap().is_empty());
        let g = GridIndex::new(&[(1, pt(0.005, 0.005))], 0.01).unwrap();
        assert_eq!(g.cell_of(pt(0.005, 0.005)), (0, 0));
        assert_eq!(g.cell_members((0, 0)), vec![1]);
        assert_eq!(g.cell_of(pt(-0.005, -0.015)), (-2, -1));
    }

    #[test]
    fn membership_matches_floor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<(i64, GeoPoint)> = (0..10_000)
            .map(|i| (i, pt(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))))
            .collect();
        let g = GridIndex::new(&pts, 0.01).unwrap();
        let mut oracle: HashMap<(i64, i64), Vec<i64>> = HashMap::new();
        for (id, p) in &pts {
            let key = ((p.lon() / 0.01).floor() as i64, (p.lat() / 0.01).floor() as i64);
            oracle.entry(key).or_default().push(*id);
        }
        assert_eq!(g.cell_count(), oracle.len());
        for (key, ids) in oracle {
            assert_eq!(g.cell_members(key), ids);
        }
    }

    #[test]
    fn radius_zero_and_whole_extent() {
        let pts = vec![(1, pt(0.0, 0.0)), (2, pt(0.0, 0.0001)), (3, pt(0.5, 0.5))];
        let g = GridIndex::new(&pts, 0.01).unwrap();
        assert_eq!(g.query_radius(pt(0.0, 0.0), 0.0).unwrap(), vec![1]);
        assert_eq!(g.query_radius(pt(0.0, 0.0), 200_000.0).unwrap(), vec![1, 2, 3]);
        assert!(g.query_radius(pt(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn radius_matches_naive_including_poles_and_antimeridian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts: Vec<(i64, GeoPoint)> = Vec::new();
        for i in 0..3000 {
            let (lat, lon) = match i % 3 {
                0 => (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                1 => (rng.random_range(88.0..90.0), rng.random_range(-180.0..180.0)),
                _ => (rng.random_range(-1.0..1.0), rng.random_range(179.0..180.0) * if i % 2 == 0 { 1.0 } else { -1.0 }),
            };
            pts.push((i, pt(lat, lon)));
        }
        let g = GridIndex::new(&pts, 0.05).unwrap();
        let naive = NaiveScan::new(&pts);
        for q in 0..600 {
            let src = pts[rng.random_range(0..pts.len())].1;
            let center = pt(
                (src.lat() + rng.random_range(-0.1..0.1)).clamp(-90.0, 90.0),
                src.lon() + rng.random_range(-0.1..0.1),
            );
            let radius = if q % 50 == 0 { 3_000_000.0 } else { rng.random_range(0.0..40_000.0) };
            assert_eq!(g.query_radius(center, radius).unwrap(), naive.query_radius(center, radius));
        }
    }

    #[test]
    fn radius_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(i64, GeoPoint)> = (0..2000)
            .map(|i| (i, pt(rng.random_range(0.0..0.2), rng.random_range(0.0..0.2))))
            .collect();
        let g = GridIndex::new(&pts, 0.01).unwrap();
        let c = pt(0.1, 0.1);
        let mut prev: Vec<i64> = Vec::new();
        for r in (0..40).map(|i| i as f64 * 300.0) {
            let cur = g.query_radius(c, r).unwrap();
            assert!(prev.iter().all(|id| cur.binary_search(id).is_ok()));
            for id in &cur {
                let p = pts[*id as usize].1;
                assert!(haversine_distance(c, p) <= r);
            }
            prev = cur;
        }
    }

    #[test]
    fn bbox_queries() {
        let pts = vec![(1, pt(0.0, 0.0)), (2, pt(0.5, 0.5)), (3, pt(1.0, 1.0))];
        let g = GridIndex::new(&pts, 0.1).unwrap();
        assert!(g.query_bbox(&BBox::new(0.1, 0.1, 0.2, 0.2).unwrap()).is_empty());
        assert_eq!(g.query_bbox(&BBox::new(0.0, 0.0, 1.0, 1.0).unwrap()), vec![1, 2, 3]);
        assert_eq!(g.query_bbox(&BBox::new(-90.0, -180.0, 90.0, 180.0).unwrap()), vec![1, 2, 3]);
    }
}
