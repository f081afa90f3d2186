//! City-boundary detection from road density.
//!
//! Vertices are binned into a lat/lon raster, cells at or above a threshold
//! are grouped by 8-connectivity, and each group's filled outline becomes a
//! polygon. Polygons are compared against reference regions by rasterized IoU.

mod geojson_io;

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

pub use geojson_io::{compare_with_regions, polygons_to_geojson, read_regions_geojson, RegionComparison};

use crate::analytics::{kde_at, KdeParams};
use crate::error::{Error, Result};
use crate::geo::{BBox, GeoPoint, METERS_PER_DEGREE};
use crate::graph::RoadGraph;
use crate::index::GridIndex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RasterMode {
    Counts,
    Kde(KdeParams),
}

/// Row-major grid of cell values; row 0 is the southernmost row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRaster {
    pub resolution: f64,
    pub min_lat: f64,
    pub min_lon: f64,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DensityRaster {
    pub fn zeros(extent: &BBox, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!("raster resolution must be > 0, got {resolution}")));
        }
        let span = |lo: f64, hi: f64| (((hi - lo) / resolution) - 1e-9).ceil().max(1.0) as usize;
        let rows = span(extent.min_lat, extent.max_lat);
        let cols = span(extent.min_lon, extent.max_lon);
        Ok(DensityRaster {
            resolution,
            min_lat: extent.min_lat,
            min_lon: extent.min_lon,
            rows,
            cols,
            values: vec![0.0; rows * cols],
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.cols + col] = v;
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.min_lat + (row as f64 + 0.5) * self.resolution,
            self.min_lon + (col as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell holding `p` if it falls inside the extent; the far edges are closed.
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        let r = ((p.lat() - self.min_lat) / self.resolution).floor();
        let c = ((p.lon() - self.min_lon) / self.resolution).floor();
        let max_lat = self.min_lat + self.rows as f64 * self.resolution;
        let max_lon = self.min_lon + self.cols as f64 * self.resolution;
        if r < 0.0 || c < 0.0 || p.lat() > max_lat || p.lon() > max_lon {
            return None;
        }
        Some(((r as usize).min(self.rows - 1), (c as usize).min(self.cols - 1)))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// 90th percentile (nearest rank) of the nonzero cell values.
    pub fn default_threshold(&self) -> Option<f64> {
        let mut nz: Vec<f64> = self.values.iter().copied().filter(|v| *v > 0.0).collect();
        if nz.is_empty() {
            return None;
        }
        nz.sort_by(f64::total_cmp);
        let rank = ((0.9 * nz.len() as f64).ceil() as usize).max(1);
        Some(nz[rank - 1])
    }
}

/// Rasterizes graph vertices over `extent`.
pub fn rasterize(graph: &RoadGraph, extent: &BBox, resolution: f64, mode: RasterMode) -> Result<DensityRaster> {
    let mut raster = DensityRaster::zeros(extent, resolution)?;
    match mode {
        RasterMode::Counts => {
            for v in graph.vertices() {
                if !extent.contains(v.location) {
                    continue;
                }
                if let Some((r, c)) = raster.cell_of(v.location) {
                    raster.values[r * raster.cols + c] += 1.0;
                }
            }
        }
        RasterMode::Kde(params) => {
            use rayon::prelude::*;
            params.validate()?;
            let index = GridIndex::new(&graph.vertex_points(), crate::index::DEFAULT_GRID_RESOLUTION)?;
            let n = graph.vertex_count();
            let cols = raster.cols;
            let values: Vec<f64> = (0..raster.values.len())
                .into_par_iter()
                .map(|i| {
                    let (lat, lon) = raster.cell_center(i / cols, i % cols);
                    kde_at(GeoPoint::new(lat, lon)?, &index, n, &params)
                })
                .collect::<Result<_>>()?;
            raster.values = values;
        }
    }
    Ok(raster)
}

/// Per-cell cluster ids (0 = background) and member lists.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterLabeling {
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<u32>,
    /// `clusters[id - 1]` lists the row-major cell indices of cluster `id`, ascending.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterLabeling {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols + col]
    }
}

/// 8-connected components of cells with value `>= threshold`, numbered from 1
/// in row-major order of discovery.
pub fn cluster_dense_cells(raster: &DensityRaster, threshold: f64) -> Result<ClusterLabeling> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {threshold}")));
    }
    let (rows, cols) = (raster.rows, raster.cols);
    let dense = |i: usize| raster.values[i] >= threshold;
    let mut labels = vec![0u32; rows * cols];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..rows * cols {
        if labels[start] != 0 || !dense(start) {
            continue;
        }
        let id = clusters.len() as u32 + 1;
        let mut members = vec![start];
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / cols) as i64, (i % cols) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if labels[j] == 0 && dense(j) {
                        labels[j] = id;
                        members.push(j);
                        queue.push_back(j);
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    Ok(ClusterLabeling { rows, cols, labels, clusters })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPolygon {
    pub cluster_id: u32,
    /// Closed counter-clockwise ring; first point equals last.
    pub exterior: Vec<GeoPoint>,
    /// Labeled cells in the cluster (holes excluded).
    pub cell_count: usize,
    /// Area of the filled outline on the equirectangular plane at the cluster's mean latitude.
    pub area_km2: f64,
}

/// Area in km² of one raster cell on the equirectangular plane at `lat`.
pub fn cell_area_km2(resolution: f64, lat: f64) -> f64 {
    let side = resolution * METERS_PER_DEGREE / 1000.0;
    side * side * lat.to_radians().cos()
}

/// Traces the filled outline of every cluster.
///
/// Interior holes are filled. Where cells touch only at a corner, the ring
/// passes through that corner twice rather than splitting the cluster.
pub fn polygonize(labeling: &ClusterLabeling, raster: &DensityRaster) -> Result<Vec<BoundaryPolygon>> {
    labeling
        .clusters
        .iter()
        .enumerate()
        .map(|(i, members)| trace_cluster(i as u32 + 1, members, labeling.cols, raster))
        .collect()
}

fn trace_cluster(id: u32, members: &[usize], cols: usize, raster: &DensityRaster) -> Result<BoundaryPolygon> {
    let cells: Vec<(i64, i64)> = members.iter().map(|&i| ((i / cols) as i64, (i % cols) as i64)).collect();
    let r0 = cells.iter().map(|c| c.0).min().unwrap() - 1;
    let c0 = cells.iter().map(|c| c.1).min().unwrap() - 1;
    let h = (cells.iter().map(|c| c.0).max().unwrap() - r0 + 2) as usize;
    let w = (cells.iter().map(|c| c.1).max().unwrap() - c0 + 2) as usize;

    // Padded local mask, then flood the outside through 4-connected background.
    let mut filled = vec![false; h * w];
    for (r, c) in &cells {
        filled[(r - r0) as usize * w + (c - c0) as usize] = true;
    }
    let mut outside = vec![false; h * w];
    let mut queue = VecDeque::from([0usize]);
    outside[0] = true;
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let mut push = |j: usize| {
            if !filled[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if r > 0 {
            push(i - w);
        }
        if r + 1 < h {
            push(i + w);
        }
        if c > 0 {
            push(i - 1);
        }
        if c + 1 < w {
            push(i + 1);
        }
    }
    let inside = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && !outside[r as usize * w + c as usize]
    };

    // Directed boundary edges with the interior on the left, keyed by start corner (x, y).
    let mut outgoing: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    let mut edge_count = 0usize;
    let mut filled_cells = 0usize;
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            if !inside(r, c) {
                continue;
            }
            filled_cells += 1;
            let mut add = |a: (i64, i64), b: (i64, i64)| {
                outgoing.entry(a).or_default().push(b);
                edge_count += 1;
            };
            if !inside(r - 1, c) {
                add((c, r), (c + 1, r));
            }
            if !inside(r, c + 1) {
                add((c + 1, r), (c + 1, r + 1));
            }
            if !inside(r + 1, c) {
                add((c + 1, r + 1), (c, r + 1));
            }
            if !inside(r, c - 1) {
                add((c, r + 1), (c, r));
            }
        }
    }

    let start = *outgoing.keys().min_by_key(|(x, y)| (*y, *x)).unwrap();
    let mut ring = vec![start];
    let mut cur = start;
    let mut dir = (1i64, 0i64);
    let mut used = 0usize;
    loop {
        let options = outgoing.get_mut(&cur).unwrap();
        // At a corner shared by two diagonal cells, the right turn keeps them joined.
        let right = (dir.1, -dir.0);
        let pick = options
            .iter()
            .position(|&n| (n.0 - cur.0, n.1 - cur.1) == right)
            .unwrap_or(0);
        let next = options.swap_remove(pick);
        if options.is_empty() {
            outgoing.remove(&cur);
        }
        used += 1;
        dir = (next.0 - cur.0, next.1 - cur.1);
        cur = next;
        if cur == start {
            break;
        }
        ring.push(cur);
    }
    if used != edge_count {
        return Err(Error::Invariant(format!(
            "cluster {id}: outline used {used} of {edge_count} boundary edges"
        )));
    }

    // Drop corners where the direction does not change.
    let n = ring.len();
    let corners: Vec<(i64, i64)> = (0..n)
        .filter(|&i| {
            let (p, q, s) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (q.0 - p.0) * (s.1 - q.1) - (q.1 - p.1) * (s.0 - q.0) != 0
        })
        .map(|i| ring[i])
        .collect();

    // Shoelace on integer corners gives twice the filled cell count.
    let twice: i64 = (0..corners.len())
        .map(|i| {
            let (a, b) = (corners[i], corners[(i + 1) % corners.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    debug_assert_eq!(twice, 2 * filled_cells as i64);

    let mean_lat = cells
        .iter()
        .map(|(r, c)| raster.cell_center(*r as usize, *c as usize).0)
        .sum::<f64>()
        / cells.len() as f64;
    let area_km2 = (twice as f64 / 2.0) * cell_area_km2(raster.resolution, mean_lat);

    let mut exterior: Vec<GeoPoint> = corners
        .iter()
        .map(|(x, y)| {
            GeoPoint::new(
                raster.min_lat + (y + r0) as f64 * raster.resolution,
                raster.min_lon + (x + c0) as f64 * raster.resolution,
            )
        })
        .collect::<Result<_>>()?;
    exterior.push(exterior[0]);
    Ok(BoundaryPolygon {
        cluster_id: id,
        exterior,
        cell_count: members.len(),
        area_km2,
    })
}

/// A named area made of one or more rings under the even-odd rule.
/// Ring coordinates are `(lon, lat)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub name: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl Region {
    pub fn from_rings(name: &str, rings: Vec<Vec<(f64, f64)>>) -> Self {
        Region { name: name.to_string(), rings }
    }

    pub fn from_polygon(p: &BoundaryPolygon) -> Self {
        Region {
            name: format!("cluster-{}", p.cluster_id),
            rings: vec![p.exterior.iter().map(|g| (g.lon(), g.lat())).collect()],
        }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.contains_lonlat(p.lon(), p.lat())
    }

    fn contains_lonlat(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let n = ring.len();
            if n < 3 {
                continue;
            }
            let mut j = n - 1;
            for i in 0..n {
                let (xi, yi) = ring[i];
                let (xj, yj) = ring[j];
                if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                    inside = !inside;
                }
                j = i;
            }
        }
        inside
    }

    fn bbox(&self) -> Option<(f64, f64, f64, f64)> {
        let mut it = self.rings.iter().flatten();
        let &(x, y) = it.next()?;
        Some(it.fold((x, y, x, y), |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y))))
    }

    /// Planar shoelace area in squared degrees, even-odd signed per ring.
    fn planar_area(&self) -> f64 {
        self.rings
            .iter()
            .map(|ring| {
                let n = ring.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (ring[i], ring[(i + 1) % n]);
                        a.0 * b.1 - b.0 * a.1
                    })
                    .sum::<f64>()
                    .abs()
                    / 2.0
            })
            .sum()
    }
}

/// Rasterized intersection-over-union on a grid of `resolution / 8` anchored at
/// the lower-left corner of the two shapes' combined extent.
pub fn region_iou(a: &Region, b: &Region, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!("resolution must be > 0, got {resolution}")));
    }
    for r in [a, b] {
        if r.planar_area() <= 0.0 {
            return Err(Error::DegeneratePolygon(format!("`{}` has zero area", r.name)));
        }
    }
    let (ba, bb) = (a.bbox().unwrap(), b.bbox().unwrap());
    if ba.2 < bb.0 || bb.2 < ba.0 || ba.3 < bb.1 || bb.3 < ba.1 {
        return Ok(0.0);
    }
    let (x0, y0) = (ba.0.min(bb.0), ba.1.min(bb.1));
    let (x1, y1) = (ba.2.max(bb.2), ba.3.max(bb.3));
    let step = resolution / 8.0;
    let nx = ((x1 - x0) / step - 1e-9).ceil().max(1.0) as usize;
    let ny = ((y1 - y0) / step - 1e-9).ceil().max(1.0) as usize;
    let (mut inter, mut union) = (0u64, 0u64);
    for iy in 0..ny {
        let y = y0 + (iy as f64 + 0.5) * step;
        for ix in 0..nx {
            let x = x0 + (ix as f64 + 0.5) * step;
            let (ia, ib) = (a.contains_lonlat(x, y), b.contains_lonlat(x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        return Err(Error::DegeneratePolygon("shapes smaller than one comparison cell".into()));
    }
    Ok(inter as f64 / union as f64)
}

pub fn boundary_iou(a: &BoundaryPolygon, b: &BoundaryPolygon, resolution: f64) -> Result<f64> {
    region_iou(&Region::from_polygon(a), &Region::from_polygon(b), resolution)
}
