//! Intersection/split-edge road graph.
//!
//! Vertices are road intersections (shared nodes, way endpoints, repeated
//! nodes). Every edge is a maximal piece of one way between two vertices and
//! keeps the intermediate shape points as its geometry.

mod build;
pub mod table;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use build::{
    build_road_graph, clean_graph, clean_graph_with_report, detect_intersections, split_ways,
    BuildConfig, BuildOutput, BuildReport, CleanConfig, CleanReport, GraphTotals,
};

use crate::error::{Error, Result};
use crate::geo::{polyline_length, GeoPoint};
use crate::ingest::{RoadClass, Tags};

pub type VertexId = i64;
pub type EdgeId = u64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Vertex {
    pub id: VertexId,
    pub location: GeoPoint,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitEdge {
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    pub geometry: Vec<GeoPoint>,
    pub length_m: f64,
    pub road_class: RoadClass,
    pub oneway: bool,
    pub lanes: u32,
    pub source_way: i64,
    pub tags: Tags,
}

impl SplitEdge {
    /// Point halfway along the polyline.
    pub fn midpoint(&self) -> GeoPoint {
        let half = self.length_m / 2.0;
        let mut walked = 0.0;
        for w in self.geometry.windows(2) {
            let seg = crate::geo::haversine_distance(w[0], w[1]);
            if walked + seg >= half && seg > 0.0 {
                let t = (half - walked) / seg;
                let lat = w[0].lat() + t * (w[1].lat() - w[0].lat());
                let lon = w[0].lon() + t * (w[1].lon() - w[0].lon());
                return GeoPoint::new(lat, lon).unwrap_or(w[0]);
            }
            walked += seg;
        }
        self.geometry[0]
    }

    /// Maximum speed from the `maxspeed` tag in km/h, if present and parseable.
    pub fn max_speed_kmh(&self) -> Option<f64> {
        let raw = self.tags.get("maxspeed")?.trim();
        if let Some(mph) = raw.strip_suffix("mph") {
            return mph.trim().parse::<f64>().ok().map(|v| v * 1.609_344);
        }
        raw.trim_end_matches("km/h").trim().parse::<f64>().ok().filter(|v| *v > 0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoadGraph {
    vertices: BTreeMap<VertexId, Vertex>,
    edges: BTreeMap<EdgeId, SplitEdge>,
    adjacency: BTreeMap<VertexId, Vec<EdgeId>>,
}

impl RoadGraph {
    /// Derives vertices and adjacency from edge endpoints.
    pub fn from_edges<I: IntoIterator<Item = SplitEdge>>(edges: I) -> Result<Self> {
        let mut g = RoadGraph::default();
        for e in edges {
            if e.geometry.len() < 2 {
                return Err(Error::Invariant(format!("edge {} has fewer than 2 points", e.id)));
            }
            let ends = [(e.from, e.geometry[0]), (e.to, *e.geometry.last().unwrap())];
            for (vid, loc) in ends {
                let v = g.vertices.entry(vid).or_insert(Vertex { id: vid, location: loc, degree: 0 });
                if v.location != loc {
                    return Err(Error::Invariant(format!(
                        "vertex {vid} located at both {:?} and {:?}",
                        v.location, loc
                    )));
                }
                v.degree += 1;
                g.adjacency.entry(vid).or_default().push(e.id);
            }
            if g.edges.insert(e.id, e).is_some() {
                return Err(Error::Invariant("duplicate edge id".into()));
            }
        }
        for list in g.adjacency.values_mut() {
            list.sort_unstable();
        }
        Ok(g)
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.vertices.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&SplitEdge> {
        self.edges.get(&id)
    }

    /// Vertices in ascending id order.
    pub fn vertices(&self) -> impl ExactSizeIterator<Item = &Vertex> {
        self.vertices.values()
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> impl ExactSizeIterator<Item = &SplitEdge> {
        self.edges.values()
    }

    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        self.adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn total_length_m(&self) -> f64 {
        self.edges.values().map(|e| e.length_m).sum()
    }

    /// `(id, location)` pairs in id order, the input for spatial indices.
    pub fn vertex_points(&self) -> Vec<(VertexId, GeoPoint)> {
        self.vertices.values().map(|v| (v.id, v.location)).collect()
    }

    /// Checks every structural invariant; used by tests and the CLI after loading.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        let mut seen_keys = BTreeSet::new();
        for e in self.edges.values() {
            let (Some(a), Some(b)) = (self.vertices.get(&e.from), self.vertices.get(&e.to)) else {
                return fail(format!("edge {} references a missing vertex", e.id));
            };
            if e.from == e.to {
                return fail(format!("edge {} starts and ends at vertex {}", e.id, e.from));
            }
            if e.geometry.len() < 2 || e.geometry[0] != a.location || *e.geometry.last().unwrap() != b.location {
                return fail(format!("edge {} geometry does not meet its endpoints", e.id));
            }
            let len = polyline_length(&e.geometry)?;
            if (len - e.length_m).abs() > 1e-9 * len.max(1.0) {
                return fail(format!("edge {} length {} != geometry length {}", e.id, e.length_m, len));
            }
            for v in [e.from, e.to] {
                if self.incident_edges(v).binary_search(&e.id).is_err() {
                    return fail(format!("adjacency of {v} misses edge {}", e.id));
                }
            }
            if !seen_keys.insert((e.from, e.to, e.geometry.clone())) {
                return fail(format!("edge {} duplicates another edge", e.id));
            }
        }
        for (v, list) in &self.adjacency {
            let Some(vertex) = self.vertices.get(v) else {
                return fail(format!("adjacency lists unknown vertex {v}"));
            };
            if vertex.degree != list.len() || vertex.degree == 0 {
                return fail(format!("vertex {v} degree {} vs {} incident", vertex.degree, list.len()));
            }
            for eid in list {
                match self.edges.get(eid) {
                    Some(e) if e.from == *v || e.to == *v => {}
                    _ => return fail(format!("adjacency of {v} lists non-incident edge {eid}")),
                }
            }
        }
        if self.adjacency.len() != self.vertices.len() {
            return fail("isolated vertex without incident edges".into());
        }
        Ok(())
    }
}
