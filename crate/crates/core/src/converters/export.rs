use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geo::{polyline_length, GeoPoint};
use crate::graph::table::{write_edges_csv, write_vertices_csv};
use crate::graph::{RoadGraph, SplitEdge};
use crate::ingest::{RoadClass, Tags};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Csv,
    Json,
    GeoJson,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(GraphFormat::Csv),
            "json" => Ok(GraphFormat::Json),
            "geojson" => Ok(GraphFormat::GeoJson),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Files making up one export: `(file name, contents)`.
pub type ExportFiles = Vec<(String, Vec<u8>)>;

#[derive(Serialize, Deserialize)]
struct JsonVertex {
    id: i64,
    lat: f64,
    lon: f64,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonEdge {
    id: u64,
    from: i64,
    to: i64,
    length_m: f64,
    class: RoadClass,
    oneway: bool,
    lanes: u32,
    source_way: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maxspeed: Option<String>,
    /// `[lon, lat]` pairs.
    geometry: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    vertices: Vec<JsonVertex>,
    edges: Vec<JsonEdge>,
}

pub fn export_graph(graph: &RoadGraph, format: GraphFormat) -> Result<ExportFiles> {
    match format {
        GraphFormat::Csv => {
            let (mut v, mut e) = (Vec::new(), Vec::new());
            write_vertices_csv(graph, &mut v)?;
            write_edges_csv(graph, &mut e)?;
            Ok(vec![("vertices.csv".into(), v), ("split_edges.csv".into(), e)])
        }
        GraphFormat::Json => {
            let doc = JsonGraph {
                vertices: graph
                    .vertices()
                    .map(|v| JsonVertex { id: v.id, lat: v.location.lat(), lon: v.location.lon(), degree: v.degree })
                    .collect(),
                edges: graph
                    .edges()
                    .map(|e| JsonEdge {
                        id: e.id,
                        from: e.from,
                        to: e.to,
                        length_m: e.length_m,
                        class: e.road_class,
                        oneway: e.oneway,
                        lanes: e.lanes,
                        source_way: e.source_way,
                        maxspeed: e.tags.get("maxspeed").cloned(),
                        geometry: e.geometry.iter().map(|p| [p.lon(), p.lat()]).collect(),
                    })
                    .collect(),
            };
            Ok(vec![("graph.json".into(), serde_json::to_vec_pretty(&doc)?)])
        }
        GraphFormat::GeoJson => {
            let mut features: Vec<serde_json::Value> = graph
                .vertices()
                .map(|v| {
                    json!({
                        "type": "Feature",
                        "geometry": {"type": "Point", "coordinates": [v.location.lon(), v.location.lat()]},
                        "properties": {"kind": "vertex", "id": v.id, "degree": v.degree},
                    })
                })
                .collect();
            features.extend(graph.edges().map(|e| {
                let coords: Vec<[f64; 2]> = e.geometry.iter().map(|p| [p.lon(), p.lat()]).collect();
                json!({
                    "type": "Feature",
                    "geometry": {"type": "LineString", "coordinates": coords},
                    "properties": {
                        "kind": "edge", "id": e.id, "from": e.from, "to": e.to,
                        "length_m": e.length_m, "class": e.road_class, "oneway": e.oneway,
                        "lanes": e.lanes, "source_way": e.source_way,
                    },
                })
            }));
            let doc = json!({"type": "FeatureCollection", "features": features});
            Ok(vec![("graph.geojson".into(), serde_json::to_vec_pretty(&doc)?)])
        }
    }
}

/// Loads the JSON export. Edge lengths are recomputed from geometry.
pub fn import_graph_json(text: &str) -> Result<RoadGraph> {
    let doc: JsonGraph = serde_json::from_str(text)?;
    let edges = doc
        .edges
        .into_iter()
        .map(|e| {
            let geometry: Vec<GeoPoint> = e.geometry.iter().map(|c| GeoPoint::new(c[1], c[0])).collect::<Result<_>>()?;
            let mut tags = Tags::new();
            tags.insert("highway".into(), e.class.to_string());
            if let Some(m) = e.maxspeed {
                tags.insert("maxspeed".into(), m);
            }
            Ok(SplitEdge {
                id: e.id,
                from: e.from,
                to: e.to,
                length_m: polyline_length(&geometry)?,
                geometry,
                road_class: e.class,
                oneway: e.oneway,
                lanes: e.lanes,
                source_way: e.source_way,
                tags,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = RoadGraph::from_edges(edges)?;
    if graph.vertex_count() != doc.vertices.len() {
        return Err(Error::Malformed(format!(
            "{} vertices listed but edges reference {}",
            doc.vertices.len(),
            graph.vertex_count()
        )));
    }
    for v in &doc.vertices {
        let got = graph.vertex(v.id).ok_or(Error::UnknownVertex(v.id))?;
        if got.location != GeoPoint::new(v.lat, v.lon)? || got.degree != v.degree {
            return Err(Error::Malformed(format!("vertex {} disagrees with its edges", v.id)));
        }
    }
    Ok(graph)
}
