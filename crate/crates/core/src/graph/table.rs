//! Canonical CSV tables for a [`RoadGraph`]: `vertices.csv` and `split_edges.csv`.
//!
//! Rows are sorted by id, coordinates are written at 1e-7 degrees and edge
//! geometry is a WKT `LINESTRING` in lon/lat order. Loading recomputes edge
//! lengths from geometry, so write→read→write is a fixpoint.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{RoadGraph, SplitEdge};
use crate::error::{Error, Result};
use crate::geo::{polyline_length, GeoPoint};
use crate::ingest::{RoadClass, Tags};

pub const VERTEX_HEADER: [&str; 4] = ["id", "lat", "lon", "degree"];
pub const EDGE_HEADER: [&str; 10] = [
    "id", "from", "to", "length_m", "class", "oneway", "lanes", "source_way", "maxspeed", "geometry",
];

pub fn write_vertices_csv<W: Write>(graph: &RoadGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERTEX_HEADER)?;
    for v in graph.vertices() {
        w.write_record([
            v.id.to_string(),
            format!("{:.7}", v.location.lat()),
            format!("{:.7}", v.location.lon()),
            v.degree.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv<W: Write>(graph: &RoadGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDGE_HEADER)?;
    for e in graph.edges() {
        w.write_record([
            e.id.to_string(),
            e.from.to_string(),
            e.to.to_string(),
            format!("{:.3}", e.length_m),
            e.road_class.to_string(),
            e.oneway.to_string(),
            e.lanes.to_string(),
            e.source_way.to_string(),
            e.tags.get("maxspeed").cloned().unwrap_or_default(),
            to_wkt(&e.geometry),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_wkt(points: &[GeoPoint]) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|p| format!("{:.7} {:.7}", p.lon(), p.lat()))
        .collect();
    format!("LINESTRING ({})", coords.join(", "))
}

pub fn parse_wkt(text: &str) -> Result<Vec<GeoPoint>> {
    let body = text
        .trim()
        .strip_prefix("LINESTRING")
        .map(str::trim)
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Malformed(format!("not a WKT LINESTRING: `{text}`")))?;
    body.split(',')
        .map(|pair| {
            let mut it = pair.split_whitespace();
            let (Some(lon), Some(lat), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Malformed(format!("bad WKT coordinate `{pair}`")));
            };
            let lon: f64 = lon.parse().map_err(|_| Error::Malformed(format!("bad longitude `{lon}`")))?;
            let lat: f64 = lat.parse().map_err(|_| Error::Malformed(format!("bad latitude `{lat}`")))?;
            GeoPoint::new(lat, lon)
        })
        .collect()
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    rec.get(idx)
        .ok_or_else(|| Error::Malformed(format!("missing column `{name}`")))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = field(rec, idx, name)?;
    raw.parse()
        .map_err(|_| Error::Malformed(format!("column `{name}` has invalid value `{raw}`")))
}

fn check_header(rec: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if rec.iter().ne(expected.iter().copied()) {
        return Err(Error::Malformed(format!(
            "unexpected header {:?}, expected {:?}",
            rec.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    Ok(())
}

/// Loads both tables and checks them against each other.
pub fn read_graph_csv<V: Read, E: Read>(vertices: V, edges: E) -> Result<RoadGraph> {
    let mut vr = csv::Reader::from_reader(vertices);
    check_header(vr.headers()?, &VERTEX_HEADER)?;
    let mut declared = BTreeMap::new();
    for rec in vr.records() {
        let rec = rec?;
        let id: i64 = parse_field(&rec, 0, "id")?;
        let lat: f64 = parse_field(&rec, 1, "lat")?;
        let lon: f64 = parse_field(&rec, 2, "lon")?;
        let degree: usize = parse_field(&rec, 3, "degree")?;
        if declared.insert(id, (GeoPoint::new(lat, lon)?, degree)).is_some() {
            return Err(Error::Malformed(format!("duplicate vertex id {id}")));
        }
    }

    let mut er = csv::Reader::from_reader(edges);
    check_header(er.headers()?, &EDGE_HEADER)?;
    let mut edges = Vec::new();
    for rec in er.records() {
        let rec = rec?;
        let road_class: RoadClass = field(&rec, 4, "class")?.parse()?;
        let geometry = parse_wkt(field(&rec, 9, "geometry")?)?;
        let mut tags = Tags::new();
        if road_class != RoadClass::Other {
            tags.insert("highway".into(), road_class.to_string());
        }
        let maxspeed = field(&rec, 8, "maxspeed")?;
        if !maxspeed.is_empty() {
            tags.insert("maxspeed".into(), maxspeed.to_string());
        }
        edges.push(SplitEdge {
            id: parse_field(&rec, 0, "id")?,
            from: parse_field(&rec, 1, "from")?,
            to: parse_field(&rec, 2, "to")?,
            length_m: polyline_length(&geometry)?,
            geometry,
            road_class,
            oneway: parse_field(&rec, 5, "oneway")?,
            lanes: parse_field(&rec, 6, "lanes")?,
            source_way: parse_field(&rec, 7, "source_way")?,
            tags,
        });
    }

    let graph = RoadGraph::from_edges(edges)?;
    if graph.vertex_count() != declared.len() {
        return Err(Error::Malformed(format!(
            "vertex table has {} rows but edges reference {} vertices",
            declared.len(),
            graph.vertex_count()
        )));
    }
    for v in graph.vertices() {
        match declared.get(&v.id) {
            Some((loc, degree)) if *loc == v.location && *degree == v.degree => {}
            _ => {
                return Err(Error::Malformed(format!(
                    "vertex {} disagrees with the edge table",
                    v.id
                )))
            }
        }
    }
    Ok(graph)
}
