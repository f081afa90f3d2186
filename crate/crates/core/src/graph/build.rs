use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{EdgeId, RoadGraph, SplitEdge, VertexId};
use crate::error::{Error, Result};
use crate::geo::{haversine_distance, polyline_length, GeoPoint, METERS_PER_DEGREE};
use crate::index::GridIndex;
use crate::ingest::{filter_roads, OsmExtract, RawWay, RoadClass};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    /// Vertices closer than this are merged into the smallest id.
    pub snap_radius_m: f64,
    /// Connected components shorter than this in total are dropped.
    pub component_min_length_m: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            snap_radius_m: 5.0,
            component_min_length_m: 100.0,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snap_radius_m >= 0.0 && self.snap_radius_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("snap radius {}", self.snap_radius_m)));
        }
        if !(self.component_min_length_m >= 0.0 && self.component_min_length_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "component minimum length {}",
                self.component_min_length_m
            )));
        }
        Ok(())
    }
}

pub type BuildConfig = CleanConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub merged_vertices: usize,
    pub collapsed_edges: usize,
    pub duplicate_edges: usize,
    pub pruned_components: usize,
    pub pruned_edges: usize,
    pub pruned_length_m: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphTotals {
    pub vertex_count: usize,
    pub split_edge_count: usize,
    pub way_count: usize,
    pub total_length_km: f64,
}

impl GraphTotals {
    fn of_edges<'a, I: IntoIterator<Item = &'a SplitEdge>>(edges: I) -> Self {
        let mut vertices = BTreeSet::new();
        let mut ways = BTreeSet::new();
        let mut count = 0;
        let mut length = 0.0;
        for e in edges {
            vertices.insert(e.from);
            vertices.insert(e.to);
            ways.insert(e.source_way);
            count += 1;
            length += e.length_m;
        }
        GraphTotals {
            vertex_count: vertices.len(),
            split_edge_count: count,
            way_count: ways.len(),
            total_length_km: length / 1000.0,
        }
    }
}

/// Summary of one extract-to-graph run, written next to the graph tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub raw_nodes: usize,
    pub raw_ways: usize,
    pub road_ways: usize,
    pub poi_nodes: usize,
    pub unresolved_refs: usize,
    pub degenerate_ways: usize,
    pub ignored_elements: BTreeMap<String, usize>,
    pub pre_cleaning: GraphTotals,
    pub post_cleaning: GraphTotals,
    pub clean: CleanReport,
    pub config: CleanConfig,
}

#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub graph: RoadGraph,
    pub report: BuildReport,
}

/// Filter, split and clean in one go.
pub fn build_road_graph(extract: &OsmExtract, config: &CleanConfig) -> Result<BuildOutput> {
    config.validate()?;
    let roads = filter_roads(&extract.ways);
    let intersections = detect_intersections(&roads);
    let locations: HashMap<i64, GeoPoint> = extract.nodes.iter().map(|n| (n.id, n.location)).collect();
    let edges = split_ways(&roads, &intersections, &locations)?;
    let pre_cleaning = GraphTotals::of_edges(&edges);
    let (graph, clean) = clean_graph_with_report(edges, config)?;
    let post_cleaning = GraphTotals::of_edges(graph.edges());
    Ok(BuildOutput {
        graph,
        report: BuildReport {
            raw_nodes: extract.nodes.len(),
            raw_ways: extract.ways.len() + extract.unresolved.len() + extract.degenerate_ways.len(),
            road_ways: roads.len(),
            poi_nodes: extract.pois().count(),
            unresolved_refs: extract.unresolved.len(),
            degenerate_ways: extract.degenerate_ways.len(),
            ignored_elements: extract.ignored_elements.clone(),
            pre_cleaning,
            post_cleaning,
            clean,
            config: *config,
        },
    })
}

/// Node ids that are way endpoints, shared by two or more distinct ways, or
/// repeated inside a single way.
///
/// Ways with the same node sequence (in either direction) count once.
pub fn detect_intersections(ways: &[RawWay]) -> BTreeSet<i64> {
    let mut result = BTreeSet::new();
    let mut owners: HashMap<i64, usize> = HashMap::new();
    let mut seen_sequences: HashSet<Vec<i64>> = HashSet::new();
    for way in ways {
        let refs = &way.node_refs;
        let (Some(first), Some(last)) = (refs.first(), refs.last()) else {
            continue;
        };
        result.insert(*first);
        result.insert(*last);
        let reversed: Vec<i64> = refs.iter().rev().copied().collect();
        let canonical = if *refs <= reversed { refs.clone() } else { reversed };
        if !seen_sequences.insert(canonical) {
            continue;
        }
        let mut local = HashSet::new();
        for r in refs {
            if !local.insert(*r) {
                result.insert(*r);
            }
        }
        for r in local {
            *owners.entry(r).or_default() += 1;
        }
    }
    result.extend(owners.into_iter().filter(|(_, n)| *n >= 2).map(|(id, _)| id));
    result
}

enum Direction {
    Both,
    Forward,
    Reverse,
}

fn way_direction(way: &RawWay) -> Direction {
    match way.tags.get("oneway").map(String::as_str) {
        Some("yes" | "true" | "1") => Direction::Forward,
        Some("-1" | "reverse") => Direction::Reverse,
        Some(_) => Direction::Both,
        None if way.tags.get("junction").is_some_and(|j| j == "roundabout") => Direction::Forward,
        None => Direction::Both,
    }
}

fn way_lanes(way: &RawWay) -> u32 {
    way.tags
        .get("lanes")
        .and_then(|l| l.trim().parse::<u32>().ok())
        .filter(|l| *l > 0)
        .unwrap_or(1)
}

/// Cuts every way at its interior intersections. A piece that starts and ends
/// at the same vertex is further split at the shape node closest to half its
/// length; zero-length two-node self loops are discarded.
pub fn split_ways(
    ways: &[RawWay],
    intersections: &BTreeSet<i64>,
    locations: &HashMap<i64, GeoPoint>,
) -> Result<Vec<SplitEdge>> {
    let mut edges = Vec::new();
    let mut next_id: EdgeId = 0;
    for way in ways {
        let points: Vec<GeoPoint> = way
            .node_refs
            .iter()
            .map(|r| {
                locations
                    .get(r)
                    .copied()
                    .ok_or_else(|| Error::Malformed(format!("way {} references unknown node {r}", way.id)))
            })
            .collect::<Result<_>>()?;
        let refs = &way.node_refs;
        if refs.len() < 2 {
            continue;
        }
        let mut cuts = vec![0];
        cuts.extend((1..refs.len() - 1).filter(|&i| intersections.contains(&refs[i])));
        cuts.push(refs.len() - 1);

        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if refs[a] == refs[b] {
                if b - a < 2 {
                    continue;
                }
                let m = loop_split_index(&points[a..=b]) + a;
                pieces.push((a, m));
                pieces.push((m, b));
            } else {
                pieces.push((a, b));
            }
        }

        let road_class = way.road_class().unwrap_or(RoadClass::Other);
        let direction = way_direction(way);
        let lanes = way_lanes(way);
        for (a, b) in pieces {
            let mut geometry = points[a..=b].to_vec();
            let (mut from, mut to) = (refs[a], refs[b]);
            if matches!(direction, Direction::Reverse) {
                geometry.reverse();
                std::mem::swap(&mut from, &mut to);
            }
            let length_m = polyline_length(&geometry)?;
            edges.push(SplitEdge {
                id: next_id,
                from,
                to,
                geometry,
                length_m,
                road_class,
                oneway: !matches!(direction, Direction::Both),
                lanes,
                source_way: way.id,
                tags: way.tags.clone(),
            });
            next_id += 1;
        }
    }
    Ok(edges)
}

/// Interior index whose cumulative length is closest to half the total.
fn loop_split_index(points: &[GeoPoint]) -> usize {
    let mut cumulative = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in points.windows(2) {
        acc += haversine_distance(w[0], w[1]);
        cumulative.push(acc);
    }
    if acc == 0.0 {
        return points.len() / 2;
    }
    let half = acc / 2.0;
    (1..points.len() - 1)
        .min_by(|&i, &j| {
            let (di, dj) = ((cumulative[i] - half).abs(), (cumulative[j] - half).abs());
            di.total_cmp(&dj).then(i.cmp(&j))
        })
        .unwrap_or(points.len() / 2)
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// The smaller root wins so representatives are the minimum member.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn clean_graph(edges: Vec<SplitEdge>, config: &CleanConfig) -> Result<RoadGraph> {
    clean_graph_with_report(edges, config).map(|(g, _)| g)
}

/// Snap nearby vertices, drop duplicate edges, prune short components.
pub fn clean_graph_with_report(mut edges: Vec<SplitEdge>, config: &CleanConfig) -> Result<(RoadGraph, CleanReport)> {
    config.validate()?;
    let mut report = CleanReport::default();
    edges.sort_by_key(|e| e.id);

    let mut endpoints: BTreeMap<VertexId, GeoPoint> = BTreeMap::new();
    for e in &edges {
        for (vid, loc) in [(e.from, e.geometry[0]), (e.to, *e.geometry.last().unwrap())] {
            if *endpoints.entry(vid).or_insert(loc) != loc {
                return Err(Error::Invariant(format!("vertex {vid} has two locations")));
            }
        }
    }

    // Snap.
    let points: Vec<(VertexId, GeoPoint)> = endpoints.iter().map(|(k, v)| (*k, *v)).collect();
    let slot: HashMap<VertexId, usize> = points.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
    let mut sets = DisjointSet::new(points.len());
    if !points.is_empty() {
        let resolution = (2.0 * config.snap_radius_m / METERS_PER_DEGREE).max(1e-4);
        let grid = GridIndex::new(&points, resolution)?;
        for (i, (_, loc)) in points.iter().enumerate() {
            for other in grid.query_radius(*loc, config.snap_radius_m)? {
                sets.union(i, slot[&other]);
            }
        }
    }
    let representative: HashMap<VertexId, (VertexId, GeoPoint)> = points
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let root = sets.find(i);
            (*id, points[root])
        })
        .collect();
    report.merged_vertices = representative.iter().filter(|(id, (rep, _))| *id != rep).count();

    let mut snapped = Vec::with_capacity(edges.len());
    for mut e in edges {
        let (from, from_loc) = representative[&e.from];
        let (to, to_loc) = representative[&e.to];
        if from == to {
            report.collapsed_edges += 1;
            continue;
        }
        if from != e.from || to != e.to {
            e.from = from;
            e.to = to;
            e.geometry[0] = from_loc;
            *e.geometry.last_mut().unwrap() = to_loc;
            e.length_m = polyline_length(&e.geometry)?;
        }
        snapped.push(e);
    }

    // Dedupe.
    let mut seen = HashSet::new();
    let mut unique = Vec::with_capacity(snapped.len());
    for e in snapped {
        let key = if e.oneway || e.from < e.to {
            (e.oneway, e.from, e.to, e.geometry.clone())
        } else {
            let mut rev = e.geometry.clone();
            rev.reverse();
            (e.oneway, e.to, e.from, rev)
        };
        if seen.insert(key) {
            unique.push(e);
        } else {
            report.duplicate_edges += 1;
        }
    }

    // Prune short components.
    let vids: BTreeSet<VertexId> = unique.iter().flat_map(|e| [e.from, e.to]).collect();
    let vslot: HashMap<VertexId, usize> = vids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut comps = DisjointSet::new(vids.len());
    for e in &unique {
        comps.union(vslot[&e.from], vslot[&e.to]);
    }
    let mut comp_length: HashMap<usize, f64> = HashMap::new();
    for e in &unique {
        *comp_length.entry(comps.find(vslot[&e.from])).or_default() += e.length_m;
    }
    report.pruned_components = comp_length
        .values()
        .filter(|len| **len < config.component_min_length_m)
        .count();
    let mut kept = Vec::with_capacity(unique.len());
    for e in unique {
        let root = comps.find(vslot[&e.from]);
        if comp_length[&root] < config.component_min_length_m {
            report.pruned_edges += 1;
            report.pruned_length_m += e.length_m;
        } else {
            kept.push(e);
        }
    }

    let graph = RoadGraph::from_edges(kept)?;
    Ok((graph, report))
}
