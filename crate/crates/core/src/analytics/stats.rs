use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::boundary::Region;
use crate::graph::{GraphTotals, RoadGraph};
use crate::ingest::RoadClass;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub length_km: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub vertex_count: usize,
    pub split_edge_count: usize,
    pub length_km: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub vertex_count: usize,
    pub split_edge_count: usize,
    pub way_count: usize,
    pub total_length_km: f64,
    pub per_class: BTreeMap<RoadClass, ClassStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_region: Option<BTreeMap<String, RegionStats>>,
    /// Totals before snapping/dedup/pruning, when the build report is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_cleaning: Option<GraphTotals>,
}

pub fn compute_stats(graph: &RoadGraph) -> StatsReport {
    let mut per_class: BTreeMap<RoadClass, ClassStats> = BTreeMap::new();
    let mut ways = BTreeSet::new();
    let mut total_m = 0.0;
    for e in graph.edges() {
        let c = per_class.entry(e.road_class).or_default();
        c.count += 1;
        c.length_km += e.length_m / 1000.0;
        ways.insert(e.source_way);
        total_m += e.length_m;
    }
    StatsReport {
        vertex_count: graph.vertex_count(),
        split_edge_count: graph.edge_count(),
        way_count: ways.len(),
        total_length_km: total_m / 1000.0,
        per_class,
        per_region: None,
        pre_cleaning: None,
    }
}

/// Vertices count toward every region containing them; an edge belongs to
/// the regions containing its midpoint along the polyline.
pub fn compute_region_stats(graph: &RoadGraph, regions: &[Region]) -> BTreeMap<String, RegionStats> {
    let mut out: BTreeMap<String, RegionStats> = regions
        .iter()
        .map(|r| (r.name.clone(), RegionStats::default()))
        .collect();
    for v in graph.vertices() {
        for r in regions.iter().filter(|r| r.contains(v.location)) {
            out.get_mut(&r.name).unwrap().vertex_count += 1;
        }
    }
    for e in graph.edges() {
        let mid = e.midpoint();
        for r in regions.iter().filter(|r| r.contains(mid)) {
            let s = out.get_mut(&r.name).unwrap();
            s.split_edge_count += 1;
            s.length_km += e.length_m / 1000.0;
        }
    }
    out
}
