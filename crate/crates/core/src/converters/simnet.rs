use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::routing::{arc_key, Arc, Router};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, RoadGraph, VertexId};
use crate::ingest::RoadClass;

pub const SIMNET_SCHEMA: &str = "simnet/1";
pub const PHASE_DURATION_S: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectedRoad {
    /// `2 * edge_id`, plus one for the backward direction.
    pub id: u64,
    pub edge_id: EdgeId,
    pub direction: Direction,
    pub from: VertexId,
    pub to: VertexId,
    pub lanes: u32,
    pub length_m: f64,
    pub speed_limit_kmh: f64,
    pub road_class: RoadClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    /// Incoming road that has green during this phase.
    pub green: u64,
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: VertexId,
    pub lat: f64,
    pub lon: f64,
    pub incoming: Vec<u64>,
    pub outgoing: Vec<u64>,
    pub incoming_lanes: u32,
    pub outgoing_lanes: u32,
    pub signalized: bool,
    pub phases: Vec<Phase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimNetwork {
    pub schema: String,
    pub intersections: Vec<Intersection>,
    pub roads: Vec<DirectedRoad>,
}

/// Default speed for a class in km/h.
pub fn default_speed_kmh(class: RoadClass) -> f64 {
    match class {
        RoadClass::Motorway => 120.0,
        RoadClass::Trunk => 100.0,
        RoadClass::Primary => 80.0,
        RoadClass::Secondary => 60.0,
        RoadClass::Tertiary => 50.0,
        _ => 40.0,
    }
}

/// Lanes per direction: oneway roads keep all lanes, two-way roads split
/// them with the extra lane forward and at least one each way.
pub fn split_lanes(lanes: u32, oneway: bool) -> (u32, u32) {
    if oneway {
        (lanes.max(1), 0)
    } else {
        (lanes.div_ceil(2).max(1), (lanes / 2).max(1))
    }
}

pub fn export_simnet(graph: &RoadGraph) -> SimNetwork {
    let mut roads = Vec::new();
    for e in graph.edges() {
        let speed = e.max_speed_kmh().unwrap_or_else(|| default_speed_kmh(e.road_class));
        let (fwd, bwd) = split_lanes(e.lanes, e.oneway);
        let mut push = |backward: bool, lanes: u32| {
            let (from, to) = if backward { (e.to, e.from) } else { (e.from, e.to) };
            roads.push(DirectedRoad {
                id: arc_key(e.id, backward),
                edge_id: e.id,
                direction: if backward { Direction::Backward } else { Direction::Forward },
                from,
                to,
                lanes,
                length_m: e.length_m,
                speed_limit_kmh: speed,
                road_class: e.road_class,
            });
        };
        push(false, fwd);
        if !e.oneway {
            push(true, bwd);
        }
    }

    let mut incoming: BTreeMap<VertexId, Vec<&DirectedRoad>> = BTreeMap::new();
    let mut outgoing: BTreeMap<VertexId, Vec<&DirectedRoad>> = BTreeMap::new();
    for r in &roads {
        incoming.entry(r.to).or_default().push(r);
        outgoing.entry(r.from).or_default().push(r);
    }
    let intersections = graph
        .vertices()
        .map(|v| {
            let inc = incoming.get(&v.id).map(Vec::as_slice).unwrap_or(&[]);
            let out = outgoing.get(&v.id).map(Vec::as_slice).unwrap_or(&[]);
            let signalized = v.degree >= 3 && inc.len() >= 2;
            Intersection {
                id: v.id,
                lat: v.location.lat(),
                lon: v.location.lon(),
                incoming: inc.iter().map(|r| r.id).collect(),
                outgoing: out.iter().map(|r| r.id).collect(),
                incoming_lanes: inc.iter().map(|r| r.lanes).sum(),
                outgoing_lanes: out.iter().map(|r| r.lanes).sum(),
                signalized,
                phases: if signalized {
                    inc.iter().map(|r| Phase { green: r.id, duration_s: PHASE_DURATION_S }).collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect();
    SimNetwork { schema: SIMNET_SCHEMA.to_string(), intersections, roads }
}

impl SimNetwork {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: SimNetwork = serde_json::from_str(text)?;
        if net.schema != SIMNET_SCHEMA {
            return Err(Error::Malformed(format!("unsupported schema `{}`", net.schema)));
        }
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let known: BTreeMap<VertexId, &Intersection> = self.intersections.iter().map(|i| (i.id, i)).collect();
        for r in &self.roads {
            for end in [r.from, r.to] {
                if !known.contains_key(&end) {
                    return Err(Error::Invariant(format!("road {} references unknown intersection {end}", r.id)));
                }
            }
        }
        for i in &self.intersections {
            if i.signalized && i.phases.len() < 2 {
                return Err(Error::Invariant(format!("signalized intersection {} has < 2 phases", i.id)));
            }
        }
        Ok(())
    }

    pub fn total_road_length_m(&self) -> f64 {
        self.roads.iter().map(|r| r.length_m).sum()
    }

    /// Routing view over the roads; node slots follow `intersections` order.
    pub fn router(&self) -> Router {
        let slots: BTreeMap<VertexId, usize> =
            self.intersections.iter().enumerate().map(|(i, x)| (x.id, i)).collect();
        let arcs: Vec<Arc> = self
            .roads
            .iter()
            .map(|r| Arc { key: r.id, from: slots[&r.from], to: slots[&r.to], length_m: r.length_m })
            .collect();
        Router::new(self.intersections.len(), arcs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{polyline_length, GeoPoint};
    use crate::graph::SplitEdge;
    use crate::ingest::Tags;
    use std::collections::BTreeSet;

    fn edge(id: u64, from: i64, to: i64, a: (f64, f64), b: (f64, f64), oneway: bool, lanes: u32) -> SplitEdge {
        let g = vec![GeoPoint::new(a.0, a.1).unwrap(), GeoPoint::new(b.0, b.1).unwrap()];
        SplitEdge {
            id,
            from,
            to,
            length_m: polyline_length(&g).unwrap(),
            geometry: g,
            road_class: RoadClass::Primary,
            oneway,
            lanes,
            source_way: id as i64,
            tags: Tags::new(),
        }
    }

    fn cross() -> RoadGraph {
        let c = (0.0, 0.0);
        RoadGraph::from_edges([
            edge(0, 1, 3, (0.0, -0.002), c, false, 2),
            edge(1, 3, 4, c, (0.0, 0.002), false, 3),
            edge(2, 5, 3, (-0.002, 0.0), c, false, 1),
            edge(3, 3, 6, c, (0.002, 0.0), true, 2),
        ])
        .unwrap()
    }

    #[test]
    fn single_edges() {
        let two = export_simnet(&RoadGraph::from_edges([edge(0, 1, 2, (0.0, 0.0), (0.0, 0.01), false, 1)]).unwrap());
        assert_eq!(two.roads.len(), 2);
        assert_eq!((two.roads[0].lanes, two.roads[1].lanes), (1, 1));
        let one = export_simnet(&RoadGraph::from_edges([edge(0, 1, 2, (0.0, 0.0), (0.0, 0.01), true, 3)]).unwrap());
        assert_eq!(one.roads.len(), 1);
        assert_eq!(one.roads[0].lanes, 3);
        assert_eq!(one.roads[0].speed_limit_kmh, 80.0);
    }

    #[test]
    fn lane_split() {
        assert_eq!(split_lanes(1, false), (1, 1));
        assert_eq!(split_lanes(3, false), (2, 1));
        assert_eq!(split_lanes(4, false), (2, 2));
        assert_eq!(split_lanes(0, true), (1, 0));
    }

    #[test]
    fn cross_center_and_round_trip() {
        let g = cross();
        let net = export_simnet(&g);
        let center = net.intersections.iter().find(|i| i.id == 3).unwrap();
        assert!(center.signalized);
        // Edge 3 is oneway away from the center, so three approaches.
        assert_eq!(center.phases.len(), 3);
        assert!(center.phases.iter().all(|p| p.duration_s == 30.0));
        let reloaded = SimNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(reloaded, net);
        // Directed adjacency from the graph equals the one carried by the export.
        let from_graph: BTreeSet<(i64, i64, u64)> = g
            .edges()
            .flat_map(|e| {
                let mut v = vec![(e.from, e.to, e.id)];
                if !e.oneway {
                    v.push((e.to, e.from, e.id));
                }
                v
            })
            .collect();
        let from_net: BTreeSet<(i64, i64, u64)> = reloaded.roads.iter().map(|r| (r.from, r.to, r.edge_id)).collect();
        assert_eq!(from_graph, from_net);
        let expected: f64 = g.edges().map(|e| e.length_m * if e.oneway { 1.0 } else { 2.0 }).sum();
        assert!((net.total_road_length_m() - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn full_cross_has_four_phases() {
        let mut edges: Vec<SplitEdge> = cross().edges().cloned().collect();
        edges[3].oneway = false;
        let net = export_simnet(&RoadGraph::from_edges(edges).unwrap());
        assert_eq!(net.intersections.iter().find(|i| i.id == 3).unwrap().phases.len(), 4);
    }

    #[test]
    fn maxspeed_overrides_class() {
        let mut e = edge(0, 1, 2, (0.0, 0.0), (0.0, 0.01), false, 1);
        e.tags.insert("maxspeed".into(), "30 mph".into());
        let net = export_simnet(&RoadGraph::from_edges([e]).unwrap());
        assert!((net.roads[0].speed_limit_kmh - 48.28032).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_schema() {
        let mut net = export_simnet(&cross());
        net.schema = "simnet/0".into();
        assert!(SimNetwork::from_json(&net.to_json().unwrap()).is_err());
    }
}
