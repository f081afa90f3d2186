use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simnet::SimNetwork;
use crate::error::{Error, Result};
use crate::graph::VertexId;

pub const DEMAND_SCHEMA: &str = "demand/1";
pub const MAX_OD_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: usize,
    pub origin: VertexId,
    pub destination: VertexId,
    pub departure_s: f64,
    /// Directed road ids in travel order.
    pub route: Vec<u64>,
    pub length_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    pub schema: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub trips: Vec<Trip>,
}

impl DemandSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DemandSpec = serde_json::from_str(text)?;
        if spec.schema != DEMAND_SCHEMA {
            return Err(Error::Malformed(format!("unsupported schema `{}`", spec.schema)));
        }
        Ok(spec)
    }
}

/// Uniform random origin/destination trips with shortest-path routes.
///
/// Trip `i` draws from its own ChaCha stream, so output does not depend on
/// how trips are spread across threads. Unroutable pairs are redrawn up to
/// [`MAX_OD_ATTEMPTS`] times.
pub fn generate_demand(net: &SimNetwork, n_trips: usize, horizon_s: f64, seed: u64) -> Result<DemandSpec> {
    if !(horizon_s > 0.0 && horizon_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon_s}")));
    }
    let mut spec = DemandSpec { schema: DEMAND_SCHEMA.to_string(), seed, horizon_s, trips: Vec::new() };
    if n_trips == 0 {
        return Ok(spec);
    }
    let n = net.intersections.len();
    if n < 2 {
        return Err(Error::NoValidOdPair(format!("network has {n} intersection(s)")));
    }
    let router = net.router();
    spec.trips = (0..n_trips)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let departure_s = rng.random_range(0.0..horizon_s);
            for _ in 0..MAX_OD_ATTEMPTS {
                let o = rng.random_range(0..n);
                let d = rng.random_range(0..n);
                if o == d {
                    continue;
                }
                if let Some(route) = router.route(o, d) {
                    return Ok(Trip {
                        id: i,
                        origin: net.intersections[o].id,
                        destination: net.intersections[d].id,
                        departure_s,
                        route: route.arcs,
                        length_m: route.length_m,
                    });
                }
            }
            Err(Error::NoValidOdPair(format!("trip {i}: no routable pair in {MAX_OD_ATTEMPTS} draws")))
        })
        .collect::<Result<_>>()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::converters::simnet::export_simnet;
    use crate::geo::{polyline_length, GeoPoint};
    use crate::graph::{RoadGraph, SplitEdge};
    use crate::ingest::{RoadClass, Tags};
    use std::collections::HashMap;

    fn grid(n: i64) -> RoadGraph {
        let mut edges = Vec::new();
        let id = |r: i64, c: i64| r * n + c;
        let p = |v: i64| GeoPoint::new((v / n) as f64 * 0.001, (v % n) as f64 * 0.001).unwrap();
        for r in 0..n {
            for c in 0..n {
                for (a, b) in [(id(r, c), (c + 1 < n).then(|| id(r, c + 1))), (id(r, c), (r + 1 < n).then(|| id(r + 1, c)))] {
                    if let Some(b) = b {
                        let g = vec![p(a), p(b)];
                        edges.push(SplitEdge {
                            id: edges.len() as u64,
                            from: a,
                            to: b,
                            length_m: polyline_length(&g).unwrap(),
                            geometry: g,
                            road_class: RoadClass::Residential,
                            oneway: (a + b) % 3 == 0,
                            lanes: 1,
                            source_way: a,
                            tags: Tags::new(),
                        });
                    }
                }
            }
        }
        RoadGraph::from_edges(edges).unwrap()
    }

    #[test]
    fn zero_trips_and_bad_horizon() {
        let net = export_simnet(&grid(3));
        assert!(generate_demand(&net, 0, 3600.0, 1).unwrap().trips.is_empty());
        assert!(generate_demand(&net, 5, 0.0, 1).is_err());
        let empty = export_simnet(&RoadGraph::default());
        assert!(matches!(generate_demand(&empty, 1, 10.0, 1), Err(Error::NoValidOdPair(_))));
    }

    #[test]
    fn seeded_and_routes_connected() {
        let net = export_simnet(&grid(6));
        let a = generate_demand(&net, 200, 3600.0, 42).unwrap();
        assert_eq!(a.to_json().unwrap(), generate_demand(&net, 200, 3600.0, 42).unwrap().to_json().unwrap());
        assert_ne!(a, generate_demand(&net, 200, 3600.0, 43).unwrap());
        assert_eq!(DemandSpec::from_json(&a.to_json().unwrap()).unwrap(), a);
        // Independent path check against the road list.
        let roads: HashMap<u64, (i64, i64, f64)> = net.roads.iter().map(|r| (r.id, (r.from, r.to, r.length_m))).collect();
        for t in &a.trips {
            assert!((0.0..3600.0).contains(&t.departure_s));
            assert_ne!(t.origin, t.destination);
            let mut at = t.origin;
            let mut len = 0.0;
            for r in &t.route {
                let (from, to, l) = roads[r];
                assert_eq!(from, at);
                at = to;
                len += l;
            }
            assert_eq!(at, t.destination);
            assert_eq!(len, t.length_m);
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let net = export_simnet(&grid(5));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_demand(&net, 100, 900.0, 7)).unwrap();
        let b = four.install(|| generate_demand(&net, 100, 900.0, 7)).unwrap();
        assert_eq!(a, b);
    }
}
