use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::graph::VertexId;
use crate::index::KdIndex;

pub const DEFAULT_MAX_MATCH_DISTANCE_M: f64 = 100.0;
pub const UNMATCHED: &str = "UNMATCHED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub location: GeoPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorAssignment {
    pub sensor_id: String,
    /// Nearest vertex and its distance, or `None` when nothing is close enough.
    pub matched: Option<(VertexId, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorMapping {
    pub max_match_distance_m: f64,
    pub assignments: Vec<SensorAssignment>,
}

impl SensorMapping {
    pub fn matched_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.matched.is_some()).count()
    }

    /// `sensor_id,vertex_id,distance_m`; unmatched rows carry `UNMATCHED` and an empty distance.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sensor_id", "vertex_id", "distance_m"])?;
        for a in &self.assignments {
            match a.matched {
                Some((v, d)) => w.write_record([a.sensor_id.clone(), v.to_string(), format!("{d:.3}")])?,
                None => w.write_record([a.sensor_id.as_str(), UNMATCHED, ""])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct SensorRow {
    sensor_id: String,
    lat: f64,
    lon: f64,
}

/// Reads `sensor_id,lat,lon` rows.
pub fn read_sensors_csv<R: Read>(input: R) -> Result<Vec<Sensor>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: SensorRow = row?;
        out.push(Sensor { id: row.sensor_id, location: GeoPoint::new(row.lat, row.lon)? });
    }
    Ok(out)
}

/// Assigns each sensor to its nearest vertex within `max_distance_m`.
/// Output keeps the input order.
pub fn map_sensors(sensors: &[Sensor], index: &KdIndex, max_distance_m: f64) -> Result<SensorMapping> {
    if !(max_distance_m >= 0.0) {
        return Err(Error::InvalidParameter(format!("max match distance must be >= 0, got {max_distance_m}")));
    }
    let assignments = sensors
        .par_iter()
        .map(|s| {
            let matched = if index.is_empty() {
                None
            } else {
                let n = index.query_nearest(s.location)?;
                (n.distance_m <= max_distance_m).then_some((n.id, n.distance_m))
            };
            Ok(SensorAssignment { sensor_id: s.id.clone(), matched })
        })
        .collect::<Result<_>>()?;
    Ok(SensorMapping { max_match_distance_m: max_distance_m, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn exact_and_far_sensors() {
        let idx = KdIndex::new(&[(1, pt(0.0, 0.0)), (2, pt(0.0, 0.01))]);
        let sensors = vec![
            Sensor { id: "a".into(), location: pt(0.0, 0.01) },
            Sensor { id: "b".into(), location: pt(0.0, 0.0145) },
        ];
        let m = map_sensors(&sensors, &idx, 100.0).unwrap();
        assert_eq!(m.assignments[0].matched, Some((2, 0.0)));
        assert_eq!(m.assignments[1].matched, None);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sensor_id,vertex_id,distance_m\na,2,0.000\nb,UNMATCHED,\n");
        let empty = map_sensors(&sensors, &KdIndex::new(&[]), 100.0).unwrap();
        assert_eq!(empty.matched_count(), 0);
    }

    #[test]
    fn matches_brute_force_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let verts: Vec<(VertexId, GeoPoint)> = (0..2000)
            .map(|i| (i, pt(rng.random_range(40.0..40.2), rng.random_range(-74.2..-74.0))))
            .collect();
        let sensors: Vec<Sensor> = (0..1000)
            .map(|i| Sensor {
                id: format!("s{i}"),
                location: pt(rng.random_range(40.0..40.2), rng.random_range(-74.2..-74.0)),
            })
            .collect();
        let idx = KdIndex::new(&verts);
        let m = map_sensors(&sensors, &idx, 300.0).unwrap();
        for (s, a) in sensors.iter().zip(&m.assignments) {
            let (best, d) = verts
                .iter()
                .map(|(id, p)| (*id, haversine_distance(s.location, *p)))
                .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                .unwrap();
            assert_eq!(a.matched, (d <= 300.0).then_some((best, d)));
        }
        // Re-map sensors placed at their matched vertices.
        let again: Vec<Sensor> = m
            .assignments
            .iter()
            .filter_map(|a| a.matched.map(|(v, _)| Sensor { id: a.sensor_id.clone(), location: verts[v as usize].1 }))
            .collect();
        let m2 = map_sensors(&again, &idx, 300.0).unwrap();
        for (a, b) in m.assignments.iter().filter(|a| a.matched.is_some()).zip(&m2.assignments) {
            assert_eq!(a.matched.unwrap().0, b.matched.unwrap().0);
        }
    }

    #[test]
    fn csv_input() {
        let s = read_sensors_csv("sensor_id,lat,lon\nx1,1.5,2.5\n".as_bytes()).unwrap();
        assert_eq!(s[0].location, pt(1.5, 2.5));
        assert!(read_sensors_csv("sensor_id,lat,lon\nx1,95,2.5\n".as_bytes()).is_err());
    }
}
