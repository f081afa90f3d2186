//! Geodesic primitives: quantized WGS84 points, boxes and spherical distances.
//!
//! Coordinates are stored as integer multiples of 1e-7 degrees, the native
//! resolution of OpenStreetMap, so equality and hashing are exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IUGG mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Meters per degree of arc along a great circle.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

const E7: f64 = 1e7;
const LAT_LIMIT_E7: i64 = 900_000_000;
const LON_LIMIT_E7: i64 = 1_800_000_000;

/// A WGS84 coordinate pair at 1e-7 degree precision.
///
/// Latitude is in `[-90, 90]`, longitude is normalized into `[-180, 180)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat_e7: i32,
    lon_e7: i32,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = Error;
    fn try_from(p: RawPoint) -> Result<Self> {
        GeoPoint::new(p.lat, p.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat(), lon: p.lon() }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidCoordinate(format!("({lat}, {lon}) is not finite")));
        }
        let lat_e7 = (lat * E7).round() as i64;
        if lat_e7.abs() > LAT_LIMIT_E7 {
            return Err(Error::InvalidCoordinate(format!("latitude {lat} outside [-90, 90]")));
        }
        let mut lon_e7 = (lon * E7).round() as i64;
        lon_e7 = (lon_e7 + LON_LIMIT_E7).rem_euclid(2 * LON_LIMIT_E7) - LON_LIMIT_E7;
        Ok(GeoPoint {
            lat_e7: lat_e7 as i32,
            lon_e7: lon_e7 as i32,
        })
    }

    pub fn from_e7(lat_e7: i32, lon_e7: i32) -> Result<Self> {
        GeoPoint::new(lat_e7 as f64 / E7, lon_e7 as f64 / E7)
    }

    pub fn lat(&self) -> f64 {
        self.lat_e7 as f64 / E7
    }

    pub fn lon(&self) -> f64 {
        self.lon_e7 as f64 / E7
    }

    pub fn lat_e7(&self) -> i32 {
        self.lat_e7
    }

    pub fn lon_e7(&self) -> i32 {
        self.lon_e7
    }

    /// Embedding on the unit sphere: `(cos φ cos λ, cos φ sin λ, sin φ)`.
    #[inline(never)]
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sin_lat, cos_lat) = self.lat().to_radians().sin_cos();
        let (sin_lon, cos_lon) = self.lon().to_radians().sin_cos();
        [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat]
    }

    pub(crate) fn trig(&self) -> PointTrig {
        PointTrig::from(*self)
    }
}

impl fmt::Debug for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GeoPoint({:.7}, {:.7})", self.lat(), self.lon())
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.7},{:.7}", self.lat(), self.lon())
    }
}

/// Precomputed trigonometry for repeated distance evaluations.
///
/// [`haversine_distance`] goes through this same path, so distances computed
/// from a cached `PointTrig` are bit-identical to the direct call.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PointTrig {
    pub lat: f64,
    pub lon: f64,
    pub cos_lat: f64,
}

// Kept out of line: if inlined next to a `sin` of the same angle, LLVM may
// fuse the pair into `sincos`, whose cosine can differ in the last bit.
impl From<GeoPoint> for PointTrig {
    #[inline(never)]
    fn from(p: GeoPoint) -> Self {
        let lat = p.lat().to_radians();
        PointTrig {
            lat,
            lon: p.lon().to_radians(),
            cos_lat: lat.cos(),
        }
    }
}

impl PointTrig {
    #[inline]
    pub fn distance(&self, other: &PointTrig) -> f64 {
        let s_lat = ((other.lat - self.lat).abs() * 0.5).sin();
        let s_lon = ((other.lon - self.lon).abs() * 0.5).sin();
        let h = (s_lat * s_lat + (self.cos_lat * other.cos_lat) * (s_lon * s_lon)).min(1.0);
        2.0 * EARTH_RADIUS_M * h.sqrt().asin()
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    a.trig().distance(&b.trig())
}

/// Sum of great-circle distances over consecutive pairs.
pub fn polyline_length(points: &[GeoPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPolyline);
    }
    Ok(points
        .windows(2)
        .map(|w| haversine_distance(w[0], w[1]))
        .sum())
}

/// Chord length on the unit sphere for a great-circle distance in meters.
pub fn chord_for_distance(meters: f64) -> f64 {
    let angle = (meters / EARTH_RADIUS_M).min(std::f64::consts::PI);
    2.0 * (angle * 0.5).sin()
}

/// Closed latitude/longitude rectangle. Boxes crossing the antimeridian are
/// rejected; split them into two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self> {
        let vals = [min_lat, min_lon, max_lat, max_lon];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBBox("non-finite bound".into()));
        }
        if !(-90.0..=90.0).contains(&min_lat) || !(-90.0..=90.0).contains(&max_lat) {
            return Err(Error::InvalidBBox("latitude outside [-90, 90]".into()));
        }
        if !(-180.0..=180.0).contains(&min_lon) || !(-180.0..=180.0).contains(&max_lon) {
            return Err(Error::InvalidBBox("longitude outside [-180, 180]".into()));
        }
        if min_lat > max_lat {
            return Err(Error::InvalidBBox(format!("min_lat {min_lat} > max_lat {max_lat}")));
        }
        if min_lon > max_lon {
            return Err(Error::InvalidBBox(format!(
                "min_lon {min_lon} > max_lon {max_lon} (antimeridian-crossing boxes must be split)"
            )));
        }
        Ok(BBox { min_lat, min_lon, max_lat, max_lon })
    }

    /// Smallest box covering all points; `None` for an empty iterator.
    pub fn covering<I: IntoIterator<Item = GeoPoint>>(points: I) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min_lat: first.lat(),
            min_lon: first.lon(),
            max_lat: first.lat(),
            max_lon: first.lon(),
        };
        for p in it {
            b.min_lat = b.min_lat.min(p.lat());
            b.max_lat = b.max_lat.max(p.lat());
            b.min_lon = b.min_lon.min(p.lon());
            b.max_lon = b.max_lon.max(p.lon());
        }
        Some(b)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        bbox_contains(self, p)
    }
}

pub fn bbox_contains(b: &BBox, p: GeoPoint) -> bool {
    let (lat, lon) = (p.lat(), p.lon());
    b.min_lat <= lat && lat <= b.max_lat && b.min_lon <= lon && lon <= b.max_lon
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    // Textbook haversine written independently of the cached-trig path.
    fn oracle_haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dp = p2 - p1;
        let dl = (lon2 - lon1).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().atan2((1.0 - a).sqrt())
    }

    #[test]
    fn quantizes_and_normalizes() {
        assert_eq!(pt(10.00000001, 20.0), pt(10.0, 20.0));
        assert_eq!(pt(0.0, 180.0).lon(), -180.0);
        assert_eq!(pt(0.0, 190.0), pt(0.0, -170.0));
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert_eq!(pt(-90.0, 0.0).lat(), -90.0);
    }

    #[test]
    fn haversine_reference_values() {
        assert_eq!(haversine_distance(pt(0.0, 0.0), pt(0.0, 0.0)), 0.0);
        let quarter = haversine_distance(pt(0.0, 0.0), pt(0.0, 90.0));
        let expected = std::f64::consts::FRAC_PI_2 * EARTH_RADIUS_M;
        assert!((quarter - expected).abs() < 1e-6, "{quarter} vs {expected}");
        assert!((quarter - 10_007_557.0).abs() < 1.0);

        let paris = pt(48.8566, 2.3522);
        let london = pt(51.5074, -0.1278);
        let d = haversine_distance(paris, london);
        let oracle = oracle_haversine(48.8566, 2.3522, 51.5074, -0.1278);
        assert!((d - oracle).abs() / oracle < 1e-9);
        assert!((d - 343_500.0).abs() / 343_500.0 < 1e-3, "{d}");
    }

    #[test]
    fn polyline_cases() {
        assert!(matches!(polyline_length(&[]), Err(Error::EmptyPolyline)));
        let p = pt(1.0, 1.0);
        assert_eq!(polyline_length(&[p]).unwrap(), 0.0);
        let (a, b) = (pt(0.0, 0.0), pt(0.0, 1.0));
        assert_eq!(polyline_length(&[a, b]).unwrap(), haversine_distance(a, b));
        let three = polyline_length(&[a, b, pt(0.0, 2.0)]).unwrap();
        let oracle = 2.0 * oracle_haversine(0.0, 0.0, 0.0, 1.0);
        assert!((three - oracle).abs() / oracle < 1e-9);
    }

    #[test]
    fn bbox_validation_and_closed_bounds() {
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 170.0, 1.0, -170.0).is_err());
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        for c in [pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 0.0), pt(1.0, 1.0)] {
            assert!(bbox_contains(&b, c));
        }
        assert!(!bbox_contains(&b, pt(1.000001, 0.5)));
        assert!(!bbox_contains(&b, pt(0.5, -0.000001)));
    }

    #[test]
    fn bbox_matches_direct_comparison() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b = BBox::new(-0.5, -0.25, 0.75, 0.5).unwrap();
        for _ in 0..1000 {
            let p = pt(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let direct = p.lat() >= -0.5 && p.lat() <= 0.75 && p.lon() >= -0.25 && p.lon() <= 0.5;
            assert_eq!(bbox_contains(&b, p), direct);
        }
    }

    #[test]
    fn chord_is_monotone_in_distance() {
        let mut prev = -1.0;
        for i in 0..1000 {
            let c = chord_for_distance(i as f64 * 20_000.0);
            assert!(c >= prev);
            prev = c;
        }
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..180.0).prop_map(|(a, b)| pt(a, b))
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in arb_point(), b in arb_point()) {
            prop_assert_eq!(haversine_distance(a, b), haversine_distance(b, a));
            prop_assert_eq!(haversine_distance(a, b) == 0.0, a == b);
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = haversine_distance(a, b);
            let bc = haversine_distance(b, c);
            let ac = haversine_distance(a, c);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn polyline_reverse_invariant(pts in prop::collection::vec(arb_point(), 1..20)) {
            let fwd = polyline_length(&pts).unwrap();
            let mut rev = pts.clone();
            rev.reverse();
            let back = polyline_length(&rev).unwrap();
            prop_assert!((fwd - back).abs() <= 1e-9 * fwd.max(1.0));
        }

        #[test]
        fn chord_order_matches_haversine_order(q in arb_point(), a in arb_point(), b in arb_point()) {
            let chord = |p: GeoPoint| {
                let (u, v) = (q.unit_vector(), p.unit_vector());
                ((u[0]-v[0]).powi(2) + (u[1]-v[1]).powi(2) + (u[2]-v[2]).powi(2)).sqrt()
            };
            let (da, db) = (haversine_distance(q, a), haversine_distance(q, b));
            // Only compare pairs separated beyond floating-point noise.
            if (da - db).abs() > 1e-3 {
                prop_assert_eq!(da < db, chord(a) < chord(b));
            }
        }
    }
}
