use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde::{Deserialize, Serialize};

use super::{region_iou, BoundaryPolygon, Region};
use crate::error::{Error, Result};

/// One Feature per cluster with `cluster_id`, `cell_count` and `area_km2`.
pub fn polygons_to_geojson(polygons: &[BoundaryPolygon]) -> FeatureCollection {
    let features = polygons
        .iter()
        .map(|p| {
            let ring: Vec<Vec<f64>> = p.exterior.iter().map(|g| vec![g.lon(), g.lat()]).collect();
            let mut props = JsonObject::new();
            props.insert("cluster_id".into(), p.cluster_id.into());
            props.insert("cell_count".into(), p.cell_count.into());
            props.insert("area_km2".into(), p.area_km2.into());
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(Value::Polygon(vec![ring]))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    FeatureCollection { bbox: None, features, foreign_members: None }
}

/// Reads named Polygon / MultiPolygon features. Every ring, outer or inner,
/// goes into one even-odd region per feature.
pub fn read_regions_geojson(text: &str) -> Result<Vec<Region>> {
    let gj: GeoJson = text.parse()?;
    let features = match gj {
        GeoJson::FeatureCollection(fc) => fc.features,
        GeoJson::Feature(f) => vec![f],
        GeoJson::Geometry(_) => {
            return Err(Error::Malformed("boundary file must contain features with a `name` property".into()))
        }
    };
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.into_iter().enumerate() {
        let name = f
            .property("name")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Malformed(format!("feature {i} has no string `name` property")))?
            .to_string();
        let polys = match f.geometry.map(|g| g.value) {
            Some(Value::Polygon(p)) => vec![p],
            Some(Value::MultiPolygon(mp)) => mp,
            _ => return Err(Error::Malformed(format!("feature `{name}` is not a Polygon or MultiPolygon"))),
        };
        let rings = polys
            .into_iter()
            .flatten()
            .map(|ring| ring.into_iter().map(|c| (c[0], c[1])).collect())
            .collect();
        out.push(Region::from_rings(&name, rings));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub region_name: String,
    /// Cluster with the highest IoU; `None` if nothing overlaps.
    pub best_cluster: Option<u32>,
    pub iou: f64,
}

/// Matches each region with its highest-IoU cluster; ties go to the lower id.
pub fn compare_with_regions(
    regions: &[Region],
    polygons: &[BoundaryPolygon],
    resolution: f64,
) -> Result<Vec<RegionComparison>> {
    let clusters: Vec<(u32, Region)> = polygons.iter().map(|p| (p.cluster_id, Region::from_polygon(p))).collect();
    regions
        .iter()
        .map(|region| {
            let mut best: Option<(u32, f64)> = None;
            for (id, c) in &clusters {
                let iou = region_iou(region, c, resolution)?;
                if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((*id, iou));
                }
            }
            Ok(RegionComparison {
                region_name: region.name.clone(),
                best_cluster: best.map(|b| b.0),
                iou: best.map_or(0.0, |b| b.1),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{cluster_dense_cells, polygonize, DensityRaster};
    use crate::geo::BBox;

    fn two_blocks() -> Vec<BoundaryPolygon> {
        let mut r = DensityRaster::zeros(&BBox::new(0.0, 0.0, 0.05, 0.1).unwrap(), 0.01).unwrap();
        for (row, col) in [(1, 1), (1, 2), (2, 1), (2, 2), (1, 6), (2, 6)] {
            r.set(row, col, 3.0);
        }
        polygonize(&cluster_dense_cells(&r, 1.0).unwrap(), &r).unwrap()
    }

    #[test]
    fn feature_collection_round_trip() {
        let polys = two_blocks();
        let fc = polygons_to_geojson(&polys);
        assert_eq!(fc.features.len(), 2);
        let text = fc.to_string();
        let mut with_names: serde_json::Value = serde_json::from_str(&text).unwrap();
        for (i, f) in with_names["features"].as_array_mut().unwrap().iter_mut().enumerate() {
            f["properties"]["name"] = format!("city{i}").into();
        }
        let regions = read_regions_geojson(&with_names.to_string()).unwrap();
        assert_eq!(regions[1].name, "city1");
        let cmp = compare_with_regions(&regions, &polys, 0.01).unwrap();
        assert_eq!(cmp[0].best_cluster, Some(1));
        assert_eq!(cmp[1].best_cluster, Some(2));
        assert!(cmp.iter().all(|c| c.iou == 1.0));
    }

    #[test]
    fn multipolygon_and_missing_name() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"split"},"geometry":{"type":"MultiPolygon","coordinates":[
              [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
              [[[5,5],[6,5],[6,6],[5,6],[5,5]]]]}}]}"#;
        let r = read_regions_geojson(text).unwrap();
        assert_eq!(r[0].rings.len(), 2);
        assert!(r[0].contains(crate::geo::GeoPoint::new(5.5, 5.5).unwrap()));
        assert!(!r[0].contains(crate::geo::GeoPoint::new(3.0, 3.0).unwrap()));
        let bad = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
        assert!(matches!(read_regions_geojson(bad), Err(Error::Malformed(_))));
    }

    #[test]
    fn unmatched_region() {
        let far = Region::from_rings("far", vec![vec![(50.0, 50.0), (51.0, 50.0), (51.0, 51.0), (50.0, 50.0)]]);
        let cmp = compare_with_regions(&[far], &two_blocks(), 0.01).unwrap();
        assert_eq!(cmp[0].best_cluster, None);
        assert_eq!(cmp[0].iou, 0.0);
    }
}
