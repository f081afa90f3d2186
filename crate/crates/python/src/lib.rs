//! Python bindings: graph building from OSM XML, spatial queries, KDE,
//! routing and the exporters.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use roadnet::analytics::{compute_stats, kde_field, KdeParams};
use roadnet::converters::{export_graph, export_simnet, generate_demand, GraphFormat, GraphRouter};
use roadnet::graph::{build_road_graph, table, CleanConfig, VertexId};
use roadnet::index::DEFAULT_GRID_RESOLUTION;
use roadnet::ingest::{parse_osm_file, parse_osm_xml};
use roadnet::{BBox, GeoPoint, GridIndex, KdIndex};

create_exception!(pyroadnet, RoadnetError, PyException);

fn err(e: roadnet::Error) -> PyErr {
    RoadnetError::new_err(e.to_string())
}

fn point(lat: f64, lon: f64) -> PyResult<GeoPoint> {
    GeoPoint::new(lat, lon).map_err(err)
}

fn json_value<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Great-circle distance in meters.
#[pyfunction]
fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> PyResult<f64> {
    Ok(roadnet::haversine_distance(point(lat1, lon1)?, point(lat2, lon2)?))
}

/// Intersection/split-edge road graph.
#[pyclass(name = "RoadGraph", module = "pyroadnet")]
struct PyRoadGraph {
    graph: roadnet::RoadGraph,
}

#[pymethods]
impl PyRoadGraph {
    /// Build from an OSM XML file.
    #[staticmethod]
    #[pyo3(signature = (path, snap_radius_m=5.0, component_min_length_m=100.0))]
    fn from_osm(path: PathBuf, snap_radius_m: f64, component_min_length_m: f64) -> PyResult<Self> {
        let extract = parse_osm_file(&path).map_err(err)?;
        let config = CleanConfig { snap_radius_m, component_min_length_m };
        Ok(PyRoadGraph { graph: build_road_graph(&extract, &config).map_err(err)?.graph })
    }

    /// Build from OSM XML text.
    #[staticmethod]
    #[pyo3(signature = (xml, snap_radius_m=5.0, component_min_length_m=100.0))]
    fn from_osm_xml(xml: &str, snap_radius_m: f64, component_min_length_m: f64) -> PyResult<Self> {
        let extract = parse_osm_xml(xml.as_bytes()).map_err(err)?;
        let config = CleanConfig { snap_radius_m, component_min_length_m };
        Ok(PyRoadGraph { graph: build_road_graph(&extract, &config).map_err(err)?.graph })
    }

    /// Load `vertices.csv` and `split_edges.csv` from a directory.
    #[staticmethod]
    fn from_csv_dir(dir: PathBuf) -> PyResult<Self> {
        let open = |name: &str| std::fs::File::open(dir.join(name)).map_err(|e| err(e.into()));
        let graph = table::read_graph_csv(open("vertices.csv")?, open("split_edges.csv")?).map_err(err)?;
        Ok(PyRoadGraph { graph })
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    #[getter]
    fn total_length_m(&self) -> f64 {
        self.graph.total_length_m()
    }

    /// `(id, lat, lon, degree)` tuples ordered by id.
    fn vertices(&self) -> Vec<(i64, f64, f64, usize)> {
        self.graph
            .vertices()
            .map(|v| (v.id, v.location.lat(), v.location.lon(), v.degree))
            .collect()
    }

    /// `(id, from, to, length_m, road_class, oneway, lanes)` tuples ordered by id.
    fn edges(&self) -> Vec<(u64, i64, i64, f64, &'static str, bool, u32)> {
        self.graph
            .edges()
            .map(|e| (e.id, e.from, e.to, e.length_m, e.road_class.as_str(), e.oneway, e.lanes))
            .collect()
    }

    /// Edge polyline as `(lat, lon)` pairs.
    fn edge_geometry(&self, edge_id: u64) -> PyResult<Vec<(f64, f64)>> {
        let e = self
            .graph
            .edge(edge_id)
            .ok_or_else(|| RoadnetError::new_err(format!("unknown edge {edge_id}")))?;
        Ok(e.geometry.iter().map(|p| (p.lat(), p.lon())).collect())
    }

    /// Summary statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let text = serde_json::to_string(&compute_stats(&self.graph)).map_err(|e| err(e.into()))?;
        json_value(py, &text)
    }

    /// Gaussian KDE at every vertex, `{vertex_id: density_per_m2}`.
    #[pyo3(signature = (bandwidth_m=500.0, sample_rate=1.0, truncation=Some(4.0), seed=0, grid_resolution=DEFAULT_GRID_RESOLUTION))]
    fn kde(
        &self,
        py: Python<'_>,
        bandwidth_m: f64,
        sample_rate: f64,
        truncation: Option<f64>,
        seed: u64,
        grid_resolution: f64,
    ) -> PyResult<BTreeMap<VertexId, f64>> {
        let params = KdeParams { bandwidth_m, sample_rate, truncation, seed };
        let index = GridIndex::new(&self.graph.vertex_points(), grid_resolution).map_err(err)?;
        py.detach(|| kde_field(&self.graph, &index, &params)).map_err(err)
    }

    /// Shortest path as `(length_m, [edge_id, ...])`, or None if unreachable.
    fn shortest_path(&self, source: VertexId, target: VertexId) -> PyResult<Option<(f64, Vec<u64>)>> {
        let route = GraphRouter::new(&self.graph).shortest_path(source, target).map_err(err)?;
        Ok(route.map(|r| (r.length_m, r.edge_ids())))
    }

    /// Serialized graph as `{file_name: text}`; format is csv, json or geojson.
    fn export(&self, format: &str) -> PyResult<BTreeMap<String, String>> {
        let format: GraphFormat = format.parse().map_err(err)?;
        let files = export_graph(&self.graph, format).map_err(err)?;
        Ok(files
            .into_iter()
            .map(|(name, bytes)| (name, String::from_utf8_lossy(&bytes).into_owned()))
            .collect())
    }

    /// Lane-level simulator network as a dict.
    fn simnet<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_value(py, &export_simnet(&self.graph).to_json().map_err(err)?)
    }

    /// Random OD trips over the simulator network as a dict.
    #[pyo3(signature = (trips=100, horizon_s=3600.0, seed=0))]
    fn demand<'py>(&self, py: Python<'py>, trips: usize, horizon_s: f64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let net = export_simnet(&self.graph);
        let spec = py.detach(|| generate_demand(&net, trips, horizon_s, seed)).map_err(err)?;
        json_value(py, &spec.to_json().map_err(err)?)
    }

    /// Spatial index over the vertices.
    #[pyo3(signature = (grid_resolution=DEFAULT_GRID_RESOLUTION))]
    fn index(&self, grid_resolution: f64) -> PyResult<PySpatialIndex> {
        PySpatialIndex::build(&self.graph.vertex_points(), grid_resolution)
    }

    fn __repr__(&self) -> String {
        format!("RoadGraph(vertices={}, edges={})", self.graph.vertex_count(), self.graph.edge_count())
    }
}

/// Grid index for radius/bbox queries plus a k-d tree for nearest/kNN.
#[pyclass(name = "SpatialIndex", module = "pyroadnet")]
struct PySpatialIndex {
    grid: GridIndex,
    kd: KdIndex,
}

impl PySpatialIndex {
    fn build(points: &[(VertexId, GeoPoint)], resolution: f64) -> PyResult<Self> {
        Ok(PySpatialIndex { grid: GridIndex::new(points, resolution).map_err(err)?, kd: KdIndex::new(points) })
    }
}

#[pymethods]
impl PySpatialIndex {
    /// Index arbitrary `(id, lat, lon)` points.
    #[new]
    #[pyo3(signature = (points, grid_resolution=DEFAULT_GRID_RESOLUTION))]
    fn new(points: Vec<(i64, f64, f64)>, grid_resolution: f64) -> PyResult<Self> {
        let pts = points
            .into_iter()
            .map(|(id, lat, lon)| Ok((id, point(lat, lon)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Self::build(&pts, grid_resolution)
    }

    fn __len__(&self) -> usize {
        self.kd.len()
    }

    /// Ids within `radius_m` meters, sorted by id.
    fn radius(&self, lat: f64, lon: f64, radius_m: f64) -> PyResult<Vec<i64>> {
        self.grid.query_radius(point(lat, lon)?, radius_m).map_err(err)
    }

    /// Ids inside the box, sorted by id.
    fn bbox(&self, min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> PyResult<Vec<i64>> {
        Ok(self.grid.query_bbox(&BBox::new(min_lat, min_lon, max_lat, max_lon).map_err(err)?))
    }

    /// `(id, distance_m)` of the closest point.
    fn nearest(&self, lat: f64, lon: f64) -> PyResult<(i64, f64)> {
        let n = self.kd.query_nearest(point(lat, lon)?).map_err(err)?;
        Ok((n.id, n.distance_m))
    }

    /// `(id, distance_m)` pairs of the k closest points, nearest first.
    fn knn(&self, lat: f64, lon: f64, k: usize) -> PyResult<Vec<(i64, f64)>> {
        let found = self.kd.query_knn(point(lat, lon)?, k).map_err(err)?;
        Ok(found.into_iter().map(|n| (n.id, n.distance_m)).collect())
    }
}

#[pymodule]
fn pyroadnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RoadnetError", m.py().get_type::<RoadnetError>())?;
    m.add_class::<PyRoadGraph>()?;
    m.add_class::<PySpatialIndex>()?;
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    Ok(())
}
