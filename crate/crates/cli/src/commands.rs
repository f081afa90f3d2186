use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use roadnet::analytics::{compute_region_stats, compute_stats, kde_field, KdeParams};
use roadnet::boundary::{
    cluster_dense_cells, compare_with_regions, polygonize, polygons_to_geojson, rasterize, read_regions_geojson,
    RasterMode,
};
use roadnet::converters::{self, generate_demand, map_sensors, read_sensors_csv, GraphFormat, DEFAULT_MAX_MATCH_DISTANCE_M};
use roadnet::graph::table::{read_graph_csv, write_edges_csv, write_vertices_csv};
use roadnet::graph::{build_road_graph, BuildReport, CleanConfig, RoadGraph};
use roadnet::index::DEFAULT_GRID_RESOLUTION;
use roadnet::ingest::parse_osm_file;
use roadnet::{haversine_distance, BBox, GeoPoint, GridIndex, KdIndex, NaiveScan, Neighbor};
use serde_json::json;

use crate::config::{pick, FileConfig};
use crate::failure::Failure;
use crate::{
    BoundaryArgs, Engine, ExportGraphArgs, GenDemandArgs, GraphOut, IngestArgs, KdeArgs, MapSensorsArgs, QueryArgs,
    QueryMode, RasterKind, StatsArgs,
};

pub struct Context {
    pub file: FileConfig,
    pub seed: u64,
}

pub fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::missing_input(path, &e))
}

fn load_graph(dir: &Path) -> Result<RoadGraph, Failure> {
    let v = open_input(&dir.join("vertices.csv"))?;
    let e = open_input(&dir.join("split_edges.csv"))?;
    let graph = read_graph_csv(v, e)?;
    eprintln!("loaded {} vertices, {} split edges", graph.vertex_count(), graph.edge_count());
    Ok(graph)
}

fn out_dir(io: &GraphOut) -> PathBuf {
    io.out.clone().unwrap_or_else(|| io.graph.clone())
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn ingest(ctx: &Context, a: IngestArgs) -> Result<(), Failure> {
    if !a.input.is_file() {
        return Err(Failure::missing_input(&a.input, &"no such file"));
    }
    let defaults = CleanConfig::default();
    let config = CleanConfig {
        snap_radius_m: pick(a.snap_radius, ctx.file.snap_radius_m, defaults.snap_radius_m),
        component_min_length_m: pick(
            a.component_min_length,
            ctx.file.component_min_length_m,
            defaults.component_min_length_m,
        ),
    };
    let extract = parse_osm_file(&a.input)?;
    let out = build_road_graph(&extract, &config)?;
    out.graph.validate()?;

    let mut v = Vec::new();
    write_vertices_csv(&out.graph, &mut v)?;
    let mut e = Vec::new();
    write_edges_csv(&out.graph, &mut e)?;
    let mut pois = csv::Writer::from_writer(Vec::new());
    pois.write_record(["id", "lat", "lon", "category", "value", "name"])?;
    for n in extract.pois() {
        let (cat, val) = ["amenity", "shop", "tourism"]
            .iter()
            .find_map(|k| n.tags.get(*k).map(|v| (*k, v.as_str())))
            .unwrap_or(("", ""));
        pois.write_record([
            n.id.to_string(),
            format!("{:.7}", n.location.lat()),
            format!("{:.7}", n.location.lon()),
            cat.to_string(),
            val.to_string(),
            n.tags.get("name").cloned().unwrap_or_default(),
        ])?;
    }
    let pois = pois.into_inner().map_err(|e| Failure::config(e.to_string()))?;

    write_artifact(&a.out, "vertices.csv", &v)?;
    write_artifact(&a.out, "split_edges.csv", &e)?;
    write_artifact(&a.out, "pois.csv", &pois)?;
    write_artifact(&a.out, "ingest_report.json", &pretty(&out.report)?)?;
    Ok(())
}

pub fn stats(_ctx: &Context, a: StatsArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.io.graph)?;
    let mut report = compute_stats(&graph);
    let report_path = a.io.graph.join("ingest_report.json");
    if let Ok(text) = std::fs::read_to_string(&report_path) {
        let build: BuildReport = serde_json::from_str(&text)?;
        report.pre_cleaning = Some(build.pre_cleaning);
    }
    if let Some(path) = &a.regions {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::missing_input(path, &e))?;
        report.per_region = Some(compute_region_stats(&graph, &read_regions_geojson(&text)?));
    }
    write_artifact(&out_dir(&a.io), "stats.json", &pretty(&report)?)
}

fn parse_bbox(text: &str) -> Result<BBox, Failure> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::config(format!("--bbox: {e}")))?;
    if v.len() != 4 {
        return Err(Failure::config("--bbox needs min_lat,min_lon,max_lat,max_lon".into()));
    }
    Ok(BBox::new(v[0], v[1], v[2], v[3])?)
}

pub fn query(ctx: &Context, a: QueryArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.io.graph)?;
    let points = graph.vertex_points();
    let point = || -> Result<GeoPoint, Failure> {
        match (a.lat, a.lon) {
            (Some(lat), Some(lon)) => Ok(GeoPoint::new(lat, lon)?),
            _ => Err(Failure::config(format!("--lat and --lon are required for {:?} queries", a.mode))),
        }
    };
    let resolution = pick(a.grid_resolution, ctx.file.grid_resolution, DEFAULT_GRID_RESOLUTION);
    let mut w = csv::Writer::from_writer(Vec::new());
    match a.mode {
        QueryMode::Radius => {
            let q = point()?;
            let r = a.radius.ok_or_else(|| Failure::config("--radius is required".into()))?;
            let hits = match a.engine {
                Engine::Indexed => GridIndex::new(&points, resolution)?.query_radius_with_distance(q, r)?,
                Engine::Naive => {
                    if r < 0.0 {
                        return Err(Failure::config(format!("radius must be >= 0, got {r}")));
                    }
                    let mut hits: Vec<Neighbor> = NaiveScan::new(&points)
                        .query_radius(q, r)
                        .into_iter()
                        .map(|id| Neighbor { id, distance_m: haversine_distance(q, graph.vertex(id).unwrap().location) })
                        .collect();
                    hits.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m).then(a.id.cmp(&b.id)));
                    hits
                }
            };
            w.write_record(["vertex_id", "distance_m"])?;
            for n in hits {
                w.write_record([n.id.to_string(), format!("{:.3}", n.distance_m)])?;
            }
        }
        QueryMode::Bbox => {
            let b = parse_bbox(a.bbox.as_deref().ok_or_else(|| Failure::config("--bbox is required".into()))?)?;
            let ids = match a.engine {
                Engine::Indexed => GridIndex::new(&points, resolution)?.query_bbox(&b),
                Engine::Naive => NaiveScan::new(&points).query_bbox(&b),
            };
            w.write_record(["vertex_id", "lat", "lon"])?;
            for id in ids {
                let p = graph.vertex(id).expect("indexed vertex").location;
                w.write_record([id.to_string(), format!("{:.7}", p.lat()), format!("{:.7}", p.lon())])?;
            }
        }
        QueryMode::Nearest | QueryMode::Knn => {
            let q = point()?;
            let k = if a.mode == QueryMode::Nearest { 1 } else { pick(a.k, None, 1) };
            let hits = match a.engine {
                Engine::Indexed => KdIndex::new(&points).query_knn(q, k)?,
                Engine::Naive => NaiveScan::new(&points).query_knn(q, k)?,
            };
            w.write_record(["vertex_id", "distance_m"])?;
            for n in hits {
                w.write_record([n.id.to_string(), format!("{:.3}", n.distance_m)])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
    write_artifact(&out_dir(&a.io), "query.csv", &bytes)
}

fn kde_params(ctx: &Context, a: &KdeArgs) -> KdeParams {
    let d = KdeParams::default();
    let t = pick(a.truncation, ctx.file.truncation, d.truncation.unwrap_or(0.0));
    KdeParams {
        bandwidth_m: pick(a.bandwidth, ctx.file.bandwidth_m, d.bandwidth_m),
        sample_rate: pick(a.sample_rate, ctx.file.sample_rate, d.sample_rate),
        truncation: (t != 0.0).then_some(t),
        seed: ctx.seed,
    }
}

pub fn kde(ctx: &Context, a: KdeArgs) -> Result<(), Failure> {
    let params = kde_params(ctx, &a);
    params.validate()?;
    let graph = load_graph(&a.io.graph)?;
    let resolution = pick(a.grid_resolution, ctx.file.grid_resolution, DEFAULT_GRID_RESOLUTION);
    let index = GridIndex::new(&graph.vertex_points(), resolution)?;
    let field = kde_field(&graph, &index, &params)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vertex_id", "density"])?;
    for (id, f) in field {
        w.write_record([id.to_string(), format!("{f:.9e}")])?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
    write_artifact(&out_dir(&a.io), "kde.csv", &bytes)
}

pub fn boundary(ctx: &Context, a: BoundaryArgs) -> Result<(), Failure> {
    let params = kde_params(ctx, &a.kde);
    let resolution = pick(a.resolution, ctx.file.boundary_resolution, 0.01);
    let mode = match (a.mode, ctx.file.boundary_mode.as_deref()) {
        (Some(m), _) => m,
        (None, None | Some("counts")) => RasterKind::Counts,
        (None, Some("kde")) => RasterKind::Kde,
        (None, Some(other)) => return Err(Failure::config(format!("boundary_mode must be counts or kde, got `{other}`"))),
    };
    let graph = load_graph(&a.kde.io.graph)?;
    let raster_mode = match mode {
        RasterKind::Counts => RasterMode::Counts,
        RasterKind::Kde => RasterMode::Kde(params),
    };
    let extent = match BBox::covering(graph.vertices().map(|v| v.location)) {
        Some(b) => b,
        None => BBox::new(0.0, 0.0, resolution, resolution)?,
    };
    let raster = rasterize(&graph, &extent, resolution, raster_mode)?;
    let threshold = match a.threshold.or(ctx.file.boundary_threshold) {
        Some(t) => Some(t),
        None => raster.default_threshold(),
    };
    let polygons = match threshold {
        Some(t) => polygonize(&cluster_dense_cells(&raster, t)?, &raster)?,
        None => Vec::new(),
    };
    let out = out_dir(&a.kde.io);
    write_artifact(&out, "boundaries.geojson", format!("{}\n", polygons_to_geojson(&polygons)).as_bytes())?;
    let summary = json!({
        "mode": match mode { RasterKind::Counts => "counts", RasterKind::Kde => "kde" },
        "resolution": resolution,
        "threshold": threshold,
        "rows": raster.rows,
        "cols": raster.cols,
        "cluster_count": polygons.len(),
    });
    write_artifact(&out, "boundary_report.json", &pretty(&summary)?)?;
    if let Some(path) = &a.admin {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::missing_input(path, &e))?;
        let cmp = compare_with_regions(&read_regions_geojson(&text)?, &polygons, resolution)?;
        write_artifact(&out, "boundary_comparison.json", &pretty(&cmp)?)?;
    }
    Ok(())
}

pub fn export_graph(_ctx: &Context, a: ExportGraphArgs) -> Result<(), Failure> {
    let format: GraphFormat = a.format.parse()?;
    let graph = load_graph(&a.io.graph)?;
    let out = a.io.out.clone().ok_or_else(|| Failure::config("--out is required for export-graph".into()))?;
    for (name, bytes) in converters::export_graph(&graph, format)? {
        write_artifact(&out, &name, &bytes)?;
    }
    Ok(())
}

pub fn export_simnet(_ctx: &Context, io: GraphOut) -> Result<(), Failure> {
    let graph = load_graph(&io.graph)?;
    let net = converters::export_simnet(&graph);
    net.validate()?;
    write_artifact(&out_dir(&io), "simnet.json", format!("{}\n", net.to_json()?).as_bytes())
}

pub fn gen_demand(ctx: &Context, a: GenDemandArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.io.graph)?;
    let net = converters::export_simnet(&graph);
    let trips = pick(a.trips, ctx.file.trips, 100);
    let horizon = pick(a.horizon, ctx.file.horizon_s, 3600.0);
    let spec = generate_demand(&net, trips, horizon, ctx.seed)?;
    write_artifact(&out_dir(&a.io), "demand.json", format!("{}\n", spec.to_json()?).as_bytes())
}

pub fn map_sensors_cmd(ctx: &Context, a: MapSensorsArgs) -> Result<(), Failure> {
    let max_d = pick(a.max_distance, ctx.file.max_match_distance_m, DEFAULT_MAX_MATCH_DISTANCE_M);
    let sensors = read_sensors_csv(open_input(&a.sensors)?)?;
    let graph = load_graph(&a.io.graph)?;
    let mapping = map_sensors(&sensors, &KdIndex::from_graph(&graph), max_d)?;
    eprintln!("matched {} of {} sensors", mapping.matched_count(), sensors.len());
    let mut bytes = Vec::new();
    mapping.write_csv(&mut bytes)?;
    write_artifact(&out_dir(&a.io), "sensor_mapping.csv", &bytes)
}
