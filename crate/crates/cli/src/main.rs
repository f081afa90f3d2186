mod bench;
mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{pick, FileConfig};
use crate::failure::{Failure, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "roadnet", version, about = "Road-network extraction and analysis for OpenStreetMap extracts")]
pub struct Cli {
    /// Settings file (flat TOML); flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads, 0 = one per CPU.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse an OSM XML extract and write the vertex/edge tables.
    Ingest(IngestArgs),
    /// Summary statistics of a graph directory.
    Stats(StatsArgs),
    /// Spatial queries against a graph directory.
    Query(QueryArgs),
    /// Kernel density at every vertex.
    Kde(KdeArgs),
    /// Density-based boundary detection.
    Boundary(BoundaryArgs),
    /// Serialize the graph as csv, json or geojson.
    ExportGraph(ExportGraphArgs),
    /// Lane-level simulator network.
    ExportSimnet(GraphOut),
    /// Random origin/destination trips with routes.
    GenDemand(GenDemandArgs),
    /// Match sensor locations to their nearest vertex.
    MapSensors(MapSensorsArgs),
    /// Time indexed against naive queries on synthetic points.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct GraphOut {
    /// Directory holding vertices.csv and split_edges.csv.
    pub graph: PathBuf,
    /// Output directory; defaults to the graph directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub snap_radius: Option<f64>,
    #[arg(long)]
    pub component_min_length: Option<f64>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub io: GraphOut,
    /// GeoJSON regions with a `name` property for per-region totals.
    #[arg(long)]
    pub regions: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueryMode {
    Radius,
    Bbox,
    Nearest,
    Knn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Indexed,
    Naive,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    pub io: GraphOut,
    #[arg(long, value_enum)]
    pub mode: QueryMode,
    #[arg(long, allow_negative_numbers = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lon: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// min_lat,min_lon,max_lat,max_lon
    #[arg(long, allow_negative_numbers = true)]
    pub bbox: Option<String>,
    #[arg(long, value_enum, default_value = "indexed")]
    pub engine: Engine,
    #[arg(long)]
    pub grid_resolution: Option<f64>,
}

#[derive(Args, Debug)]
pub struct KdeArgs {
    #[command(flatten)]
    pub io: GraphOut,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Truncation radius in bandwidths; 0 sums over all vertices.
    #[arg(long)]
    pub truncation: Option<f64>,
    #[arg(long)]
    pub grid_resolution: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RasterKind {
    Counts,
    Kde,
}

#[derive(Args, Debug)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub kde: KdeArgs,
    /// Raster cell size in degrees.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Density threshold; defaults to the 90th percentile of nonzero cells.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<RasterKind>,
    /// Reference boundaries (GeoJSON, `name` property per feature).
    #[arg(long)]
    pub admin: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportGraphArgs {
    #[command(flatten)]
    pub io: GraphOut,
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct GenDemandArgs {
    #[command(flatten)]
    pub io: GraphOut,
    #[arg(long)]
    pub trips: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MapSensorsArgs {
    #[command(flatten)]
    pub io: GraphOut,
    /// CSV with sensor_id,lat,lon.
    #[arg(long)]
    pub sensors: PathBuf,
    #[arg(long)]
    pub max_distance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub points: usize,
    #[arg(long, default_value_t = 1_000)]
    pub queries: usize,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 500.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Side of the square sampling area in degrees.
    #[arg(long, default_value_t = 1.0)]
    pub extent: f64,
    #[arg(long)]
    pub grid_resolution: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let workers = pick(cli.workers, file.workers, 0);
    let seed = pick(cli.seed, file.seed, 0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Failure::config(format!("worker pool: {e}")))?;
    let ctx = commands::Context { file, seed };
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Query(a) => commands::query(&ctx, a),
        Command::Kde(a) => commands::kde(&ctx, a),
        Command::Boundary(a) => commands::boundary(&ctx, a),
        Command::ExportGraph(a) => commands::export_graph(&ctx, a),
        Command::ExportSimnet(a) => commands::export_simnet(&ctx, a),
        Command::GenDemand(a) => commands::gen_demand(&ctx, a),
        Command::MapSensors(a) => commands::map_sensors_cmd(&ctx, a),
        Command::Bench(a) => bench::run(&ctx, a),
    }
}
