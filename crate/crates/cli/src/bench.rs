use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use roadnet::index::DEFAULT_GRID_RESOLUTION;
use roadnet::{GeoPoint, GridIndex, KdIndex, NaiveScan};

use crate::commands::{write_artifact, Context};
use crate::config::pick;
use crate::failure::Failure;
use crate::BenchArgs;

struct Row {
    engine: &'static str,
    query_type: &'static str,
    seconds: f64,
}

fn median_time<T>(runs: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let t = Instant::now();
        let out = f();
        times.push(t.elapsed().as_secs_f64());
        last = Some(out);
    }
    times.sort_by(f64::total_cmp);
    (times[times.len() / 2], last.expect("runs >= 1"))
}

/// Times radius, nearest and kNN batches on uniform synthetic points and
/// writes `bench.csv` with the median wall time per engine.
pub fn run(ctx: &Context, a: BenchArgs) -> Result<(), Failure> {
    if a.runs == 0 || a.points == 0 || a.queries == 0 || a.k == 0 {
        return Err(Failure::config("points, queries, runs and k must all be >= 1".into()));
    }
    if !(a.extent > 0.0 && a.extent <= 60.0) || a.radius < 0.0 {
        return Err(Failure::config("extent must be in (0, 60] degrees and radius >= 0".into()));
    }
    let resolution = pick(a.grid_resolution, ctx.file.grid_resolution, DEFAULT_GRID_RESOLUTION);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (lat0, lon0) = (45.0 - a.extent / 2.0, 5.0 - a.extent / 2.0);
    let mut sample = || {
        GeoPoint::new(lat0 + rng.random::<f64>() * a.extent, lon0 + rng.random::<f64>() * a.extent)
    };
    let points: Vec<(i64, GeoPoint)> = (0..a.points as i64).map(|i| Ok((i, sample()?))).collect::<roadnet::Result<_>>()?;
    let queries: Vec<GeoPoint> = (0..a.queries).map(|_| sample()).collect::<roadnet::Result<_>>()?;
    eprintln!("bench: {} points, {} queries, {} runs", a.points, a.queries, a.runs);

    let naive = NaiveScan::new(&points);
    let grid = GridIndex::new(&points, resolution)?;
    let kd = KdIndex::new(&points);
    let mut rows = Vec::new();

    let (t, naive_radius) = median_time(a.runs, || {
        queries.par_iter().map(|q| naive.query_radius(*q, a.radius)).collect::<Vec<_>>()
    });
    rows.push(Row { engine: "naive", query_type: "radius", seconds: t });
    let (t, grid_radius) = median_time(a.runs, || {
        queries.par_iter().map(|q| grid.query_radius(*q, a.radius)).collect::<roadnet::Result<Vec<_>>>()
    });
    rows.push(Row { engine: "grid", query_type: "radius", seconds: t });
    if grid_radius? != naive_radius {
        return Err(roadnet::Error::Invariant("grid radius results differ from naive scan".into()).into());
    }

    let (t, naive_nn) = median_time(a.runs, || {
        queries.par_iter().map(|q| naive.query_nearest(*q)).collect::<roadnet::Result<Vec<_>>>()
    });
    rows.push(Row { engine: "naive", query_type: "nearest", seconds: t });
    let (t, kd_nn) = median_time(a.runs, || kd.batch_nearest(&queries));
    rows.push(Row { engine: "kdtree", query_type: "nearest", seconds: t });
    if kd_nn? != naive_nn? {
        return Err(roadnet::Error::Invariant("k-d nearest results differ from naive scan".into()).into());
    }

    let (t, naive_knn) = median_time(a.runs, || {
        queries.par_iter().map(|q| naive.query_knn(*q, a.k)).collect::<roadnet::Result<Vec<_>>>()
    });
    rows.push(Row { engine: "naive", query_type: "knn", seconds: t });
    let (t, kd_knn) = median_time(a.runs, || kd.batch_knn(&queries, a.k));
    rows.push(Row { engine: "kdtree", query_type: "knn", seconds: t });
    if kd_knn? != naive_knn? {
        return Err(roadnet::Error::Invariant("k-d kNN results differ from naive scan".into()).into());
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["engine", "query_type", "n_points", "n_queries", "wall_seconds"])?;
    for r in &rows {
        eprintln!("{:>7} {:<8} {:.6} s", r.engine, r.query_type, r.seconds);
        w.write_record([
            r.engine.to_string(),
            r.query_type.to_string(),
            a.points.to_string(),
            a.queries.to_string(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
    write_artifact(&a.out, "bench.csv", &bytes)
}
