use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn roadnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadnet")).args(args).output().unwrap()
}

fn cross() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/cross.osm")
}

fn ingest(dir: &Path) -> String {
    let g = dir.join("g");
    let o = roadnet(&["ingest", "--input", cross().to_str().unwrap(), "--out", g.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    g.to_str().unwrap().to_string()
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn knn_query_writes_sorted_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let g = ingest(tmp.path());
    let o = roadnet(&["query", &g, "--mode", "knn", "--k", "3", "--lat", "0.0005", "--lon", "0.0001"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(Path::new(&g).join("query.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "vertex_id,distance_m");
    assert_eq!(rows.len(), 4);
    let d: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn naive_and_indexed_engines_write_the_same_file() {
    let tmp = tempfile::tempdir().unwrap();
    let g = ingest(tmp.path());
    let mut outputs = Vec::new();
    for engine in ["indexed", "naive"] {
        let out = tmp.path().join(engine);
        let o = roadnet(&[
            "query", &g, "--out", out.to_str().unwrap(), "--mode", "radius", "--radius", "150", "--lat", "0", "--lon",
            "0", "--engine", engine,
        ]);
        assert!(o.status.success());
        outputs.push(std::fs::read(out.join("query.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.osm");
    let o = roadnet(&["ingest", "--input", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["exit_code"], 2);

    let bad = tmp.path().join("bad.osm");
    std::fs::write(&bad, "<osm><node id=\"1\" lat=\"x\"").unwrap();
    let o = roadnet(&["ingest", "--input", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(roadnet(&["frobnicate"]).status.code(), Some(2));

    let g = ingest(tmp.path());
    let o = roadnet(&["kde", &g, "--sample-rate", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "invalid_config");
    let o = roadnet(&["export-graph", &g, "--out", tmp.path().to_str().unwrap(), "--format", "shp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let g = ingest(tmp.path());
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "trips = 7\nseed = 4\n").unwrap();
    let c = cfg.to_str().unwrap();

    let count = |dir: &str| -> usize {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(Path::new(dir).join("demand.json")).unwrap()).unwrap();
        v["trips"].as_array().unwrap().len()
    };
    assert!(roadnet(&["gen-demand", &g, "--config", c]).status.success());
    assert_eq!(count(&g), 7);
    assert!(roadnet(&["gen-demand", &g, "--config", c, "--trips", "3"]).status.success());
    assert_eq!(count(&g), 3);

    std::fs::write(&cfg, "trips = 7\nbogus = 1\n").unwrap();
    let o = roadnet(&["gen-demand", &g, "--config", c]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "invalid_config");
}
