//! Downstream exports: sensor matching, routing, simulator networks and demand,
//! and whole-graph serialization.

mod demand;
mod export;
mod routing;
mod sensors;
mod simnet;

pub use demand::{generate_demand, DemandSpec, Trip, DEMAND_SCHEMA, MAX_OD_ATTEMPTS};
pub use export::{export_graph, import_graph_json, ExportFiles, GraphFormat};
pub use routing::{arc_key, shortest_path, Arc, GraphRouter, Route, Router};
pub use sensors::{
    map_sensors, read_sensors_csv, Sensor, SensorAssignment, SensorMapping, DEFAULT_MAX_MATCH_DISTANCE_M, UNMATCHED,
};
pub use simnet::{
    default_speed_kmh, export_simnet, split_lanes, Direction, DirectedRoad, Intersection, Phase, SimNetwork,
    PHASE_DURATION_S, SIMNET_SCHEMA,
};
