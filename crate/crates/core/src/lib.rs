//! Road-network extraction and analysis for OpenStreetMap extracts.
//!
//! The pipeline parses OSM XML ([`ingest`]), builds an intersection/split-edge
//! graph ([`graph`]), indexes its vertices ([`index`]), and feeds the
//! analytics, boundary-detection and export stages.

pub mod error;
pub mod geo;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod analytics;
pub mod boundary;
pub mod converters;

pub use error::{Error, Result};
pub use geo::{bbox_contains, haversine_distance, polyline_length, BBox, GeoPoint};
pub use graph::{RoadGraph, SplitEdge, Vertex};
pub use index::{GridIndex, KdIndex, NaiveScan, Neighbor};
