use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("invalid bounding box: {0}")]
    InvalidBBox(String),

    #[error("polyline must contain at least one point")]
    EmptyPolyline,

    #[error("malformed OSM XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("unknown vertex {0}")]
    UnknownVertex(i64),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("no routable origin/destination pair: {0}")]
    NoValidOdPair(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    GeoJson(#[from] Box<geojson::Error>),
}

impl From<geojson::Error> for Error {
    fn from(e: geojson::Error) -> Self {
        Error::GeoJson(Box::new(e))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
