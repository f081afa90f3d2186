use std::path::Path;

use serde::Serialize;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_RUNTIME: i32 = 1;

/// Error reported as one JSON object on stderr.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip)]
    pub exit_code: i32,
}

impl Failure {
    pub fn missing_input(path: &Path, err: &dyn std::fmt::Display) -> Self {
        Failure {
            kind: "missing_input",
            message: format!("{}: {err}", path.display()),
            exit_code: EXIT_USAGE,
        }
    }

    pub fn config(message: String) -> Self {
        Failure { kind: "invalid_config", message, exit_code: EXIT_USAGE }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: format!("{}: {err}", path.display()),
            exit_code: EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message, "exit_code": self.exit_code }).to_string()
    }
}

impl From<roadnet::Error> for Failure {
    fn from(e: roadnet::Error) -> Self {
        use roadnet::Error as E;
        let (kind, exit_code) = match &e {
            E::Invariant(_) => ("invariant_violation", EXIT_INVARIANT),
            E::InvalidParameter(_) | E::InvalidBBox(_) | E::InvalidCoordinate(_) | E::UnknownFormat(_) => {
                ("invalid_config", EXIT_USAGE)
            }
            E::Xml { .. } | E::Malformed(_) | E::Csv(_) | E::Json(_) | E::GeoJson(_) | E::EmptyPolyline => {
                ("malformed_input", EXIT_USAGE)
            }
            E::UnknownVertex(_) => ("unknown_vertex", EXIT_USAGE),
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ("missing_input", EXIT_USAGE),
            _ => ("runtime", EXIT_RUNTIME),
        };
        Failure { kind, message: e.to_string(), exit_code }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        roadnet::Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        roadnet::Error::from(e).into()
    }
}
