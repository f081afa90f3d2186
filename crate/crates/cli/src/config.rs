use std::path::Path;

use serde::Deserialize;

use crate::failure::Failure;

/// Flat key/value settings file (TOML syntax). Unknown keys are rejected.
/// Command-line flags override anything set here.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub snap_radius_m: Option<f64>,
    pub component_min_length_m: Option<f64>,
    pub grid_resolution: Option<f64>,
    pub bandwidth_m: Option<f64>,
    pub sample_rate: Option<f64>,
    /// Truncation radius in bandwidths; 0 disables truncation.
    pub truncation: Option<f64>,
    pub boundary_resolution: Option<f64>,
    pub boundary_threshold: Option<f64>,
    pub boundary_mode: Option<String>,
    pub max_match_distance_m: Option<f64>,
    pub trips: Option<usize>,
    pub horizon_s: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::missing_input(path, &e))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {}", path.display(), e.message())))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
