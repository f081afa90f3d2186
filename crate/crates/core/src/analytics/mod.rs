//! Dataset statistics and kernel density estimation over graph vertices.

mod kde;
mod stats;

pub use kde::{kde_at, kde_field, sample_sources, KdeParams};
pub use stats::{compute_region_stats, compute_stats, ClassStats, RegionStats, StatsReport};
