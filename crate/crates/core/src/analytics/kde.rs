use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::graph::{RoadGraph, VertexId};
use crate::index::GridIndex;

/// Gaussian-kernel KDE settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeParams {
    pub bandwidth_m: f64,
    /// Fraction of vertices used as kernel sources, in `(0, 1]`.
    pub sample_rate: f64,
    /// Ignore sources beyond this many bandwidths; `None` sums over all sources.
    pub truncation: Option<f64>,
    pub seed: u64,
}

impl Default for KdeParams {
    fn default() -> Self {
        KdeParams {
            bandwidth_m: 500.0,
            sample_rate: 1.0,
            truncation: Some(4.0),
            seed: 0,
        }
    }
}

impl KdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_m > 0.0 && self.bandwidth_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {}", self.bandwidth_m)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be in (0, 1], got {}",
                self.sample_rate
            )));
        }
        if let Some(t) = self.truncation {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("truncation must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Density per square meter at `point`.
///
/// `sources` holds the (possibly sampled) kernel centers and `n_total` the
/// full vertex count; the sum is scaled by `1 / sample_rate` so sampling keeps
/// the estimator unbiased.
pub fn kde_at(point: GeoPoint, sources: &GridIndex, n_total: usize, params: &KdeParams) -> Result<f64> {
    params.validate()?;
    if sources.is_empty() || n_total == 0 {
        return Ok(0.0);
    }
    let h = params.bandwidth_m;
    let inv_two_h2 = 1.0 / (2.0 * h * h);
    let sum: f64 = match params.truncation {
        Some(t) => sources
            .query_radius_with_distance(point, t * h)?
            .iter()
            .map(|n| (-n.distance_m * n.distance_m * inv_two_h2).exp())
            .sum(),
        None => sources
            .points()
            .map(|(_, p)| {
                let d = crate::geo::haversine_distance(point, p);
                (-d * d * inv_two_h2).exp()
            })
            .sum(),
    };
    Ok(sum / params.sample_rate / (n_total as f64 * 2.0 * PI * h * h))
}

/// Bernoulli sample of vertices at `sample_rate`, drawn in id order from `seed`.
pub fn sample_sources(points: &[(VertexId, GeoPoint)], sample_rate: f64, seed: u64) -> Vec<(VertexId, GeoPoint)> {
    if sample_rate >= 1.0 {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .filter(|_| rng.random::<f64>() < sample_rate)
        .copied()
        .collect()
}

/// Density at every vertex. With `sample_rate < 1` every vertex is still
/// evaluated but kernel sources are a seeded sample.
pub fn kde_field(graph: &RoadGraph, index: &GridIndex, params: &KdeParams) -> Result<BTreeMap<VertexId, f64>> {
    params.validate()?;
    let points = graph.vertex_points();
    let sampled;
    let sources = if params.sample_rate < 1.0 {
        sampled = GridIndex::new(
            &sample_sources(&points, params.sample_rate, params.seed),
            index.resolution(),
        )?;
        &sampled
    } else {
        index
    };
    let n = points.len();
    let values: Vec<f64> = points
        .par_iter()
        .map(|(_, p)| kde_at(*p, sources, n, params))
        .collect::<Result<_>>()?;
    Ok(points.iter().map(|(id, _)| *id).zip(values).collect())
}
