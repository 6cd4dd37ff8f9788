use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

const RADIUS_EPS: f64 = 1e-14;

/// Batch mean-radius normaliser.
///
/// Every sample in a batch is multiplied by the same positive scalar
/// `target_scale / (mean radius + ε)`. Directions are untouched and no
/// sample is projected onto a fixed-radius shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialNormalizer {
    pub target_scale: f64,
    pub momentum: f64,
    pub running_mean_radius: f64,
}

impl Default for RadialNormalizer {
    fn default() -> Self {
        Self::new(1.0, 0.9)
    }
}

impl RadialNormalizer {
    /// Running statistic starts at `target_scale`, so an untrained
    /// normaliser is the identity.
    pub fn new(target_scale: f64, momentum: f64) -> Self {
        assert!(target_scale > 0.0, "target_scale must be positive");
        assert!((0.0..1.0).contains(&momentum), "momentum must lie in [0, 1)");
        Self {
            target_scale,
            momentum,
            running_mean_radius: target_scale,
        }
    }

    /// Scale used at inference time.
    pub fn inference_scale(&self) -> f64 {
        if self.running_mean_radius <= 0.0 {
            1.0
        } else {
            self.target_scale / (self.running_mean_radius + RADIUS_EPS)
        }
    }

    /// Computes the training-mode scale for a batch and folds its mean
    /// radius into the running statistic. Returns `(scale, degenerate)`.
    pub fn observe(&mut self, mean_radius: f64) -> (f64, bool) {
        if mean_radius <= 0.0 {
            return (1.0, true);
        }
        self.running_mean_radius =
            self.momentum * self.running_mean_radius + (1.0 - self.momentum) * mean_radius;
        (self.target_scale / (mean_radius + RADIUS_EPS), false)
    }
}

/// Result of [`radial_normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub outputs: Vec<Vector>,
    pub scale: f64,
    /// Set when the batch (or running statistic) had zero radius and the
    /// normaliser fell back to the identity.
    pub degenerate: bool,
}

pub fn mean_radius(batch: &[Vector]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(Vector::norm).sum::<f64>() / batch.len() as f64
}

/// Rescales every vector of `batch` by one shared positive factor.
pub fn radial_normalize(
    batch: &[Vector],
    norm: &mut RadialNormalizer,
    training: bool,
) -> Result<Normalized> {
    let (scale, degenerate) = if training {
        if batch.is_empty() {
            return Err(Error::InvalidArgument(
                "training-mode normalisation needs a non-empty batch".into(),
            ));
        }
        norm.observe(mean_radius(batch))
    } else {
        (norm.inference_scale(), norm.running_mean_radius <= 0.0)
    };
    Ok(Normalized {
        outputs: batch.iter().map(|v| v.scaled(scale)).collect(),
        scale,
        degenerate,
    })
}
