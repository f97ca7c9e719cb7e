//! Importance scoring for extracted image objects.
//!
//! Three features feed the score: pixel size, information density (keypoints
//! per unit area), and accumulated display time. Each feature is divided by
//! its per-segment maximum and the three normalized values are multiplied,
//! so an image must do well on every axis to rank highly.

use crate::error::{Error, Result};
use crate::types::{ImageObject, ImportanceVector};

/// Floor for a normalized feature that came out exactly zero, keeping the
/// multiplicative score strictly positive.
pub const ZERO_FEATURE_FLOOR: f64 = 1e-6;

/// Keypoints per unit pixel area.
pub fn info_density(keypoint_count: usize, area_px: u64) -> Result<f64> {
    if area_px == 0 {
        return Err(Error::InvalidInput("object with zero pixel area".into()));
    }
    Ok(keypoint_count as f64 / area_px as f64)
}

/// Raw per-object features prior to normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawFeatures {
    pub size_px: f64,
    pub info_density: f64,
    pub duration_s: f64,
}

impl RawFeatures {
    pub fn of(object: &ImageObject) -> Result<RawFeatures> {
        if !object.duration_s.is_finite() || object.duration_s <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "object {} has non-positive duration {}",
                object.id, object.duration_s
            )));
        }
        Ok(RawFeatures {
            size_px: object.area_px as f64,
            info_density: info_density(object.keypoint_count, object.area_px)?,
            duration_s: object.duration_s,
        })
    }
}

/// Divides every value by the dimension maximum. A dimension whose maximum
/// is zero (every object tied at zero) normalizes to all ones instead; an
/// individual zero under a positive maximum is floored afterwards.
fn normalize(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    values
        .iter()
        .map(|&v| {
            let scaled = if max > 0.0 { v / max } else { 1.0 };
            if scaled == 0.0 {
                ZERO_FEATURE_FLOOR
            } else {
                scaled
            }
        })
        .collect()
}

/// Importance of each object: the product of its three max-normalized
/// features. Every score lands in (0, 1] and the most important object on
/// all three axes scores exactly 1.
pub fn importance_vector(features: &[RawFeatures]) -> Result<ImportanceVector> {
    if features.is_empty() {
        return Err(Error::EmptyInput("importance of zero objects".into()));
    }
    for (i, f) in features.iter().enumerate() {
        if !(f.size_px.is_finite() && f.info_density.is_finite() && f.duration_s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature for object {i}")));
        }
        if f.size_px <= 0.0 || f.duration_s <= 0.0 || f.info_density < 0.0 {
            return Err(Error::InvalidInput(format!(
                "object {i} features out of range: size {} density {} duration {}",
                f.size_px, f.info_density, f.duration_s
            )));
        }
    }
    let sizes = normalize(&features.iter().map(|f| f.size_px).collect::<Vec<_>>());
    let densities = normalize(&features.iter().map(|f| f.info_density).collect::<Vec<_>>());
    let durations = normalize(&features.iter().map(|f| f.duration_s).collect::<Vec<_>>());
    let scores = (0..features.len())
        .map(|i| sizes[i] * densities[i] * durations[i])
        .collect();
    ImportanceVector::new(scores)
}

/// Importance for tracked objects, indexed by object id. The slice must be
/// id-ordered, which is how tracking emits it.
pub fn importance_of_objects(objects: &[ImageObject]) -> Result<ImportanceVector> {
    for (i, obj) in objects.iter().enumerate() {
        if obj.id != i {
            return Err(Error::InvalidInput(format!(
                "objects must be id-ordered: position {i} holds id {}",
                obj.id
            )));
        }
    }
    let features = objects
        .iter()
        .map(RawFeatures::of)
        .collect::<Result<Vec<_>>>()?;
    importance_vector(&features)
}
