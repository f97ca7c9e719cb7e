//! On-disk memo of a segment's similarity results.
//!
//! The cache stores what downstream stages actually consume (per-object
//! keypoint counts and the distance matrix) under a key hashing the image
//! contents and every similarity knob, so any change to either recomputes
//! from scratch.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{content_hash, SimilarityConfig};
use crate::error::Result;
use crate::types::{DistanceMatrix, ImageObject};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCache {
    /// Output of [`cache_key`] for the inputs this entry was computed from.
    pub key: String,
    pub keypoint_counts: Vec<usize>,
    pub distances: DistanceMatrix,
}

/// Hex digest binding the object list (ids, order, pixels) and the
/// similarity configuration.
pub fn cache_key(objects: &[ImageObject], cfg: &SimilarityConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update((objects.len() as u64).to_le_bytes());
    for obj in objects {
        hasher.update((obj.id as u64).to_le_bytes());
        hasher.update(content_hash(&obj.pixels));
    }
    hasher.update(cfg.ratio_threshold.to_le_bytes());
    hasher.update((cfg.min_matches_for_transform as u64).to_le_bytes());
    hasher.update((cfg.ransac_iterations as u64).to_le_bytes());
    hasher.update(cfg.inlier_tolerance_px.to_le_bytes());
    hasher.update((cfg.seed_context.len() as u64).to_le_bytes());
    hasher.update(cfg.seed_context.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

impl SimilarityCache {
    /// Reads the entry at `path` if it exists and was computed for `key`.
    /// A missing file or a different key is a miss; a file that does not
    /// parse is an error, not a silent miss.
    pub fn lookup(path: &Path, key: &str) -> Result<Option<SimilarityCache>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let cache: SimilarityCache = serde_json::from_str(&text)?;
        Ok(if cache.key == key { Some(cache) } else { None })
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
