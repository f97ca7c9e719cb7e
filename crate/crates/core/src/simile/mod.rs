//! Pairwise visual similarity and the distance matrix built from it.
//!
//! A pair of images is compared in two halves: the share of interest points
//! that find a unique partner in the other image, and how little the images
//! differ pixel-wise once one is warped onto the other with an affine
//! transform fitted to those matches. Each direction averages the two
//! halves; the pair's similarity averages both directions, which makes it
//! symmetric by construction. Distance is one minus similarity.
//!
//! Consensus sampling is the only randomness. Its seed is derived from the
//! images (or the caller's indices) plus a caller-set context string, so
//! runs are reproducible and parallel pair evaluation is order-independent.

pub mod affine;
pub mod cache;
pub mod keypoints;
pub mod matching;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{DistanceMatrix, ImageObject, PixelBuffer};

pub use affine::{
    affine_from_triple, affine_least_squares, ransac_affine, warped_gray_difference, Affine2,
    PointPair,
};
pub use keypoints::{extract_keypoints, Keypoint, DESCRIPTOR_LEN, MIN_IMAGE_DIM};
pub use matching::{match_keypoints, Match, MatchSet};

/// Knobs for matching and consensus. The defaults are the calibrated
/// operating point; `seed_context` namespaces the derived randomness so two
/// corpora processed with the same indices cannot share sampling sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    /// Nearest neighbor accepted when best/second-best distance is below
    /// this.
    pub ratio_threshold: f64,
    /// Fewer matches than this score zero on the transformation half.
    pub min_matches_for_transform: usize,
    pub ransac_iterations: usize,
    pub inlier_tolerance_px: f64,
    /// Folded into every derived seed; set it to the segment id.
    pub seed_context: String,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            ratio_threshold: 0.75,
            min_matches_for_transform: 3,
            ransac_iterations: 500,
            inlier_tolerance_px: 3.0,
            seed_context: String::new(),
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "ratio_threshold {} outside (0, 1)",
                self.ratio_threshold
            )));
        }
        if self.min_matches_for_transform < 3 {
            return Err(Error::InvalidInput(
                "min_matches_for_transform below 3 cannot fix an affine transform".into(),
            ));
        }
        if self.ransac_iterations == 0 {
            return Err(Error::InvalidInput("ransac_iterations must be positive".into()));
        }
        if !(self.inlier_tolerance_px > 0.0) {
            return Err(Error::InvalidInput(format!(
                "inlier_tolerance_px {} must be positive",
                self.inlier_tolerance_px
            )));
        }
        Ok(())
    }
}

/// Digest of an image's dimensions and pixels.
pub fn content_hash(image: &PixelBuffer) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(image.width().to_le_bytes());
    hasher.update(image.height().to_le_bytes());
    hasher.update(image.data());
    hasher.finalize().into()
}

fn truncate_seed(digest: [u8; 32]) -> u64 {
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Seed for the consensus run on the ordered pair (i, j) of a segment's
/// object list.
pub fn pair_seed(context: &str, i: usize, j: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((context.len() as u64).to_le_bytes());
    hasher.update(context.as_bytes());
    hasher.update((i as u64).to_le_bytes());
    hasher.update((j as u64).to_le_bytes());
    truncate_seed(hasher.finalize().into())
}

/// Seeds for both directions of an unordered image pair, derived from pixel
/// content so the result cannot depend on argument order.
fn content_pair_seeds(context: &str, a: &PixelBuffer, b: &PixelBuffer) -> (u64, u64) {
    let ha = content_hash(a);
    let hb = content_hash(b);
    let (lo, hi) = if ha <= hb { (ha, hb) } else { (hb, ha) };
    let direction = |tag: u8| {
        let mut hasher = Sha256::new();
        hasher.update((context.len() as u64).to_le_bytes());
        hasher.update(context.as_bytes());
        hasher.update(lo);
        hasher.update(hi);
        hasher.update([tag]);
        truncate_seed(hasher.finalize().into())
    };
    // Tag 0 seeds the lo->hi direction.
    if ha <= hb {
        (direction(0), direction(1))
    } else {
        (direction(1), direction(0))
    }
}

/// Share of interest points with a unique partner: |matches| divided by the
/// smaller keypoint count, so a crop of a larger image can still reach 1.
/// Zero when either side has no keypoints at all.
pub fn keypoints_score(n_keypoints_a: usize, n_keypoints_b: usize, n_matches: usize) -> f64 {
    let denom = n_keypoints_a.min(n_keypoints_b);
    if denom == 0 {
        return 0.0;
    }
    (n_matches as f64 / denom as f64).clamp(0.0, 1.0)
}

/// Minimum share of `a` that the fitted transform must land inside `b` for
/// the pixel comparison to mean anything.
pub const MIN_WARP_COVERAGE: f64 = 0.25;

/// Pixel agreement after warping `b` onto `a`: fits an affine map from the
/// matched keypoint positions by random-sample consensus, then scores
/// 1 - mean absolute grayscale difference / 255 over the covered region.
/// Zero when matches are too few, no consensus exists, or coverage is below
/// [`MIN_WARP_COVERAGE`].
pub fn transformation_score(
    a: &PixelBuffer,
    b: &PixelBuffer,
    keypoints_a: &[Keypoint],
    keypoints_b: &[Keypoint],
    matches: &MatchSet,
    cfg: &SimilarityConfig,
    seed: u64,
) -> f64 {
    if matches.len() < cfg.min_matches_for_transform {
        return 0.0;
    }
    let pairs: Vec<PointPair> = matches
        .pairs
        .iter()
        .map(|m| {
            let ka = &keypoints_a[m.a];
            let kb = &keypoints_b[m.b];
            ((ka.x as f64, ka.y as f64), (kb.x as f64, kb.y as f64))
        })
        .collect();
    let Some(transform) = ransac_affine(
        &pairs,
        cfg.ransac_iterations,
        cfg.inlier_tolerance_px,
        seed,
    ) else {
        return 0.0;
    };
    let (mean_abs, coverage) = warped_gray_difference(a, b, &transform);
    if coverage < MIN_WARP_COVERAGE {
        return 0.0;
    }
    (1.0 - mean_abs / 255.0).clamp(0.0, 1.0)
}

/// One direction of the comparison: mean of the two halves.
fn directional_similarity(
    a: &PixelBuffer,
    b: &PixelBuffer,
    keypoints_a: &[Keypoint],
    keypoints_b: &[Keypoint],
    cfg: &SimilarityConfig,
    seed: u64,
) -> f64 {
    let matches = match_keypoints(keypoints_a, keypoints_b, cfg);
    let kp_score = keypoints_score(keypoints_a.len(), keypoints_b.len(), matches.len());
    let tf_score = transformation_score(a, b, keypoints_a, keypoints_b, &matches, cfg, seed);
    (kp_score + tf_score) / 2.0
}

/// Similarity over already-extracted keypoints, averaging both directions
/// under the given per-direction seeds.
pub fn similarity_seeded(
    a: &PixelBuffer,
    b: &PixelBuffer,
    keypoints_a: &[Keypoint],
    keypoints_b: &[Keypoint],
    cfg: &SimilarityConfig,
    seed_ab: u64,
    seed_ba: u64,
) -> f64 {
    let forward = directional_similarity(a, b, keypoints_a, keypoints_b, cfg, seed_ab);
    let backward = directional_similarity(b, a, keypoints_b, keypoints_a, cfg, seed_ba);
    (forward + backward) / 2.0
}

/// Similarity in [0, 1] between two images. Symmetric exactly: both
/// directions are evaluated and averaged, and the consensus seeds attach to
/// the unordered pair's content, not to argument order.
pub fn similarity(a: &PixelBuffer, b: &PixelBuffer, cfg: &SimilarityConfig) -> f64 {
    let keypoints_a = extract_keypoints(a);
    let keypoints_b = extract_keypoints(b);
    similarity_with_keypoints(a, b, &keypoints_a, &keypoints_b, cfg)
}

/// [`similarity`] for callers that already hold the two keypoint sets.
pub fn similarity_with_keypoints(
    a: &PixelBuffer,
    b: &PixelBuffer,
    keypoints_a: &[Keypoint],
    keypoints_b: &[Keypoint],
    cfg: &SimilarityConfig,
) -> f64 {
    let (seed_ab, seed_ba) = content_pair_seeds(&cfg.seed_context, a, b);
    similarity_seeded(a, b, keypoints_a, keypoints_b, cfg, seed_ab, seed_ba)
}

/// Extracts keypoints for every object in parallel, preserving order.
pub fn extract_all(objects: &[ImageObject]) -> Vec<Vec<Keypoint>> {
    objects
        .par_iter()
        .map(|obj| extract_keypoints(&obj.pixels))
        .collect()
}

/// Distance matrix over objects whose keypoints are already extracted.
/// Pair (i, j) uses seeds derived from the config context and the indices,
/// so the result is independent of evaluation order and thread count.
pub fn build_distance_matrix_with(
    objects: &[ImageObject],
    keypoints: &[Vec<Keypoint>],
    cfg: &SimilarityConfig,
) -> Result<DistanceMatrix> {
    if objects.is_empty() {
        return Err(Error::EmptyInput("distance matrix over zero objects".into()));
    }
    if objects.len() != keypoints.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} keypoint lists", objects.len()),
            actual: format!("{}", keypoints.len()),
        });
    }
    cfg.validate()?;
    let n = objects.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let distances: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let sim = similarity_seeded(
                &objects[i].pixels,
                &objects[j].pixels,
                &keypoints[i],
                &keypoints[j],
                cfg,
                pair_seed(&cfg.seed_context, i, j),
                pair_seed(&cfg.seed_context, j, i),
            );
            1.0 - sim
        })
        .collect();
    let mut matrix = DistanceMatrix::zeros(n)?;
    for (&(i, j), &d) in pairs.iter().zip(&distances) {
        matrix.set_pair(i, j, d);
    }
    Ok(matrix)
}

/// Distance matrix straight from pixel data: extract, compare, invert.
pub fn build_distance_matrix(
    objects: &[ImageObject],
    cfg: &SimilarityConfig,
) -> Result<DistanceMatrix> {
    let keypoints = extract_all(objects);
    build_distance_matrix_with(objects, &keypoints, cfg)
}
