//! Descriptor matching: nearest neighbor under the ratio test, kept only
//! when mutual.

use serde::{Deserialize, Serialize};

use super::keypoints::Keypoint;
use super::SimilarityConfig;

/// One accepted correspondence between keypoint lists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub a: usize,
    pub b: usize,
    /// L2 distance between the two descriptors.
    pub distance: f32,
}

/// Correspondences injective on both sides: no keypoint index appears twice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Index of the nearest candidate plus the squared distances of the two
/// nearest. Ties go to the lower index; a single candidate gets an infinite
/// runner-up, which always passes the ratio test.
fn nearest_two(query: &[f32], candidates: &[Keypoint]) -> Option<(usize, f32, f32)> {
    let mut best: Option<(usize, f32)> = None;
    let mut second = f32::INFINITY;
    for (idx, kp) in candidates.iter().enumerate() {
        let d = squared_distance(query, &kp.descriptor);
        match best {
            Some((_, bd)) if d < bd => {
                second = bd;
                best = Some((idx, d));
            }
            Some(_) => second = second.min(d),
            None => best = Some((idx, d)),
        }
    }
    best.map(|(idx, d)| (idx, d, second))
}

/// Accepts the nearest candidate when it is decisively closer than the
/// runner-up: distance ratio strictly below the threshold. Two equally
/// distant candidates never pass, which drops keypoints with ambiguous
/// (repeated) descriptors.
fn ratio_filtered_nearest(
    query: &[f32],
    candidates: &[Keypoint],
    ratio_threshold: f64,
) -> Option<usize> {
    let (idx, best, second) = nearest_two(query, candidates)?;
    let threshold = (ratio_threshold * ratio_threshold) as f32;
    if best < threshold * second {
        Some(idx)
    } else {
        None
    }
}

/// Nearest-neighbor matching in both directions; a pair survives only when
/// each side is the other's ratio-test winner.
pub fn match_keypoints(a: &[Keypoint], b: &[Keypoint], cfg: &SimilarityConfig) -> MatchSet {
    if a.is_empty() || b.is_empty() {
        return MatchSet::default();
    }
    let backward: Vec<Option<usize>> = b
        .iter()
        .map(|kp| ratio_filtered_nearest(&kp.descriptor, a, cfg.ratio_threshold))
        .collect();
    let mut pairs = Vec::new();
    for (i, kp) in a.iter().enumerate() {
        let Some(j) = ratio_filtered_nearest(&kp.descriptor, b, cfg.ratio_threshold) else {
            continue;
        };
        if backward[j] == Some(i) {
            pairs.push(Match {
                a: i,
                b: j,
                distance: squared_distance(&kp.descriptor, &b[j].descriptor).sqrt(),
            });
        }
    }
    MatchSet { pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simile::keypoints::extract_keypoints;
    use crate::synth;
    use std::collections::BTreeSet;

    fn config() -> SimilarityConfig {
        SimilarityConfig::default()
    }

    fn keypoint_at(x: f32, descriptor: Vec<f32>) -> Keypoint {
        Keypoint {
            x,
            y: 0.0,
            scale: 1.0,
            orientation: 0.0,
            descriptor,
        }
    }

    fn unit(dims: &[(usize, f32)]) -> Vec<f32> {
        let mut v = vec![0.0f32; 128];
        for (i, val) in dims {
            v[*i] = *val;
        }
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.iter().map(|x| x / norm).collect()
    }

    #[test]
    fn empty_sides_match_nothing() {
        let kps = vec![keypoint_at(0.0, unit(&[(0, 1.0)]))];
        assert!(match_keypoints(&[], &kps, &config()).is_empty());
        assert!(match_keypoints(&kps, &[], &config()).is_empty());
    }

    #[test]
    fn distinct_descriptors_pair_off() {
        let a = vec![
            keypoint_at(0.0, unit(&[(0, 1.0)])),
            keypoint_at(1.0, unit(&[(40, 1.0)])),
        ];
        let b = vec![
            keypoint_at(5.0, unit(&[(40, 1.0)])),
            keypoint_at(6.0, unit(&[(0, 1.0)])),
        ];
        let matches = match_keypoints(&a, &b, &config());
        assert_eq!(matches.len(), 2);
        assert_eq!((matches.pairs[0].a, matches.pairs[0].b), (0, 1));
        assert_eq!((matches.pairs[1].a, matches.pairs[1].b), (1, 0));
        assert!(matches.pairs.iter().all(|m| m.distance < 1e-6));
    }

    #[test]
    fn ambiguous_candidates_are_rejected() {
        // Two identical candidates: the runner-up ties the winner, so the
        // ratio test fails and nothing matches.
        let a = vec![keypoint_at(0.0, unit(&[(0, 1.0)]))];
        let b = vec![
            keypoint_at(1.0, unit(&[(0, 1.0)])),
            keypoint_at(2.0, unit(&[(0, 1.0)])),
        ];
        assert!(match_keypoints(&a, &b, &config()).is_empty());
    }

    #[test]
    fn near_tie_fails_the_ratio_test() {
        // Runner-up closer than ratio * best blocks the match even when a
        // unique nearest neighbor exists.
        let a = vec![keypoint_at(0.0, unit(&[(0, 1.0)]))];
        let b = vec![
            keypoint_at(1.0, unit(&[(0, 1.0), (1, 0.10)])),
            keypoint_at(2.0, unit(&[(0, 1.0), (2, 0.11)])),
        ];
        assert!(match_keypoints(&a, &b, &config()).is_empty());
    }

    #[test]
    fn matches_are_injective_on_both_sides() {
        let img = synth::textured_image(128, 128, 21);
        let other = synth::rotated_image(&img, 30.0);
        let kp_a = extract_keypoints(&img);
        let kp_b = extract_keypoints(&other);
        let matches = match_keypoints(&kp_a, &kp_b, &config());
        let left: BTreeSet<usize> = matches.pairs.iter().map(|m| m.a).collect();
        let right: BTreeSet<usize> = matches.pairs.iter().map(|m| m.b).collect();
        assert_eq!(left.len(), matches.len());
        assert_eq!(right.len(), matches.len());
    }

    #[test]
    fn self_match_recovers_nearly_every_keypoint() {
        let img = synth::textured_image(128, 128, 13);
        let kps = extract_keypoints(&img);
        assert!(kps.len() >= 10);
        let matches = match_keypoints(&kps, &kps, &config());
        assert!(
            matches.len() as f64 >= 0.9 * kps.len() as f64,
            "{} of {} matched",
            matches.len(),
            kps.len()
        );
        // Self-matches land on the identity pairing.
        for m in &matches.pairs {
            assert_eq!(m.a, m.b);
            assert!(m.distance < 1e-6);
        }
    }
}
