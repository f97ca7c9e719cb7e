//! Six-parameter affine estimation from point correspondences, plus the
//! warped-difference measurement built on it.
//!
//! Estimation runs random-sample consensus over correspondence triples,
//! then refines on the inlier set by least squares. All randomness comes
//! from a caller-provided generator, so a fixed seed fixes the result.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::PixelBuffer;

/// Row-major 2x3 affine map: `x' = c0*x + c1*y + c2`, `y' = c3*x + c4*y + c5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine2 {
    pub coeffs: [f64; 6],
}

/// A correspondence: point in the source image and where it lands in the
/// destination image.
pub type PointPair = ((f64, f64), (f64, f64));

impl Affine2 {
    pub fn identity() -> Affine2 {
        Affine2 {
            coeffs: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let c = &self.coeffs;
        (c[0] * x + c[1] * y + c[2], c[3] * x + c[4] * y + c[5])
    }

    fn reprojection_sq(&self, pair: &PointPair) -> f64 {
        let ((sx, sy), (dx, dy)) = *pair;
        let (px, py) = self.apply(sx, sy);
        (px - dx) * (px - dx) + (py - dy) * (py - dy)
    }
}

/// Solves A*m = rhs for the 3x3 system shared by both affine rows.
/// None when A is singular.
fn solve3(a: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], rhs[0]],
        [a[1][0], a[1][1], a[1][2], rhs[1]],
        [a[2][0], a[2][1], a[2][2], rhs[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&r1, &r2| m[r1][col].abs().partial_cmp(&m[r2][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= factor * m[col][c];
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Exact fit through three correspondences. None when the source points are
/// (nearly) collinear, which leaves the transform underdetermined.
pub fn affine_from_triple(pairs: [PointPair; 3]) -> Option<Affine2> {
    let [((x0, y0), (u0, v0)), ((x1, y1), (u1, v1)), ((x2, y2), (u2, v2))] = pairs;
    // Twice the signed triangle area; degenerate samples collapse it.
    let area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if area2.abs() < 1e-6 {
        return None;
    }
    let a = [[x0, y0, 1.0], [x1, y1, 1.0], [x2, y2, 1.0]];
    let row_x = solve3(a, [u0, u1, u2])?;
    let row_y = solve3(a, [v0, v1, v2])?;
    Some(Affine2 {
        coeffs: [row_x[0], row_x[1], row_x[2], row_y[0], row_y[1], row_y[2]],
    })
}

/// Least-squares fit over all pairs via the 3x3 normal equations.
pub fn affine_least_squares(pairs: &[PointPair]) -> Option<Affine2> {
    if pairs.len() < 3 {
        return None;
    }
    let mut g = [[0.0f64; 3]; 3];
    let mut bx = [0.0f64; 3];
    let mut by = [0.0f64; 3];
    for ((x, y), (u, v)) in pairs {
        let row = [*x, *y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += row[i] * row[j];
            }
            bx[i] += row[i] * u;
            by[i] += row[i] * v;
        }
    }
    let row_x = solve3(g, bx)?;
    let row_y = solve3(g, by)?;
    Some(Affine2 {
        coeffs: [row_x[0], row_x[1], row_x[2], row_y[0], row_y[1], row_y[2]],
    })
}

fn inliers_of(transform: &Affine2, pairs: &[PointPair], tolerance_px: f64) -> Vec<usize> {
    let tol_sq = tolerance_px * tolerance_px;
    pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| transform.reprojection_sq(p) <= tol_sq)
        .map(|(i, _)| i)
        .collect()
}

/// Random-sample consensus over correspondence triples, refined by least
/// squares on the winning inlier set. None when no sample explains at least
/// three correspondences within tolerance.
pub fn ransac_affine(
    pairs: &[PointPair],
    iterations: usize,
    tolerance_px: f64,
    seed: u64,
) -> Option<Affine2> {
    if pairs.len() < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, Affine2)> = None;
    for _ in 0..iterations {
        let mut idx = [0usize; 3];
        idx[0] = rng.random_range(0..pairs.len());
        loop {
            idx[1] = rng.random_range(0..pairs.len());
            if idx[1] != idx[0] {
                break;
            }
        }
        loop {
            idx[2] = rng.random_range(0..pairs.len());
            if idx[2] != idx[0] && idx[2] != idx[1] {
                break;
            }
        }
        let Some(candidate) = affine_from_triple([pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]])
        else {
            continue;
        };
        let inliers = inliers_of(&candidate, pairs, tolerance_px);
        if inliers.len() < 3 {
            continue;
        }
        let error: f64 = inliers
            .iter()
            .map(|&i| candidate.reprojection_sq(&pairs[i]))
            .sum();
        let better = match &best {
            None => true,
            Some((count, err, _)) => {
                inliers.len() > *count || (inliers.len() == *count && error < *err)
            }
        };
        if better {
            best = Some((inliers.len(), error, candidate));
        }
    }
    let (_, _, consensus) = best?;

    // Refine on the consensus inliers, then once more on the inliers of the
    // refined fit; fall back if refinement loses support.
    let mut current = consensus;
    for _ in 0..2 {
        let inliers = inliers_of(&current, pairs, tolerance_px);
        if inliers.len() < 3 {
            break;
        }
        let subset: Vec<PointPair> = inliers.iter().map(|&i| pairs[i]).collect();
        match affine_least_squares(&subset) {
            Some(refined) if inliers_of(&refined, pairs, tolerance_px).len() >= inliers.len() => {
                current = refined;
            }
            _ => break,
        }
    }
    Some(current)
}

/// Mean absolute grayscale difference between `a` and `b` warped onto `a`'s
/// coordinates by `transform` (which maps a-coordinates into b), plus the
/// fraction of `a` whose preimage landed inside `b`.
///
/// Returns (mean_abs_difference in [0, 255], coverage in [0, 1]); the mean
/// is 0 when nothing overlaps.
pub fn warped_gray_difference(
    a: &PixelBuffer,
    b: &PixelBuffer,
    transform: &Affine2,
) -> (f64, f64) {
    let gray_a = a.to_gray();
    let gray_b = b.to_gray();
    let (wa, ha) = (a.width() as usize, a.height() as usize);
    let (wb, hb) = (b.width() as usize, b.height() as usize);
    let mut total = 0.0f64;
    let mut covered = 0usize;
    for y in 0..ha {
        for x in 0..wa {
            let (bx, by) = transform.apply(x as f64, y as f64);
            if bx < 0.0 || by < 0.0 || bx > (wb - 1) as f64 || by > (hb - 1) as f64 {
                continue;
            }
            let x0 = bx.floor() as usize;
            let y0 = by.floor() as usize;
            let x1 = (x0 + 1).min(wb - 1);
            let y1 = (y0 + 1).min(hb - 1);
            let tx = bx - x0 as f64;
            let ty = by - y0 as f64;
            let sample = |sx: usize, sy: usize| gray_b[sy * wb + sx] as f64;
            let top = sample(x0, y0) * (1.0 - tx) + sample(x1, y0) * tx;
            let bottom = sample(x0, y1) * (1.0 - tx) + sample(x1, y1) * tx;
            let warped = top * (1.0 - ty) + bottom * ty;
            total += (gray_a[y * wa + x] as f64 - warped).abs();
            covered += 1;
        }
    }
    if covered == 0 {
        return (0.0, 0.0);
    }
    (total / covered as f64, covered as f64 / (wa * ha) as f64)
}
