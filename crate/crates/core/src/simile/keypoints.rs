//! Scale-space interest point extraction.
//!
//! Classic difference-of-Gaussians pipeline: a doubled base image feeds a
//! Gaussian pyramid, extrema of adjacent DoG layers are refined to sub-pixel
//! accuracy, low-contrast and edge-like responses are rejected, each
//! surviving point gets one or more dominant gradient orientations, and a
//! 4x4x8 gradient-orientation histogram grid forms the 128-value descriptor.
//! No randomness anywhere: identical pixels give identical keypoints.

use crate::types::PixelBuffer;

/// One oriented interest point with its unit-length descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    /// Sub-pixel position in the source image's coordinates.
    pub x: f32,
    pub y: f32,
    /// Blur level the point was detected at, in source-image pixels.
    pub scale: f32,
    /// Dominant gradient direction, radians in (-pi, pi].
    pub orientation: f32,
    /// Length [`DESCRIPTOR_LEN`], L2-normalized.
    pub descriptor: Vec<f32>,
}

pub const DESCRIPTOR_LEN: usize = 128;

/// Images with a side below this return no keypoints at all.
pub const MIN_IMAGE_DIM: u32 = 16;

/// Extrema layers per octave.
const INTERVALS: usize = 3;
/// Blur of each octave's first layer, in that octave's pixels.
const SIGMA_BASE: f32 = 1.6;
/// Blur assumed already present in the input image.
const SIGMA_INIT: f32 = 0.5;
/// DoG magnitude floor, stated for unit-range pixel values.
const CONTRAST_THRESHOLD: f32 = 0.04;
/// Principal-curvature ratio above which a point counts as an edge response.
const EDGE_RATIO: f32 = 10.0;
const MAX_INTERP_STEPS: usize = 5;
/// Extrema are not sought within this margin of a DoG layer.
const BORDER: usize = 1;

const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f32 = 1.5;
const ORI_RADIUS_FACTOR: f32 = 3.0;
const ORI_PEAK_RATIO: f32 = 0.8;

const DESC_GRID: usize = 4;
const DESC_BINS: usize = 8;
/// Width of one descriptor grid cell, in units of the keypoint scale.
const DESC_CELL_FACTOR: f32 = 3.0;
const DESC_MAG_CLAMP: f32 = 0.2;

/// Grayscale plane with unit-range values.
#[derive(Clone)]
pub(crate) struct GrayPlane {
    pub w: usize,
    pub h: usize,
    pub px: Vec<f32>,
}

impl GrayPlane {
    pub(crate) fn from_pixels(image: &PixelBuffer) -> GrayPlane {
        GrayPlane {
            w: image.width() as usize,
            h: image.height() as usize,
            px: image.to_gray().iter().map(|v| v / 255.0).collect(),
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.px[y * self.w + x]
    }
}

/// Separable Gaussian blur with clamp-to-edge borders.
fn gaussian_blur(img: &GrayPlane, sigma: f32) -> GrayPlane {
    let radius = (sigma * 3.0).ceil().max(1.0) as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let denom = 2.0 * sigma * sigma;
    for i in -radius..=radius {
        kernel.push((-(i * i) as f32 / denom).exp());
    }
    let sum: f32 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (w, h) = (img.w, img.h);
    let mut horizontal = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &img.px[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += row[sx] * weight;
            }
            horizontal[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
                acc += horizontal[sy * w + x] * weight;
            }
            out[y * w + x] = acc;
        }
    }
    GrayPlane { w, h, px: out }
}

/// Bilinear 2x upsample; seeds the pyramid so fine detail survives the first
/// blur levels.
fn upsample2(img: &GrayPlane) -> GrayPlane {
    let (w, h) = (img.w * 2, img.h * 2);
    let mut px = vec![0.0f32; w * h];
    for y in 0..h {
        let sy = (y as f32) / 2.0;
        let y0 = sy as usize;
        let y1 = (y0 + 1).min(img.h - 1);
        let ty = sy - y0 as f32;
        for x in 0..w {
            let sx = (x as f32) / 2.0;
            let x0 = sx as usize;
            let x1 = (x0 + 1).min(img.w - 1);
            let tx = sx - x0 as f32;
            let top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
            let bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
            px[y * w + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    GrayPlane { w, h, px }
}

/// Every-other-pixel decimation; callers pass a layer already blurred to
/// twice the base sigma.
fn downsample2(img: &GrayPlane) -> GrayPlane {
    let w = (img.w / 2).max(1);
    let h = (img.h / 2).max(1);
    let mut px = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            px[y * w + x] = img.at(x * 2, y * 2);
        }
    }
    GrayPlane { w, h, px }
}

struct Octave {
    /// INTERVALS + 3 progressively blurred layers.
    gaussians: Vec<GrayPlane>,
    /// INTERVALS + 2 adjacent differences.
    dogs: Vec<GrayPlane>,
}

fn build_pyramid(base: GrayPlane) -> Vec<Octave> {
    let k = 2.0f32.powf(1.0 / INTERVALS as f32);
    // Incremental blurs between consecutive layers; layer s has total blur
    // SIGMA_BASE * k^s relative to the octave.
    let mut increments = Vec::with_capacity(INTERVALS + 2);
    for s in 1..INTERVALS + 3 {
        let prev = SIGMA_BASE * k.powi(s as i32 - 1);
        let total = prev * k;
        increments.push((total * total - prev * prev).sqrt());
    }

    let mut octaves = Vec::new();
    let mut current = base;
    while current.w.min(current.h) >= 8 {
        let mut gaussians = Vec::with_capacity(INTERVALS + 3);
        gaussians.push(current);
        for inc in &increments {
            gaussians.push(gaussian_blur(gaussians.last().unwrap(), *inc));
        }
        let mut dogs = Vec::with_capacity(INTERVALS + 2);
        for s in 0..INTERVALS + 2 {
            let a = &gaussians[s];
            let b = &gaussians[s + 1];
            let px = b.px.iter().zip(&a.px).map(|(hi, lo)| hi - lo).collect();
            dogs.push(GrayPlane {
                w: a.w,
                h: a.h,
                px,
            });
        }
        // Layer INTERVALS carries blur 2 * SIGMA_BASE, the right seed for
        // the next octave after decimation.
        let next = downsample2(&gaussians[INTERVALS]);
        octaves.push(Octave { gaussians, dogs });
        current = next;
    }
    octaves
}

fn is_extremum(dogs: &[GrayPlane], s: usize, x: usize, y: usize) -> bool {
    let v = dogs[s].at(x, y);
    let mut max = true;
    let mut min = true;
    for ds in -1i32..=1 {
        let layer = &dogs[(s as i32 + ds) as usize];
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if ds == 0 && dy == 0 && dx == 0 {
                    continue;
                }
                let n = layer.at((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                if v < n {
                    max = false;
                }
                if v > n {
                    min = false;
                }
                if !max && !min {
                    return false;
                }
            }
        }
    }
    // A plateau tie counts as both; the contrast test culls flat regions.
    max || min
}

/// Solves the symmetric 3x3 system H*d = -g by Gaussian elimination.
fn solve3(h: [[f64; 3]; 3], g: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [
        [h[0][0], h[0][1], h[0][2], -g[0]],
        [h[1][0], h[1][1], h[1][2], -g[1]],
        [h[2][0], h[2][1], h[2][2], -g[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= factor * a[col][c];
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

struct RefinedPoint {
    x: usize,
    y: usize,
    s: usize,
    /// Sub-pixel offsets in x, y, and scale.
    offset: [f64; 3],
}

/// Quadratic interpolation of the extremum position, with contrast and edge
/// rejection.
fn refine_extremum(
    dogs: &[GrayPlane],
    mut s: usize,
    mut x: usize,
    mut y: usize,
) -> Option<RefinedPoint> {
    let w = dogs[0].w;
    let h = dogs[0].h;
    for step in 0..=MAX_INTERP_STEPS {
        let d = |ds: i32, dx: i32, dy: i32| -> f64 {
            dogs[(s as i32 + ds) as usize].at((x as i32 + dx) as usize, (y as i32 + dy) as usize)
                as f64
        };
        let v = d(0, 0, 0);
        let g = [
            (d(0, 1, 0) - d(0, -1, 0)) / 2.0,
            (d(0, 0, 1) - d(0, 0, -1)) / 2.0,
            (d(1, 0, 0) - d(-1, 0, 0)) / 2.0,
        ];
        let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
        let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
        let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
        let dxy = (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1)) / 4.0;
        let dxs = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4.0;
        let dys = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4.0;
        let hessian = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let offset = solve3(hessian, g)?;

        if offset[0].abs() < 0.5 && offset[1].abs() < 0.5 && offset[2].abs() < 0.5 {
            // Converged: apply the contrast test at the interpolated point.
            let contrast =
                v + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
            if contrast.abs() < (CONTRAST_THRESHOLD / INTERVALS as f32) as f64 {
                return None;
            }
            // Edge rejection on the spatial Hessian.
            let trace = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = EDGE_RATIO as f64;
            if det <= 0.0 || trace * trace * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            return Some(RefinedPoint { x, y, s, offset });
        }
        if step == MAX_INTERP_STEPS {
            return None;
        }
        // Step to the neighboring sample and interpolate again.
        x = (x as i64 + offset[0].round() as i64).try_into().ok()?;
        y = (y as i64 + offset[1].round() as i64).try_into().ok()?;
        s = (s as i64 + offset[2].round() as i64).try_into().ok()?;
        if !(1..=INTERVALS).contains(&s)
            || x < BORDER
            || y < BORDER
            || x >= w - BORDER
            || y >= h - BORDER
        {
            return None;
        }
    }
    None
}

/// Gradient magnitude and orientation at an interior pixel.
#[inline]
fn gradient(img: &GrayPlane, x: usize, y: usize) -> (f32, f32) {
    let dx = img.at(x + 1, y) - img.at(x - 1, y);
    let dy = img.at(x, y + 1) - img.at(x, y - 1);
    ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
}

/// 36-bin orientation histogram around the point; returns every direction
/// whose smoothed peak reaches [`ORI_PEAK_RATIO`] of the maximum.
fn dominant_orientations(img: &GrayPlane, x: f32, y: f32, sigma_oct: f32) -> Vec<f32> {
    let sigma = ORI_SIGMA_FACTOR * sigma_oct;
    let radius = (ORI_RADIUS_FACTOR * sigma).round() as i64;
    let denom = 2.0 * sigma * sigma;
    let cx = x.round() as i64;
    let cy = y.round() as i64;
    let mut hist = [0.0f32; ORI_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let px = cx + dx;
            let py = cy + dy;
            if px < 1 || py < 1 || px >= img.w as i64 - 1 || py >= img.h as i64 - 1 {
                continue;
            }
            let (mag, theta) = gradient(img, px as usize, py as usize);
            let weight = (-((dx * dx + dy * dy) as f32) / denom).exp();
            let mut bin =
                ((theta + std::f32::consts::PI) / std::f32::consts::TAU * ORI_BINS as f32).floor();
            if bin >= ORI_BINS as f32 {
                bin = 0.0;
            }
            hist[bin as usize] += mag * weight;
        }
    }

    // Two circular passes of a 1-4-6-4-1 kernel steady the peaks.
    for _ in 0..2 {
        let snapshot = hist;
        for i in 0..ORI_BINS {
            let at = |off: i64| snapshot[((i as i64 + off).rem_euclid(ORI_BINS as i64)) as usize];
            hist[i] =
                (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 + at(0) * 6.0 / 16.0;
        }
    }

    let max = hist.iter().cloned().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 0..ORI_BINS {
        let left = hist[(i + ORI_BINS - 1) % ORI_BINS];
        let right = hist[(i + 1) % ORI_BINS];
        if hist[i] > left && hist[i] > right && hist[i] >= ORI_PEAK_RATIO * max {
            // Parabolic refinement of the peak bin.
            let correction = 0.5 * (left - right) / (left - 2.0 * hist[i] + right);
            let bin = i as f32 + correction;
            let theta =
                (bin + 0.5) / ORI_BINS as f32 * std::f32::consts::TAU - std::f32::consts::PI;
            peaks.push(theta);
        }
    }
    peaks
}

/// 4x4 spatial grid of 8-bin orientation histograms with trilinear
/// interpolation, rotated to the keypoint orientation, clamped, and
/// L2-normalized. Returns None when the support region has no gradient.
fn describe(
    img: &GrayPlane,
    x: f32,
    y: f32,
    sigma_oct: f32,
    orientation: f32,
) -> Option<Vec<f32>> {
    let cell = DESC_CELL_FACTOR * sigma_oct;
    let half_grid = DESC_GRID as f32 / 2.0;
    // Enough to cover the rotated grid plus one cell of interpolation spill.
    let radius = (cell * std::f32::consts::SQRT_2 * (DESC_GRID as f32 + 1.0) / 2.0).round() as i64;
    let (sin, cos) = orientation.sin_cos();
    let cx = x.round() as i64;
    let cy = y.round() as i64;
    let bins_per_rad = DESC_BINS as f32 / std::f32::consts::TAU;
    let weight_denom = 2.0 * half_grid * half_grid;

    let mut hist = vec![0.0f32; DESC_GRID * DESC_GRID * DESC_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let px = cx + dx;
            let py = cy + dy;
            if px < 1 || py < 1 || px >= img.w as i64 - 1 || py >= img.h as i64 - 1 {
                continue;
            }
            // Offsets in descriptor-grid units, rotated into the keypoint
            // frame.
            let fx = (dx as f32 + cx as f32 - x) / cell;
            let fy = (dy as f32 + cy as f32 - y) / cell;
            let rx = cos * fx + sin * fy;
            let ry = -sin * fx + cos * fy;
            let rbin = ry + half_grid - 0.5;
            let cbin = rx + half_grid - 0.5;
            if rbin <= -1.0
                || cbin <= -1.0
                || rbin >= DESC_GRID as f32
                || cbin >= DESC_GRID as f32
            {
                continue;
            }
            let (mag, theta) = gradient(img, px as usize, py as usize);
            let mut obin = (theta - orientation) * bins_per_rad;
            while obin < 0.0 {
                obin += DESC_BINS as f32;
            }
            while obin >= DESC_BINS as f32 {
                obin -= DESC_BINS as f32;
            }
            let weight = (-(rx * rx + ry * ry) / weight_denom).exp();
            scatter_trilinear(&mut hist, rbin, cbin, obin, mag * weight);
        }
    }

    let norm = hist.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm <= f32::EPSILON {
        return None;
    }
    for v in &mut hist {
        *v = (*v / norm).min(DESC_MAG_CLAMP);
    }
    let norm = hist.iter().map(|v| v * v).sum::<f32>().sqrt();
    for v in &mut hist {
        *v /= norm;
    }
    Some(hist)
}

/// Distributes one weighted sample into the eight surrounding
/// (row, col, orientation) bins.
fn scatter_trilinear(hist: &mut [f32], rbin: f32, cbin: f32, obin: f32, value: f32) {
    let r0 = rbin.floor();
    let c0 = cbin.floor();
    let o0 = obin.floor();
    let dr = rbin - r0;
    let dc = cbin - c0;
    let dobin = obin - o0;
    for (ri, rw) in [(r0 as i64, 1.0 - dr), (r0 as i64 + 1, dr)] {
        if ri < 0 || ri >= DESC_GRID as i64 {
            continue;
        }
        for (ci, cw) in [(c0 as i64, 1.0 - dc), (c0 as i64 + 1, dc)] {
            if ci < 0 || ci >= DESC_GRID as i64 {
                continue;
            }
            for (oi, ow) in [(o0 as i64, 1.0 - dobin), (o0 as i64 + 1, dobin)] {
                let o = (oi.rem_euclid(DESC_BINS as i64)) as usize;
                let idx = (ri as usize * DESC_GRID + ci as usize) * DESC_BINS + o;
                hist[idx] += value * rw * cw * ow;
            }
        }
    }
}

/// Extracts oriented, described interest points. Deterministic; images with
/// a side below [`MIN_IMAGE_DIM`] yield none.
pub fn extract_keypoints(image: &PixelBuffer) -> Vec<Keypoint> {
    if image.width() < MIN_IMAGE_DIM || image.height() < MIN_IMAGE_DIM {
        return Vec::new();
    }
    let gray = GrayPlane::from_pixels(image);
    let doubled = upsample2(&gray);
    // The doubled image carries 2 * SIGMA_INIT of blur; top up to SIGMA_BASE.
    let initial = 2.0 * SIGMA_INIT;
    let base = gaussian_blur(
        &doubled,
        (SIGMA_BASE * SIGMA_BASE - initial * initial).sqrt(),
    );
    let octaves = build_pyramid(base);

    let prefilter = 0.5 * CONTRAST_THRESHOLD / INTERVALS as f32;
    let max_x = (image.width() - 1) as f32;
    let max_y = (image.height() - 1) as f32;
    let mut keypoints = Vec::new();
    for (oct_idx, octave) in octaves.iter().enumerate() {
        // Octave 0 is the doubled image, so its coordinates halve.
        let octave_scale = 2.0f32.powi(oct_idx as i32 - 1);
        let w = octave.dogs[0].w;
        let h = octave.dogs[0].h;
        for s in 1..=INTERVALS {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if octave.dogs[s].at(x, y).abs() < prefilter
                        || !is_extremum(&octave.dogs, s, x, y)
                    {
                        continue;
                    }
                    let Some(point) = refine_extremum(&octave.dogs, s, x, y) else {
                        continue;
                    };
                    let fx = point.x as f32 + point.offset[0] as f32;
                    let fy = point.y as f32 + point.offset[1] as f32;
                    let fs = point.s as f32 + point.offset[2] as f32;
                    let sigma_oct = SIGMA_BASE * 2.0f32.powf(fs / INTERVALS as f32);
                    let src_x = fx * octave_scale;
                    let src_y = fy * octave_scale;
                    if !(0.0..=max_x).contains(&src_x) || !(0.0..=max_y).contains(&src_y) {
                        continue;
                    }
                    // Orientation and descriptor read the Gaussian layer
                    // nearest the refined scale.
                    let layer_idx = (fs.round() as usize).clamp(0, INTERVALS + 2);
                    let layer = &octave.gaussians[layer_idx];
                    for orientation in dominant_orientations(layer, fx, fy, sigma_oct) {
                        let Some(descriptor) = describe(layer, fx, fy, sigma_oct, orientation)
                        else {
                            continue;
                        };
                        keypoints.push(Keypoint {
                            x: src_x,
                            y: src_y,
                            scale: sigma_oct * octave_scale,
                            orientation,
                            descriptor,
                        });
                    }
                }
            }
        }
    }
    // Scan order is already deterministic; sorting decouples the public
    // order from pyramid internals.
    keypoints.sort_by(|a, b| {
        a.y.total_cmp(&b.y)
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
            .then(a.orientation.total_cmp(&b.orientation))
    });
    keypoints
}
