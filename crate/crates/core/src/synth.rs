//! Seeded synthetic fixtures: textured images and a slide-deck frame
//! sequence with planted ground truth.
//!
//! Everything here is deterministic in its seed so tests and benchmarks can
//! regenerate pixel-identical inputs instead of shipping binary fixtures.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{BoundingBox, PixelBuffer, CHANNELS};

/// Smoothed value-noise texture in mid grays.
///
/// Three lattice octaves (spacings 32, 8, and 3 px) are sampled bilinearly
/// and summed, which yields blob-like structure at several scales and no
/// repetition. That makes the texture rich in stable, unambiguous interest
/// points, unlike periodic patterns whose self-matches are ambiguous.
pub fn textured_image(width: u32, height: u32, seed: u64) -> PixelBuffer {
    let coarse = NoiseLattice::new(width, height, 32, 85.0, seed);
    let fine = NoiseLattice::new(width, height, 8, 25.0, seed ^ 0x9e37_79b9_7f4a_7c15);
    let detail = NoiseLattice::new(width, height, 3, 18.0, seed ^ 0xc2b2_ae3d_27d4_eb4f);
    PixelBuffer::from_fn(width, height, |x, y| {
        let v = 115.0 + coarse.sample(x, y) + fine.sample(x, y) + detail.sample(x, y);
        let g = v.clamp(30.0, 200.0) as u8;
        [g, g, g]
    })
}

struct NoiseLattice {
    cols: u32,
    spacing: u32,
    amplitude: f32,
    values: Vec<f32>,
}

impl NoiseLattice {
    fn new(width: u32, height: u32, spacing: u32, amplitude: f32, seed: u64) -> Self {
        let cols = width / spacing + 2;
        let rows = height / spacing + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..cols * rows)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        NoiseLattice {
            cols,
            spacing,
            amplitude,
            values,
        }
    }

    fn sample(&self, x: u32, y: u32) -> f32 {
        let fx = x as f32 / self.spacing as f32;
        let fy = y as f32 / self.spacing as f32;
        let x0 = fx as u32;
        let y0 = fy as u32;
        let tx = fx - x0 as f32;
        let ty = fy - y0 as f32;
        // Smoothstep on the lattice fractions avoids visible grid creases.
        let tx = tx * tx * (3.0 - 2.0 * tx);
        let ty = ty * ty * (3.0 - 2.0 * ty);
        let at = |cx: u32, cy: u32| self.values[(cy * self.cols + cx) as usize];
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        (top * (1.0 - ty) + bottom * ty) * self.amplitude
    }
}

/// Independent uniform noise per pixel, equal across channels.
pub fn noise_image(width: u32, height: u32, seed: u64) -> PixelBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity((width * height) as usize * CHANNELS);
    for _ in 0..width * height {
        let g: u8 = rng.random_range(0..=255u8);
        data.extend_from_slice(&[g, g, g]);
    }
    PixelBuffer::new(width, height, data).expect("sized to dimensions")
}

pub fn solid_image(width: u32, height: u32, rgb: [u8; 3]) -> PixelBuffer {
    PixelBuffer::filled(width, height, rgb)
}

pub fn checkerboard(width: u32, height: u32, cell: u32) -> PixelBuffer {
    PixelBuffer::from_fn(width, height, |x, y| {
        if (x / cell + y / cell) % 2 == 0 {
            [235, 235, 235]
        } else {
            [25, 25, 25]
        }
    })
}

fn bilinear(img: &PixelBuffer, x: f32, y: f32) -> [u8; 3] {
    // Clamp-to-edge sampling keeps warped fixtures free of synthetic black
    // borders that would read as structure.
    let max_x = (img.width() - 1) as f32;
    let max_y = (img.height() - 1) as f32;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let tx = x - x0 as f32;
    let ty = y - y0 as f32;
    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);
    let mut out = [0u8; 3];
    for c in 0..CHANNELS {
        let top = p00[c] as f32 * (1.0 - tx) + p10[c] as f32 * tx;
        let bottom = p01[c] as f32 * (1.0 - tx) + p11[c] as f32 * tx;
        out[c] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Rotation about the image center, same output size, clamp-to-edge fill.
pub fn rotated_image(img: &PixelBuffer, degrees: f32) -> PixelBuffer {
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cx = (img.width() - 1) as f32 / 2.0;
    let cy = (img.height() - 1) as f32 / 2.0;
    PixelBuffer::from_fn(img.width(), img.height(), |x, y| {
        // Inverse map: rotate the destination pixel back into the source.
        let dx = x as f32 - cx;
        let dy = y as f32 - cy;
        let sx = cos * dx + sin * dy + cx;
        let sy = -sin * dx + cos * dy + cy;
        bilinear(img, sx, sy)
    })
}

/// Uniform rescale by `factor` with bilinear sampling.
pub fn scaled_image(img: &PixelBuffer, factor: f32) -> PixelBuffer {
    assert!(factor > 0.0, "scale factor must be positive");
    let w = ((img.width() as f32 * factor).round() as u32).max(1);
    let h = ((img.height() as f32 * factor).round() as u32).max(1);
    PixelBuffer::from_fn(w, h, |x, y| {
        let sx = (x as f32 + 0.5) / factor - 0.5;
        let sy = (y as f32 + 0.5) / factor - 0.5;
        bilinear(img, sx, sy)
    })
}

/// Adds zero-mean gaussian luminance noise with standard deviation `sigma`
/// (8-bit units), identical across channels.
pub fn noisy_copy(img: &PixelBuffer, sigma: f32, seed: u64) -> PixelBuffer {
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || {
        // Box-Muller transform; u1 is kept away from zero so ln stays finite.
        let u1: f32 = rng.random_range(f32::EPSILON..1.0);
        let u2: f32 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f32::consts::TAU * u2).cos()
    };
    PixelBuffer::from_fn(img.width(), img.height(), |x, y| {
        let n = gauss() * sigma;
        let p = img.pixel(x, y);
        let mut out = [0u8; 3];
        for c in 0..CHANNELS {
            out[c] = (p[c] as f32 + n).round().clamp(0.0, 255.0) as u8;
        }
        out
    })
}

/// One planted diagram of the synthetic deck: where it sits, which frames
/// show it, and how long those frames stay on screen in total.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedDiagram {
    pub bbox: BoundingBox,
    pub frames: Vec<usize>,
    pub duration_s: f64,
    pub texture_seed: u64,
}

/// A generated slide-deck frame sequence with full ground truth attached.
#[derive(Clone, Debug)]
pub struct SyntheticDeck {
    pub frames: Vec<PixelBuffer>,
    pub timestamps_s: Vec<f64>,
    /// Text block boxes per frame, usable as OCR-style annotations.
    pub text_boxes: Vec<Vec<BoundingBox>>,
    /// The distinct diagrams, in first-appearance order.
    pub diagrams: Vec<PlantedDiagram>,
    /// Frame indices where a new slide starts.
    pub transition_indices: Vec<usize>,
}

const DECK_W: u32 = 640;
const DECK_H: u32 = 480;
const DECK_BG: [u8; 3] = [245, 245, 245];
const GLYPH_RGB: [u8; 3] = [40, 40, 46];
const GLYPH_H: u32 = 12;

/// Ten frames at one-second spacing covering four slides (3 + 2 + 3 + 2
/// frames). Four distinct textured diagrams appear; two of them span two
/// slides each, so tracked durations must sum across slides:
///
/// | slide | frames | diagrams        |
/// |-------|--------|-----------------|
/// | 1     | 0..=2  | D0              |
/// | 2     | 3..=4  | D0, D1          |
/// | 3     | 5..=7  | D2, D1          |
/// | 4     | 8..=9  | D3              |
///
/// Every slide also carries a title line and three bullet lines of
/// glyph-block pseudo-text that a text detector must remove.
pub fn synthetic_deck(seed: u64) -> SyntheticDeck {
    let left = BoundingBox::new(64, 96, 200, 160).expect("static box");
    let right = BoundingBox::new(376, 96, 200, 160).expect("static box");
    let center = BoundingBox::new(220, 120, 200, 160).expect("static box");
    let diagram_seeds: Vec<u64> = (0..4u64)
        .map(|i| seed.wrapping_add(0x51de * (i + 1)))
        .collect();
    // (bbox, diagram index) per slide.
    let slides: [Vec<(BoundingBox, usize)>; 4] = [
        vec![(left, 0)],
        vec![(left, 0), (right, 1)],
        vec![(left, 2), (right, 1)],
        vec![(center, 3)],
    ];
    let slide_of_frame = [0usize, 0, 0, 1, 1, 2, 2, 2, 3, 3];

    let mut slide_pixels = Vec::with_capacity(4);
    let mut slide_text = Vec::with_capacity(4);
    for (slide_idx, placements) in slides.iter().enumerate() {
        let mut frame = PixelBuffer::filled(DECK_W, DECK_H, DECK_BG);
        let text = paint_pseudo_text(&mut frame, seed.wrapping_add(7 * slide_idx as u64 + 1));
        for (bbox, diagram) in placements {
            paint_texture(&mut frame, bbox, diagram_seeds[*diagram]);
        }
        slide_pixels.push(frame);
        slide_text.push(text);
    }

    let mut frames = Vec::with_capacity(slide_of_frame.len());
    let mut text_boxes = Vec::with_capacity(slide_of_frame.len());
    for &slide in &slide_of_frame {
        frames.push(slide_pixels[slide].clone());
        text_boxes.push(slide_text[slide].clone());
    }

    // Frame i is on screen until frame i+1; the last frame gets the median
    // spacing, so a 1 s cadence makes the deck 10 s long.
    let frame_hold = 1.0;
    let mut diagrams: Vec<PlantedDiagram> = Vec::new();
    for (slide_idx, placements) in slides.iter().enumerate() {
        let slide_frames: Vec<usize> = slide_of_frame
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == slide_idx)
            .map(|(f, _)| f)
            .collect();
        for (bbox, diagram) in placements {
            if diagrams.len() == *diagram {
                diagrams.push(PlantedDiagram {
                    bbox: *bbox,
                    frames: Vec::new(),
                    duration_s: 0.0,
                    texture_seed: diagram_seeds[*diagram],
                });
            }
            let entry = &mut diagrams[*diagram];
            entry.frames.extend(&slide_frames);
            entry.duration_s += slide_frames.len() as f64 * frame_hold;
        }
    }

    SyntheticDeck {
        timestamps_s: (0..frames.len()).map(|i| i as f64 * frame_hold).collect(),
        frames,
        text_boxes,
        diagrams,
        transition_indices: vec![0, 3, 5, 8],
    }
}

fn paint_texture(frame: &mut PixelBuffer, bbox: &BoundingBox, seed: u64) {
    let tile = textured_image(bbox.w, bbox.h, seed);
    for dy in 0..bbox.h {
        for dx in 0..bbox.w {
            frame.set_pixel(bbox.x + dx, bbox.y + dy, tile.pixel(dx, dy));
        }
    }
}

/// Paints one title line and three bullet lines of glyph blocks, returning
/// the covered line boxes. Word lengths vary with the seed so consecutive
/// slides differ visibly.
fn paint_pseudo_text(frame: &mut PixelBuffer, seed: u64) -> Vec<BoundingBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes = Vec::new();
    let lines = [
        (40u32, 24u32, 360u32),
        (64, 312, 460),
        (64, 342, 420),
        (64, 372, 440),
    ];
    for (x0, y, max_w) in lines {
        let mut x = x0;
        let end = x0 + max_w;
        let mut line_right = x0;
        loop {
            let word = rng.random_range(18..=42u32);
            if x + word > end {
                break;
            }
            for dx in 0..word {
                for dy in 0..GLYPH_H {
                    frame.set_pixel(x + dx, y + dy, GLYPH_RGB);
                }
            }
            line_right = x + word;
            x += word + rng.random_range(4..=7u32);
        }
        if line_right > x0 {
            boxes.push(BoundingBox::new(x0, y, line_right - x0, GLYPH_H).expect("nonempty line"));
        }
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textures_are_seed_deterministic_and_mid_gray() {
        let a = textured_image(64, 48, 7);
        let b = textured_image(64, 48, 7);
        assert_eq!(a, b);
        let c = textured_image(64, 48, 8);
        assert_ne!(a, c);
        for y in 0..48 {
            for x in 0..64 {
                let p = a.pixel(x, y);
                assert!(p[0] >= 30 && p[0] <= 200);
                assert_eq!(p[0], p[1]);
                assert_eq!(p[1], p[2]);
            }
        }
    }

    #[test]
    fn rotation_by_zero_is_identity() {
        let img = textured_image(40, 30, 3);
        assert_eq!(rotated_image(&img, 0.0), img);
    }

    #[test]
    fn rotation_moves_off_center_mass() {
        let mut img = solid_image(64, 64, [250, 250, 250]);
        for dy in 0..8 {
            for dx in 0..8 {
                img.set_pixel(48 + dx, 28 + dy, [10, 10, 10]);
            }
        }
        let turned = rotated_image(&img, 90.0);
        // The dark patch sat right of center; a 90-degree turn leaves it
        // above or below, so the original spot reads background again.
        assert!(turned.pixel(52, 32)[0] > 200);
    }

    #[test]
    fn scaling_halves_dimensions() {
        let img = textured_image(64, 48, 3);
        let half = scaled_image(&img, 0.5);
        assert_eq!((half.width(), half.height()), (32, 24));
    }

    #[test]
    fn noise_shifts_pixels_by_roughly_sigma() {
        let img = solid_image(64, 64, [128, 128, 128]);
        let noisy = noisy_copy(&img, 8.0, 11);
        let mut sum = 0.0f64;
        for y in 0..64 {
            for x in 0..64 {
                sum += (noisy.pixel(x, y)[0] as f64 - 128.0).abs();
            }
        }
        let mean_abs = sum / (64.0 * 64.0);
        // Mean absolute deviation of a gaussian is sigma * sqrt(2/pi) ~ 6.4.
        assert!(
            (4.0..9.0).contains(&mean_abs),
            "mean abs deviation {mean_abs}"
        );
        assert_eq!(noisy_copy(&img, 0.0, 11), img);
    }

    #[test]
    fn deck_geometry_matches_its_ground_truth() {
        let deck = synthetic_deck(42);
        assert_eq!(deck.frames.len(), 10);
        assert_eq!(deck.timestamps_s.len(), 10);
        assert_eq!(deck.text_boxes.len(), 10);
        assert_eq!(deck.diagrams.len(), 4);
        assert_eq!(deck.transition_indices, vec![0, 3, 5, 8]);

        // Frames within a slide are identical; across a transition they
        // differ.
        assert_eq!(deck.frames[0], deck.frames[2]);
        assert_eq!(deck.frames[3], deck.frames[4]);
        assert_ne!(deck.frames[2], deck.frames[3]);
        assert_ne!(deck.frames[7], deck.frames[8]);

        // Durations: D0 spans slides 1+2 (3 s + 2 s), D1 slides 2+3
        // (2 s + 3 s), D2 slide 3, D3 slide 4.
        let durations: Vec<f64> = deck.diagrams.iter().map(|d| d.duration_s).collect();
        assert_eq!(durations, vec![5.0, 5.0, 3.0, 2.0]);
        let total: f64 = durations.iter().sum();
        assert_eq!(total, 15.0);

        // Planted boxes never collide with text lines.
        for d in &deck.diagrams {
            for boxes in &deck.text_boxes {
                for t in boxes {
                    assert!(!d.bbox.intersects(t), "diagram {:?} hits text {t:?}", d.bbox);
                }
            }
        }

        // Diagram pixels are planted verbatim in every listed frame.
        for d in &deck.diagrams {
            let tile = textured_image(d.bbox.w, d.bbox.h, d.texture_seed);
            for &f in &d.frames {
                let crop = deck.frames[f].crop(&d.bbox).unwrap();
                assert_eq!(crop, tile);
            }
        }

        assert_eq!(synthetic_deck(42).frames, deck.frames);
    }
}
