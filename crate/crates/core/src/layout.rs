//! Text removal, image-region discovery, and cross-frame object tracking.
//!
//! A transition frame is assumed to be a slide: uniform margins, text lines,
//! and rectangular visuals. Text is repainted with the background color so
//! downstream region discovery sees only images and empty space, connected
//! non-background regions become bounding boxes, and near-duplicate crops
//! across frames collapse into one object that accumulates display time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simile::{self, SimilarityConfig};
use crate::types::{BoundingBox, ImageObject, PixelBuffer, TransitionFrame};

/// Text boxes for one frame, produced by any external OCR tool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextAnnotation {
    pub frame_index: usize,
    pub boxes: Vec<BoundingBox>,
}

/// Reads a sidecar file holding a JSON array of per-frame text boxes.
pub fn load_text_annotations(path: &Path) -> Result<Vec<TextAnnotation>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!(
            "{} is not a text-annotation array: {e}",
            path.display()
        ))
    })
}

/// Knobs for background estimation, text grouping, region merging, and
/// duplicate tracking.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LayoutConfig {
    /// Per-channel distance from the estimated background color within which
    /// a pixel still counts as background.
    pub background_tolerance: u8,
    /// Regions closer than this (Chebyshev box gap) merge into one.
    pub merge_gap_px: u32,
    /// Boxes with a smaller pixel area are discarded as non-images.
    pub min_object_area_px: u64,
    /// Gap at or below which text components chain into lines and lines
    /// stack into blocks.
    pub text_group_gap_px: u32,
    /// Similarity at or above which two crops count as the same visual.
    pub dedupe_similarity: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            background_tolerance: 10,
            merge_gap_px: 12,
            min_object_area_px: 900,
            text_group_gap_px: 8,
            dedupe_similarity: 0.95,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.background_tolerance == 0 {
            return Err(Error::InvalidInput(
                "background_tolerance must be positive".into(),
            ));
        }
        if self.merge_gap_px == 0 {
            return Err(Error::InvalidInput("merge_gap_px must be positive".into()));
        }
        if self.min_object_area_px == 0 {
            return Err(Error::InvalidInput(
                "min_object_area_px must be positive".into(),
            ));
        }
        if self.text_group_gap_px == 0 {
            return Err(Error::InvalidInput(
                "text_group_gap_px must be positive".into(),
            ));
        }
        if !(self.dedupe_similarity > 0.0 && self.dedupe_similarity <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "dedupe_similarity {} outside (0, 1]",
                self.dedupe_similarity
            )));
        }
        Ok(())
    }
}

/// Modal color of the frame's border ring; slide margins are uniform, so the
/// mode is the canvas color. Ties break toward the smallest RGB triple.
pub fn estimate_background(frame: &PixelBuffer) -> [u8; 3] {
    let w = frame.width();
    let h = frame.height();
    let mut counts: BTreeMap<[u8; 3], u32> = BTreeMap::new();
    let bump = |x: u32, y: u32, counts: &mut BTreeMap<[u8; 3], u32>| {
        *counts.entry(frame.pixel(x, y)).or_insert(0) += 1;
    };
    for x in 0..w {
        bump(x, 0, &mut counts);
        if h > 1 {
            bump(x, h - 1, &mut counts);
        }
    }
    for y in 1..h.saturating_sub(1) {
        bump(0, y, &mut counts);
        if w > 1 {
            bump(w - 1, y, &mut counts);
        }
    }
    counts
        .iter()
        .max_by_key(|(_, &count)| count)
        .map(|(&color, _)| color)
        .expect("border ring is non-empty")
}

#[inline]
fn is_background(px: [u8; 3], bg: [u8; 3], tolerance: u8) -> bool {
    px.iter()
        .zip(bg)
        .all(|(&c, b)| c.abs_diff(b) <= tolerance)
}

/// One 8-connected region of non-background pixels.
struct Component {
    bbox: BoundingBox,
    mean_luma: f32,
}

fn connected_components(frame: &PixelBuffer, bg: [u8; 3], tolerance: u8) -> Vec<Component> {
    let w = frame.width() as usize;
    let h = frame.height() as usize;
    let luma = frame.to_gray();
    let mut foreground = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            foreground[y * w + x] = !is_background(frame.pixel(x as u32, y as u32), bg, tolerance);
        }
    }

    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !foreground[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut min_x, mut max_x) = (start % w, start % w);
        let (mut min_y, mut max_y) = (start / w, start / w);
        let mut luma_sum = 0.0f64;
        let mut count = 0u64;
        while let Some(idx) = stack.pop() {
            let x = idx % w;
            let y = idx / w;
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
            luma_sum += luma[idx] as f64;
            count += 1;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let nidx = ny as usize * w + nx as usize;
                    if foreground[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        components.push(Component {
            bbox: BoundingBox::new(
                min_x as u32,
                min_y as u32,
                (max_x - min_x + 1) as u32,
                (max_y - min_y + 1) as u32,
            )
            .expect("component has at least one pixel"),
            mean_luma: (luma_sum / count as f64) as f32,
        });
    }
    components
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            self.parent[i] = self.find(self.parent[i]);
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Rooting at the smaller index keeps group identity stable.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Luminance separation below which a component does not read as text on
/// the background.
const TEXT_CONTRAST_MIN: f32 = 32.0;

/// Finds text blocks without annotations: components small enough not to be
/// images chain into lines when they sit side by side within
/// `text_group_gap_px`, and lines stack into blocks at the same gap. A lone
/// small component never counts as text.
fn builtin_text_boxes(frame: &PixelBuffer, cfg: &LayoutConfig) -> Vec<BoundingBox> {
    let bg = estimate_background(frame);
    let bg_luma = 0.299 * bg[0] as f32 + 0.587 * bg[1] as f32 + 0.114 * bg[2] as f32;
    let glyphs: Vec<Component> = connected_components(frame, bg, cfg.background_tolerance)
        .into_iter()
        .filter(|c| {
            c.bbox.area() < cfg.min_object_area_px
                && (c.mean_luma - bg_luma).abs() >= TEXT_CONTRAST_MIN
        })
        .collect();

    // Side-by-side chaining into lines.
    let mut lines = UnionFind::new(glyphs.len());
    for i in 0..glyphs.len() {
        for j in i + 1..glyphs.len() {
            let (a, b) = (&glyphs[i].bbox, &glyphs[j].bbox);
            let rows_overlap = a.y < b.bottom() && b.y < a.bottom();
            let x_gap = if a.x < b.right() && b.x < a.right() {
                0
            } else if b.x >= a.right() {
                b.x - a.right()
            } else {
                a.x - b.right()
            };
            if rows_overlap && x_gap <= cfg.text_group_gap_px {
                lines.union(i, j);
            }
        }
    }
    let mut line_members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..glyphs.len() {
        line_members.entry(lines.find(i)).or_default().push(i);
    }
    let line_boxes: Vec<BoundingBox> = line_members
        .values()
        .filter(|members| members.len() >= 2)
        .map(|members| {
            members
                .iter()
                .map(|&i| glyphs[i].bbox)
                .reduce(|a, b| a.hull(&b))
                .expect("line has members")
        })
        .collect();

    // Nearby lines stack into one block.
    let mut blocks = UnionFind::new(line_boxes.len());
    for i in 0..line_boxes.len() {
        for j in i + 1..line_boxes.len() {
            if line_boxes[i].gap(&line_boxes[j]) <= cfg.text_group_gap_px {
                blocks.union(i, j);
            }
        }
    }
    let mut block_members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..line_boxes.len() {
        block_members.entry(blocks.find(i)).or_default().push(i);
    }
    let mut out: Vec<BoundingBox> = block_members
        .values()
        .map(|members| {
            members
                .iter()
                .map(|&i| line_boxes[i])
                .reduce(|a, b| a.hull(&b))
                .expect("block has members")
        })
        .collect();
    out.sort_by_key(|b| (b.y, b.x));
    out
}

/// Repaints text with the background color and records the covered boxes.
///
/// With an annotation the boxes are taken as given (they must fit in the
/// frame); without one the built-in detector finds them. Either way the
/// returned frame's `text_regions` holds the repainted boxes sorted by
/// (y, x), and a frame with no text comes back pixel-identical.
pub fn mask_text_regions(
    frame: &TransitionFrame,
    annotation: Option<&TextAnnotation>,
    cfg: &LayoutConfig,
) -> Result<TransitionFrame> {
    cfg.validate()?;
    let w = frame.pixels.width();
    let h = frame.pixels.height();
    let mut boxes = match annotation {
        Some(annotation) => {
            for b in &annotation.boxes {
                if !b.fits_within(w, h) {
                    return Err(Error::InvalidInput(format!(
                        "text box {b:?} for frame {} exceeds the {w}x{h} frame",
                        annotation.frame_index
                    )));
                }
            }
            annotation.boxes.clone()
        }
        None => builtin_text_boxes(&frame.pixels, cfg),
    };
    boxes.sort_by_key(|b| (b.y, b.x));

    let mut pixels = frame.pixels.clone();
    if !boxes.is_empty() {
        let bg = estimate_background(&frame.pixels);
        for b in &boxes {
            for y in b.y..b.bottom() {
                for x in b.x..b.right() {
                    pixels.set_pixel(x, y, bg);
                }
            }
        }
    }
    Ok(TransitionFrame {
        index: frame.index,
        timestamp_s: frame.timestamp_s,
        pixels,
        text_regions: boxes,
    })
}

/// Discovers image regions in a frame whose text is already masked.
///
/// Non-background pixels form 8-connected regions; regions closer than
/// `merge_gap_px` merge until stable; boxes below `min_object_area_px` or
/// touching a text region are dropped. Returns boxes sorted by (y, x).
pub fn extract_image_objects(frame: &TransitionFrame, cfg: &LayoutConfig) -> Vec<BoundingBox> {
    let bg = estimate_background(&frame.pixels);
    let mut boxes: Vec<BoundingBox> = connected_components(&frame.pixels, bg, cfg.background_tolerance)
        .into_iter()
        .map(|c| c.bbox)
        .collect();

    // Merging two boxes can pull a third within range, so run to fixpoint.
    loop {
        let mut merged_any = false;
        'scan: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].gap(&boxes[j]) < cfg.merge_gap_px {
                    let hull = boxes[i].hull(&boxes[j]);
                    boxes[i] = hull;
                    boxes.swap_remove(j);
                    merged_any = true;
                    break 'scan;
                }
            }
        }
        if !merged_any {
            break;
        }
    }

    boxes.retain(|b| {
        b.area() >= cfg.min_object_area_px
            && !frame.text_regions.iter().any(|t| b.intersects(t))
    });
    boxes.sort_by_key(|b| (b.y, b.x));
    boxes
}

/// Unifies near-duplicate crops across frames into [`ImageObject`]s.
///
/// A crop joins an existing object when it is pixel-identical to it or
/// reaches `dedupe_similarity`; otherwise it founds a new object. Ids run
/// 0..n-1 in first-appearance order, `bbox` and `source_frame` describe the
/// first appearance, and `duration_s` sums the durations of every frame the
/// visual appears in (at most once per frame).
pub fn track_objects(
    frames: &[TransitionFrame],
    boxes_per_frame: &[Vec<BoundingBox>],
    frame_durations_s: &[f64],
    cfg: &LayoutConfig,
    sim: &SimilarityConfig,
) -> Result<Vec<ImageObject>> {
    cfg.validate()?;
    sim.validate()?;
    if frames.len() != boxes_per_frame.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} box lists", frames.len()),
            actual: format!("{}", boxes_per_frame.len()),
        });
    }
    if frames.len() != frame_durations_s.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} frame durations", frames.len()),
            actual: format!("{}", frame_durations_s.len()),
        });
    }
    for (i, &d) in frame_durations_s.iter().enumerate() {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "frame {i} duration {d} is not a positive number of seconds"
            )));
        }
    }

    struct Tracked {
        object: ImageObject,
        keypoints: Vec<simile::Keypoint>,
        last_frame: usize,
    }
    let mut tracked: Vec<Tracked> = Vec::new();
    for (frame_pos, frame) in frames.iter().enumerate() {
        for bbox in &boxes_per_frame[frame_pos] {
            let crop = frame.pixels.crop(bbox)?;
            let keypoints = simile::extract_keypoints(&crop);
            let existing = tracked.iter().position(|t| {
                t.object.pixels.data() == crop.data()
                    && t.object.pixels.width() == crop.width()
                    || simile::similarity_with_keypoints(
                        &t.object.pixels,
                        &crop,
                        &t.keypoints,
                        &keypoints,
                        sim,
                    ) >= cfg.dedupe_similarity
            });
            match existing {
                Some(pos) => {
                    if tracked[pos].last_frame != frame_pos {
                        tracked[pos].object.duration_s += frame_durations_s[frame_pos];
                        tracked[pos].last_frame = frame_pos;
                    }
                }
                None => {
                    let object = ImageObject {
                        id: tracked.len(),
                        keypoint_count: keypoints.len(),
                        pixels: crop,
                        source_frame: frame.index,
                        bbox: *bbox,
                        duration_s: frame_durations_s[frame_pos],
                        area_px: bbox.area(),
                    };
                    tracked.push(Tracked {
                        object,
                        keypoints,
                        last_frame: frame_pos,
                    });
                }
            }
        }
    }
    Ok(tracked.into_iter().map(|t| t.object).collect())
}
