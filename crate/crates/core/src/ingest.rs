//! Frame loading and transition detection.
//!
//! A segment arrives as a directory of still frames (video decoding happens
//! upstream with any external tool). Loading normalizes everything to 8-bit
//! RGB, and transition detection reduces the sequence to the frames where
//! the scene actually changes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PixelBuffer, TransitionFrame};

/// One loaded frame with its presentation time.
#[derive(Clone, Debug)]
pub struct FrameEntry {
    pub timestamp_s: f64,
    pub pixels: PixelBuffer,
}

/// Ordered, uniformly sized frames of one video segment.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    entries: Vec<FrameEntry>,
}

impl FrameSequence {
    /// Validates and wraps loaded frames: non-empty, strictly increasing
    /// timestamps, uniform dimensions.
    pub fn new(entries: Vec<FrameEntry>) -> Result<FrameSequence> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("frame sequence".into()));
        }
        for entry in &entries {
            if !entry.timestamp_s.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite frame timestamp {}", entry.timestamp_s)));
            }
        }
        for pair in entries.windows(2) {
            if pair[1].timestamp_s <= pair[0].timestamp_s {
                return Err(Error::InvalidInput(format!(
                        "frame timestamps not strictly increasing: {} then {}",
                        pair[0].timestamp_s, pair[1].timestamp_s
                    )));
            }
        }
        let w = entries[0].pixels.width();
        let h = entries[0].pixels.height();
        for (i, entry) in entries.iter().enumerate() {
            if entry.pixels.width() != w || entry.pixels.height() != h {
                return Err(Error::DimensionMismatch {
                    expected: format!("{w}x{h} (frame 0)"),
                    actual: format!(
                        "{}x{} (frame {i})",
                        entry.pixels.width(),
                        entry.pixels.height()
                    ),
                });
            }
        }
        Ok(FrameSequence { entries })
    }

    pub fn entries(&self) -> &[FrameEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// End of the segment on the time axis. Frames carry start times only,
    /// so the final frame is assumed to stay up for the median inter-frame
    /// gap (one second for a single-frame segment).
    pub fn segment_end_estimate_s(&self) -> f64 {
        let last = self.entries.last().expect("sequence is non-empty").timestamp_s;
        if self.entries.len() < 2 {
            return last + 1.0;
        }
        let mut gaps: Vec<f64> = self
            .entries
            .windows(2)
            .map(|pair| pair[1].timestamp_s - pair[0].timestamp_s)
            .collect();
        gaps.sort_by(f64::total_cmp);
        let mid = gaps.len() / 2;
        let median = if gaps.len() % 2 == 1 {
            gaps[mid]
        } else {
            (gaps[mid - 1] + gaps[mid]) / 2.0
        };
        last + median
    }
}

/// Knobs for the scene-change scan.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TransitionConfig {
    /// Mean absolute RGB difference above which two frames count as
    /// different scenes, as a fraction of full scale.
    pub diff_threshold: f64,
    /// Consecutive samples a new scene must persist before it is emitted.
    pub dwell_frames: usize,
    /// Scan every n-th frame.
    pub sample_stride: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            diff_threshold: 0.02,
            dwell_frames: 2,
            sample_stride: 1,
        }
    }
}

impl TransitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.diff_threshold > 0.0 && self.diff_threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                    "diff_threshold must be in (0, 1), got {}",
                    self.diff_threshold
                )));
        }
        if self.dwell_frames < 1 {
            return Err(Error::InvalidInput("dwell_frames must be at least 1".into()));
        }
        if self.sample_stride < 1 {
            return Err(Error::InvalidInput("sample_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean absolute per-channel difference, normalized to [0, 1]. Zero exactly
/// when the buffers are identical; a pseudometric on equal-size buffers.
pub fn frame_distance(a: &PixelBuffer, b: &PixelBuffer) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    let total: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| u64::from(x.abs_diff(y)))
        .sum();
    Ok(total as f64 / (255.0 * a.data().len() as f64))
}

/// Reduces a frame sequence to its scene changes.
///
/// The first frame is always a transition. After that, a sampled frame that
/// differs from the previous transition by more than `diff_threshold` opens a
/// candidate scene; the candidate is emitted once `dwell_frames` consecutive
/// samples (itself included) stay within the threshold of it. Emitted
/// timestamps are those of the first frame of each stable run, so a
/// single-sample glitch never becomes a transition.
pub fn detect_transitions(
    frames: &FrameSequence,
    cfg: &TransitionConfig,
) -> Result<Vec<TransitionFrame>> {
    cfg.validate()?;
    let entries = frames.entries();
    let mut transitions = vec![TransitionFrame {
        index: 0,
        timestamp_s: entries[0].timestamp_s,
        pixels: entries[0].pixels.clone(),
        text_regions: Vec::new(),
    }];

    // Index of the scene opener awaiting confirmation, with the number of
    // samples (opener included) that have stayed on it.
    let mut candidate: Option<(usize, usize)> = None;
    let mut last_emitted = 0usize;
    let mut i = cfg.sample_stride;
    while i < entries.len() {
        let pixels = &entries[i].pixels;
        match candidate {
            Some((start, seen)) => {
                if frame_distance(pixels, &entries[start].pixels)? <= cfg.diff_threshold {
                    if seen + 1 >= cfg.dwell_frames {
                        transitions.push(TransitionFrame {
                            index: start,
                            timestamp_s: entries[start].timestamp_s,
                            pixels: entries[start].pixels.clone(),
                            text_regions: Vec::new(),
                        });
                        last_emitted = start;
                        candidate = None;
                    } else {
                        candidate = Some((start, seen + 1));
                    }
                } else if frame_distance(pixels, &entries[last_emitted].pixels)?
                    > cfg.diff_threshold
                {
                    // The scene moved again before settling; restart on the
                    // newer frame.
                    candidate = open_candidate(&mut transitions, entries, i, cfg);
                    if candidate.is_none() {
                        last_emitted = i;
                    }
                } else {
                    // Returned to the emitted scene: the candidate was a
                    // glitch.
                    candidate = None;
                }
            }
            None => {
                if frame_distance(pixels, &entries[last_emitted].pixels)? > cfg.diff_threshold {
                    candidate = open_candidate(&mut transitions, entries, i, cfg);
                    if candidate.is_none() {
                        last_emitted = i;
                    }
                }
            }
        }
        i += cfg.sample_stride;
    }
    Ok(transitions)
}

/// Starts tracking frame `i` as a scene opener, emitting it immediately when
/// a single sample of persistence suffices.
fn open_candidate(
    transitions: &mut Vec<TransitionFrame>,
    entries: &[FrameEntry],
    i: usize,
    cfg: &TransitionConfig,
) -> Option<(usize, usize)> {
    if cfg.dwell_frames == 1 {
        transitions.push(TransitionFrame {
            index: i,
            timestamp_s: entries[i].timestamp_s,
            pixels: entries[i].pixels.clone(),
            text_regions: Vec::new(),
        });
        None
    } else {
        Some((i, 1))
    }
}

/// Seconds each transition frame stays on screen: the gap to the next
/// transition, and for the last one the gap to the segment end.
pub fn transition_durations(
    transitions: &[TransitionFrame],
    segment_end_s: f64,
) -> Result<Vec<f64>> {
    if transitions.is_empty() {
        return Err(Error::EmptyInput("transition list".into()));
    }
    let last = transitions.last().expect("non-empty");
    if segment_end_s <= last.timestamp_s {
        return Err(Error::InvalidInput(format!(
                "segment end {} s is not after the last transition at {} s",
                segment_end_s, last.timestamp_s
            )));
    }
    let mut durations = Vec::with_capacity(transitions.len());
    for pair in transitions.windows(2) {
        durations.push(pair[1].timestamp_s - pair[0].timestamp_s);
    }
    durations.push(segment_end_s - last.timestamp_s);
    Ok(durations)
}

/// Loads `frames/<name>.png|jpg` into a timestamp-sorted sequence.
///
/// Timestamps come from a `timing.json` sidecar (a map of filename to
/// seconds) when present, else each file's stem is parsed as seconds.
/// Everything is normalized to 8-bit RGB: alpha dropped, grayscale
/// replicated.
pub fn load_frame_directory(dir: &Path) -> Result<FrameSequence> {
    let listing = std::fs::read_dir(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", dir.display())))?;
    let mut image_paths = Vec::new();
    for entry in listing {
        let entry = entry
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", dir.display())))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            image_paths.push(path);
        }
    }
    if image_paths.is_empty() {
        return Err(Error::EmptyInput(format!("no .png or .jpg frames in {}", dir.display())));
    }
    image_paths.sort();

    let timing = load_timing_sidecar(dir)?;
    let mut entries = Vec::with_capacity(image_paths.len());
    for path in &image_paths {
        let file_name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let timestamp_s = match &timing {
            Some(map) => *map.get(&file_name).ok_or_else(|| Error::InvalidInput(format!("timing.json has no entry for {file_name}")))?,
            None => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                stem.parse::<f64>().map_err(|_| Error::InvalidInput(format!(
                        "frame name {file_name} does not encode seconds and no timing.json is present"
                    )))?
            }
        };
        let decoded = image::open(path).map_err(|e| Error::InvalidInput(format!("cannot decode {}: {e}", path.display())))?;
        let rgb = decoded.to_rgb8();
        let pixels = PixelBuffer::new(rgb.width(), rgb.height(), rgb.into_raw())?;
        entries.push(FrameEntry {
            timestamp_s,
            pixels,
        });
    }
    entries.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
    FrameSequence::new(entries)
}

fn load_timing_sidecar(dir: &Path) -> Result<Option<BTreeMap<String, f64>>> {
    let path = dir.join("timing.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let map: BTreeMap<String, f64> =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("timing.json is not a filename-to-seconds map: {e}")))?;
    Ok(Some(map))
}
