//! Shared data model for the summarization pipeline: rasters, detected frames
//! and objects, pairwise-distance and importance containers, and the summary
//! manifest that ties a selection result back to its segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Color channels per pixel. All rasters are interleaved 8-bit RGB.
pub const CHANNELS: usize = 3;

/// Owned interleaved-RGB raster. `data.len() == width * height * CHANNELS`,
/// both dimensions nonzero.
#[derive(Clone, PartialEq, Eq)]
pub struct PixelBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PixelBuffer({}x{})", self.width, self.height)
    }
}

impl PixelBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "pixel buffer dimensions must be nonzero, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} bytes for {width}x{height} RGB"),
                actual: format!("{} bytes", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Solid-color buffer.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data).expect("nonzero dims")
    }

    /// Builds a buffer by evaluating `f(x, y)` for every pixel in row-major order.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data).expect("nonzero dims")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies the region covered by `bbox`, which must lie inside the buffer.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<PixelBuffer> {
        if !bbox.fits_within(self.width, self.height) {
            return Err(Error::InvalidInput(format!(
                "crop {bbox:?} exceeds buffer {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(bbox.w as usize * bbox.h as usize * CHANNELS);
        for y in bbox.y..bbox.y + bbox.h {
            let start = (y as usize * self.width as usize + bbox.x as usize) * CHANNELS;
            let end = start + bbox.w as usize * CHANNELS;
            data.extend_from_slice(&self.data[start..end]);
        }
        PixelBuffer::new(bbox.w, bbox.h, data)
    }

    /// Rec. 601 luma plane in [0, 255].
    pub fn to_gray(&self) -> Vec<f32> {
        self.data
            .chunks_exact(CHANNELS)
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect()
    }
}

/// Axis-aligned rectangle in pixel coordinates; `w` and `h` are at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput(format!(
                "bounding box must have nonzero extent, got {w}x{h}"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// One past the rightmost column.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    /// One past the bottom row.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    /// Smallest box covering both rectangles.
    pub fn hull(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let right = self.right().max(other.right());
        let bottom = self.bottom().max(other.bottom());
        BoundingBox {
            x,
            y,
            w: right - x,
            h: bottom - y,
        }
    }

    /// Chebyshev gap between two boxes: the larger of the horizontal and
    /// vertical separations, 0 when they touch or overlap on that axis.
    pub fn gap(&self, other: &BoundingBox) -> u32 {
        let h_gap = if self.right() <= other.x {
            other.x - self.right()
        } else if other.right() <= self.x {
            self.x - other.right()
        } else {
            0
        };
        let v_gap = if self.bottom() <= other.y {
            other.y - self.bottom()
        } else if other.bottom() <= self.y {
            self.y - other.bottom()
        } else {
            0
        };
        h_gap.max(v_gap)
    }
}

/// A frame at which the slide content changed, annotated with any detected or
/// supplied text regions. `index` is the emission ordinal within the segment.
#[derive(Clone, Debug)]
pub struct TransitionFrame {
    pub index: usize,
    pub timestamp_s: f64,
    pub pixels: PixelBuffer,
    pub text_regions: Vec<BoundingBox>,
}

/// A distinct visual tracked across the transition frames of one segment.
/// `duration_s` accumulates the display time of every frame the visual
/// appears in; `bbox` and `source_frame` describe its first appearance.
#[derive(Clone, Debug)]
pub struct ImageObject {
    pub id: usize,
    pub pixels: PixelBuffer,
    pub source_frame: usize,
    pub bbox: BoundingBox,
    pub duration_s: f64,
    pub area_px: u64,
    pub keypoint_count: usize,
}

/// Symmetric pairwise-distance matrix with a zero diagonal and entries in
/// [0, 1]. Stored row-major; serialized as nested rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("distance matrix of zero images".into()));
        }
        Ok(Self {
            n,
            values: vec![0.0; n * n],
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("distance matrix of zero images".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} columns"),
                    actual: format!("row {i} has {}", row.len()),
                });
            }
            values.extend_from_slice(row);
        }
        let matrix = Self { n, values };
        matrix.validate()?;
        Ok(matrix)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i * n + j];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "distance [{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "distance diagonal [{i}][{i}] = {v}, must be 0"
                    )));
                }
                if self.values[j * n + i] != v {
                    return Err(Error::InvalidInput(format!(
                        "distance matrix asymmetric at [{i}][{j}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Writes the same value to both `[i][j]` and `[j][i]`, keeping the
    /// matrix exactly symmetric. Panics on the diagonal with nonzero `v`.
    pub fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i != j || v == 0.0,
            "diagonal of a distance matrix must stay 0"
        );
        assert!(v.is_finite() && (0.0..=1.0).contains(&v), "distance {v} outside [0, 1]");
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.values[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

impl Serialize for DistanceMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DistanceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        DistanceMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Per-image importance scores, one per image id, each in (0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceVector {
    values: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("importance vector of zero images".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 || *v > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "importance [{i}] = {v} outside (0, 1]"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl Serialize for ImportanceVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ImportanceVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        ImportanceVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// Strategy that produced a summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Greedy,
    Exhaustive,
    Kmedoid,
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SelectionMethod::Greedy => "greedy",
            SelectionMethod::Exhaustive => "exhaustive",
            SelectionMethod::Kmedoid => "kmedoid",
        };
        f.write_str(name)
    }
}

/// Result of selecting `selected.len()` representative images for a segment.
/// Ids are distinct; `objective` is the residual coverage cost of the chosen
/// set (0 when every image was selected).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SummaryRaw")]
pub struct Summary {
    pub segment_id: String,
    pub method: SelectionMethod,
    pub selected: Vec<usize>,
    pub objective: f64,
}

#[derive(Deserialize)]
struct SummaryRaw {
    segment_id: String,
    method: SelectionMethod,
    selected: Vec<usize>,
    objective: f64,
}

impl TryFrom<SummaryRaw> for Summary {
    type Error = Error;

    fn try_from(raw: SummaryRaw) -> Result<Self> {
        let summary = Summary {
            segment_id: raw.segment_id,
            method: raw.method,
            selected: raw.selected,
            objective: raw.objective,
        };
        summary.validate()?;
        Ok(summary)
    }
}

impl Summary {
    pub fn validate(&self) -> Result<()> {
        if self.selected.is_empty() {
            return Err(Error::schema("selected", "summary selects no images"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.selected {
            if !seen.insert(*id) {
                return Err(Error::schema(
                    "selected",
                    format!("image id {id} listed more than once"),
                ));
            }
        }
        if !self.objective.is_finite() || self.objective < 0.0 {
            return Err(Error::schema(
                "objective",
                format!("objective {} must be finite and non-negative", self.objective),
            ));
        }
        Ok(())
    }
}
