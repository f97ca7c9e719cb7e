//! Summary-frame rendering and artifact output.
//!
//! Selected images land on a uniform grid of padded cells, scaled to fit
//! without distortion, in selection order, row-major. Artifacts are written
//! through temp-file renames so a crash never leaves half a file behind.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PixelBuffer, Summary};

/// Geometry of the composed summary frame.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GridSpec {
    pub cell_w: u32,
    pub cell_h: u32,
    pub padding_px: u32,
    pub background: [u8; 3],
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cell_w: 320,
            cell_h: 240,
            padding_px: 8,
            background: [255, 255, 255],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cell_w == 0 || self.cell_h == 0 {
            return Err(Error::InvalidInput(format!(
                "grid cells must have positive dimensions, got {}x{}",
                self.cell_w, self.cell_h
            )));
        }
        Ok(())
    }

    /// Columns for `m` images: the smallest square-ish grid, ceil(sqrt(m)).
    pub fn columns_for(m: usize) -> usize {
        (1..).find(|c| c * c >= m).expect("every m has a root")
    }
}

/// Scales `img` to fit `(max_w, max_h)` preserving aspect ratio, bilinear.
/// The returned dimensions are at least 1 pixel on each side.
fn scale_to_fit(img: &PixelBuffer, max_w: u32, max_h: u32) -> PixelBuffer {
    let scale = (max_w as f64 / img.width() as f64).min(max_h as f64 / img.height() as f64);
    let out_w = ((img.width() as f64 * scale).round() as u32).clamp(1, max_w);
    let out_h = ((img.height() as f64 * scale).round() as u32).clamp(1, max_h);
    if out_w == img.width() && out_h == img.height() {
        return img.clone();
    }
    PixelBuffer::from_fn(out_w, out_h, |x, y| {
        // Map the output pixel's center back into source coordinates.
        let sx = (x as f64 + 0.5) * img.width() as f64 / out_w as f64 - 0.5;
        let sy = (y as f64 + 0.5) * img.height() as f64 / out_h as f64 - 0.5;
        let sx = sx.clamp(0.0, (img.width() - 1) as f64);
        let sy = sy.clamp(0.0, (img.height() - 1) as f64);
        let x0 = sx.floor() as u32;
        let y0 = sy.floor() as u32;
        let x1 = (x0 + 1).min(img.width() - 1);
        let y1 = (y0 + 1).min(img.height() - 1);
        let tx = sx - x0 as f64;
        let ty = sy - y0 as f64;
        let mut out = [0u8; 3];
        for c in 0..3 {
            let top = img.pixel(x0, y0)[c] as f64 * (1.0 - tx) + img.pixel(x1, y0)[c] as f64 * tx;
            let bottom =
                img.pixel(x0, y1)[c] as f64 * (1.0 - tx) + img.pixel(x1, y1)[c] as f64 * tx;
            out[c] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
        }
        out
    })
}

/// Renders images onto a ceil(sqrt(m))-column grid of padded cells.
///
/// Each image is scaled to its cell preserving aspect ratio and centered;
/// cells fill row-major in input order and leftover cells stay background.
/// Output size is exactly cols*(cell_w+padding)+padding wide and
/// rows*(cell_h+padding)+padding tall.
pub fn compose_grid(images: &[PixelBuffer], spec: &GridSpec) -> Result<PixelBuffer> {
    spec.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyInput("no images to compose".into()));
    }
    let cols = GridSpec::columns_for(images.len());
    let rows = images.len().div_ceil(cols);
    let width = cols as u32 * (spec.cell_w + spec.padding_px) + spec.padding_px;
    let height = rows as u32 * (spec.cell_h + spec.padding_px) + spec.padding_px;

    let mut canvas = PixelBuffer::filled(width, height, spec.background);
    for (slot, image) in images.iter().enumerate() {
        let col = (slot % cols) as u32;
        let row = (slot / cols) as u32;
        let cell_x = spec.padding_px + col * (spec.cell_w + spec.padding_px);
        let cell_y = spec.padding_px + row * (spec.cell_h + spec.padding_px);
        let scaled = scale_to_fit(image, spec.cell_w, spec.cell_h);
        let off_x = cell_x + (spec.cell_w - scaled.width()) / 2;
        let off_y = cell_y + (spec.cell_h - scaled.height()) / 2;
        for y in 0..scaled.height() {
            for x in 0..scaled.width() {
                canvas.set_pixel(off_x + x, off_y + y, scaled.pixel(x, y));
            }
        }
    }
    Ok(canvas)
}

/// Encodes a buffer as 8-bit RGB PNG bytes.
pub fn encode_png(frame: &PixelBuffer) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut bytes);
    image::ImageEncoder::write_image(
        encoder,
        frame.data(),
        frame.width(),
        frame.height(),
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(bytes)
}

/// Writes `bytes` to `path` atomically: a temp file in the same directory is
/// renamed over the target, so the target is never partially written.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut temp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot write in {}: {e}", dir.display())))?;
    std::io::Write::write_all(&mut temp, bytes)?;
    temp.persist(path)
        .map_err(|e| Error::InvalidInput(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// Writes `summary.png` and `summary.json` under `out_dir`, returning their
/// paths. Both writes are atomic and byte-stable for identical inputs.
pub fn write_summary_artifacts(
    summary: &Summary,
    frame: &PixelBuffer,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", out_dir.display())))?;
    let png_path = out_dir.join("summary.png");
    let json_path = out_dir.join("summary.json");

    write_atomic(&png_path, &encode_png(frame)?)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;
    Ok((png_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::types::SelectionMethod;

    #[test]
    fn columns_follow_square_root() {
        let cases = [(1, 1), (2, 2), (4, 2), (5, 3), (9, 3), (10, 4)];
        for (m, cols) in cases {
            assert_eq!(GridSpec::columns_for(m), cols, "m = {m}");
        }
    }

    #[test]
    fn single_image_fills_a_padded_cell() {
        let spec = GridSpec::default();
        // Same aspect ratio as the cell, so the scaled image fills it.
        let img = synth::textured_image(640, 480, 3);
        let out = compose_grid(&[img], &spec).unwrap();
        assert_eq!(out.width(), 320 + 16);
        assert_eq!(out.height(), 240 + 16);
        // Padding ring stays background.
        for x in 0..out.width() {
            assert_eq!(out.pixel(x, 0), [255, 255, 255]);
            assert_eq!(out.pixel(x, out.height() - 1), [255, 255, 255]);
        }
    }

    #[test]
    fn four_images_make_a_two_by_two_grid() {
        let spec = GridSpec::default();
        let images: Vec<_> = (0..4).map(|i| synth::textured_image(320, 240, i)).collect();
        let out = compose_grid(&images, &spec).unwrap();
        assert_eq!(out.width(), 2 * 328 + 8);
        assert_eq!(out.height(), 2 * 248 + 8);
        // Cell-sized inputs land verbatim; check one pixel per quadrant.
        assert_eq!(out.pixel(8, 8), images[0].pixel(0, 0));
        assert_eq!(out.pixel(8 + 328, 8), images[1].pixel(0, 0));
        assert_eq!(out.pixel(8, 8 + 248), images[2].pixel(0, 0));
        assert_eq!(out.pixel(8 + 328, 8 + 248), images[3].pixel(0, 0));
    }

    #[test]
    fn three_images_leave_one_background_cell() {
        let spec = GridSpec::default();
        let images: Vec<_> = (0..3)
            .map(|_| synth::solid_image(320, 240, [10, 20, 30]))
            .collect();
        let out = compose_grid(&images, &spec).unwrap();
        assert_eq!(out.width(), 2 * 328 + 8);
        assert_eq!(out.height(), 2 * 248 + 8);
        // Fourth cell (row 1, col 1) stays white.
        let x0 = 8 + 328;
        let y0 = 8 + 248;
        for dy in [0, 120, 239] {
            for dx in [0, 160, 319] {
                assert_eq!(out.pixel(x0 + dx, y0 + dy), [255, 255, 255]);
            }
        }
    }

    #[test]
    fn aspect_ratio_is_preserved_and_centered() {
        let spec = GridSpec::default();
        // A 2:1 strip in a 4:3 cell scales to 320x160 and centers with
        // 40 px of background above and below.
        let img = synth::solid_image(640, 320, [50, 60, 70]);
        let out = compose_grid(&[img], &spec).unwrap();
        assert_eq!(out.pixel(8 + 160, 8 + 39), [255, 255, 255]);
        assert_eq!(out.pixel(8 + 160, 8 + 40), [50, 60, 70]);
        assert_eq!(out.pixel(8 + 160, 8 + 199), [50, 60, 70]);
        assert_eq!(out.pixel(8 + 160, 8 + 200), [255, 255, 255]);

        let ratio_in: f64 = 640.0 / 320.0;
        let ratio_out: f64 = 320.0 / 160.0;
        assert!((ratio_in - ratio_out).abs() < 1e-9);
    }

    #[test]
    fn tiny_and_huge_inputs_stay_inside_their_cells() {
        let spec = GridSpec::default();
        for (w, h) in [(1, 100), (100, 1), (5000, 3), (3, 5000)] {
            let img = synth::solid_image(w, h, [1, 2, 3]);
            let out = compose_grid(&[img], &spec).unwrap();
            assert_eq!(out.width(), 336);
            assert_eq!(out.height(), 256);
        }
    }

    #[test]
    fn composition_is_deterministic() {
        let images: Vec<_> = (0..3).map(|i| synth::textured_image(200, 150, i)).collect();
        let a = compose_grid(&images, &GridSpec::default()).unwrap();
        let b = compose_grid(&images, &GridSpec::default()).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn empty_input_and_zero_cells_are_rejected() {
        assert!(compose_grid(&[], &GridSpec::default()).is_err());
        let bad = GridSpec {
            cell_w: 0,
            ..GridSpec::default()
        };
        let img = synth::solid_image(8, 8, [0, 0, 0]);
        assert!(compose_grid(&[img], &bad).is_err());
    }

    fn sample_summary() -> Summary {
        Summary {
            segment_id: "seg-1".into(),
            method: SelectionMethod::Greedy,
            selected: vec![2, 0, 5],
            objective: 0.25,
        }
    }

    #[test]
    fn artifacts_round_trip_and_rerun_identically() {
        let dir = tempfile::tempdir().unwrap();
        let summary = sample_summary();
        let frame = compose_grid(
            &[synth::textured_image(100, 80, 1)],
            &GridSpec::default(),
        )
        .unwrap();

        let (png_path, json_path) =
            write_summary_artifacts(&summary, &frame, dir.path()).unwrap();
        let png_first = std::fs::read(&png_path).unwrap();
        let json_first = std::fs::read(&json_path).unwrap();

        let parsed: Summary =
            serde_json::from_slice(&json_first).expect("manifest re-parses");
        assert_eq!(parsed, summary);
        assert!(json_first.ends_with(b"\n"));

        write_summary_artifacts(&summary, &frame, dir.path()).unwrap();
        assert_eq!(std::fs::read(&png_path).unwrap(), png_first);
        assert_eq!(std::fs::read(&json_path).unwrap(), json_first);

        let decoded = image::load_from_memory(&png_first).unwrap().to_rgb8();
        assert_eq!(decoded.width(), frame.width());
        assert_eq!(decoded.as_raw().as_slice(), frame.data());
    }

    #[test]
    fn unusable_out_dir_leaves_no_partial_files() {
        // A regular file occupies the output path, which fails regardless
        // of process privileges (unlike permission bits under root).
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        std::fs::write(&target, b"in the way").unwrap();

        let frame = synth::solid_image(8, 8, [0, 0, 0]);
        let result = write_summary_artifacts(&sample_summary(), &frame, &target);
        assert!(result.is_err());
        assert_eq!(std::fs::read(&target).unwrap(), b"in the way");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
