//! End-to-end pipeline: frames in, composite summary out.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, ValueEnum};
use lectsum::compose;
use lectsum::ingest;
use lectsum::layout::{self, TextAnnotation};
use lectsum::rank;
use lectsum::select::{self, SelectionProblem};
use lectsum::simile::{self, cache};
use lectsum::types::{BoundingBox, DistanceMatrix, SelectionMethod, TransitionFrame};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Greedy,
    Exhaustive,
    Kmedoid,
}

impl MethodArg {
    fn to_method(self) -> SelectionMethod {
        match self {
            MethodArg::Greedy => SelectionMethod::Greedy,
            MethodArg::Exhaustive => SelectionMethod::Exhaustive,
            MethodArg::Kmedoid => SelectionMethod::Kmedoid,
        }
    }
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// One or more directories of segment frames (.png/.jpg named by
    /// seconds, or with a timing.json sidecar).
    #[arg(required = true, value_name = "FRAMES_DIR")]
    pub frames_dirs: Vec<PathBuf>,

    /// Output directory. A single segment writes its artifacts directly
    /// here; multiple segments nest under it by segment id.
    #[arg(long, short = 'o', value_name = "DIR")]
    pub out: PathBuf,

    /// TOML run configuration; unset keys use built-in defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Selection algorithm.
    #[arg(long, value_enum, default_value_t = MethodArg::Greedy)]
    pub method: MethodArg,

    /// Images in the summary; overrides the config file.
    #[arg(long, value_name = "N")]
    pub summary_size: Option<usize>,

    /// JSON sidecar of per-frame text boxes; without it a built-in detector
    /// finds the text. Single segment only.
    #[arg(long, value_name = "FILE")]
    pub text_annotations: Option<PathBuf>,

    /// Segment id recorded in the artifacts; defaults to the frames
    /// directory name. Single segment only.
    #[arg(long, value_name = "ID")]
    pub segment_id: Option<String>,

    /// Skip the diagnostics directory (distance matrix, importance vector,
    /// object crops).
    #[arg(long)]
    pub no_diagnostics: bool,

    /// Worker threads; defaults to the logical CPU count.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,

    /// Directory of reusable per-segment similarity results.
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
}

pub fn run(args: SummarizeArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(m) = args.summary_size {
        config.summary_size = m;
    }
    config.validate().map_err(Failure::Config)?;

    if args.frames_dirs.len() > 1 {
        if args.segment_id.is_some() {
            return Err(Failure::config(anyhow!(
                "--segment-id applies to a single frames directory"
            )));
        }
        if args.text_annotations.is_some() {
            return Err(Failure::config(anyhow!(
                "--text-annotations applies to a single frames directory"
            )));
        }
    }

    let segments: Vec<Segment> = args
        .frames_dirs
        .iter()
        .map(|dir| {
            let id = match &args.segment_id {
                Some(id) => id.clone(),
                None => default_segment_id(dir)?,
            };
            Ok(Segment {
                frames_dir: dir.clone(),
                segment_id: id,
            })
        })
        .collect::<Result<_, Failure>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for segment in &segments {
        if !seen.insert(segment.segment_id.as_str()) {
            return Err(Failure::config(anyhow!(
                "two frame directories share the segment id {}",
                segment.segment_id
            )));
        }
    }

    let annotations = match &args.text_annotations {
        Some(path) => Some(
            layout::load_text_annotations(path)
                .with_context(|| format!("text annotations {}", path.display()))?,
        ),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(Failure::config)?;

    let ctx = SegmentContext {
        config: &config,
        method: args.method,
        annotations: annotations.as_deref(),
        cache_dir: args.cache.as_deref(),
        diagnostics: !args.no_diagnostics,
    };

    if let [segment] = segments.as_slice() {
        pool.install(|| run_segment(segment, &args.out, &ctx))?;
        return Ok(());
    }

    let failures: Vec<String> = pool.install(|| {
        segments
            .par_iter()
            .filter_map(|segment| {
                let out_dir = args.out.join(&segment.segment_id);
                match run_segment(segment, &out_dir, &ctx) {
                    Ok(()) => None,
                    Err(err) => Some(format!("{}: {err:#}", segment.segment_id)),
                }
            })
            .collect()
    });
    if !failures.is_empty() {
        for line in &failures {
            eprintln!("{line}");
        }
        return Err(Failure::Stage(anyhow!(
            "{} of {} segments failed",
            failures.len(),
            segments.len()
        )));
    }
    Ok(())
}

struct Segment {
    frames_dir: PathBuf,
    segment_id: String,
}

struct SegmentContext<'a> {
    config: &'a RunConfig,
    method: MethodArg,
    annotations: Option<&'a [TextAnnotation]>,
    cache_dir: Option<&'a Path>,
    diagnostics: bool,
}

fn default_segment_id(dir: &Path) -> Result<String, Failure> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .ok_or_else(|| {
            Failure::config(anyhow!(
                "cannot derive a segment id from {}; pass --segment-id",
                dir.display()
            ))
        })
}

/// Reproducibility record written next to every summary.
#[derive(Serialize)]
struct RunRecord<'a> {
    segment_id: &'a str,
    method: SelectionMethod,
    #[serde(flatten)]
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ObjectRecord {
    id: usize,
    source_frame: usize,
    bbox: BoundingBox,
    duration_s: f64,
    area_px: u64,
    keypoint_count: usize,
}

#[derive(Serialize)]
struct TransitionRecord<'a> {
    index: usize,
    timestamp_s: f64,
    text_regions: &'a [BoundingBox],
}

fn run_segment(segment: &Segment, out_dir: &Path, ctx: &SegmentContext) -> anyhow::Result<()> {
    let config = ctx.config;
    let frames = ingest::load_frame_directory(&segment.frames_dir)?;
    let transitions = ingest::detect_transitions(&frames, &config.transition)?;
    let durations =
        ingest::transition_durations(&transitions, frames.segment_end_estimate_s())?;

    let masked: Vec<TransitionFrame> = transitions
        .iter()
        .map(|frame| {
            let annotation = ctx
                .annotations
                .and_then(|all| all.iter().find(|a| a.frame_index == frame.index));
            layout::mask_text_regions(frame, annotation, &config.layout)
        })
        .collect::<lectsum::Result<_>>()?;
    let boxes_per_frame: Vec<Vec<BoundingBox>> = masked
        .iter()
        .map(|frame| layout::extract_image_objects(frame, &config.layout))
        .collect();
    let objects = layout::track_objects(
        &masked,
        &boxes_per_frame,
        &durations,
        &config.layout,
        &config.similarity,
    )?;
    if objects.is_empty() {
        bail!(
            "no image objects survive text masking and the {}px minimum area",
            config.layout.min_object_area_px
        );
    }

    let importance = rank::importance_of_objects(&objects)?;
    let distances = load_or_build_distances(segment, ctx, &objects)?;
    let problem = SelectionProblem::new(distances, importance, config.summary_size)?;
    let summary = match ctx.method {
        MethodArg::Greedy => select::greedy(&problem, &segment.segment_id),
        MethodArg::Exhaustive => select::exhaustive(&problem, &segment.segment_id)?,
        MethodArg::Kmedoid => select::k_medoids(&problem, &segment.segment_id),
    };

    let images: Vec<_> = summary
        .selected
        .iter()
        .map(|&id| objects[id].pixels.clone())
        .collect();
    let grid = compose::compose_grid(&images, &config.grid)?;
    compose::write_summary_artifacts(&summary, &grid, out_dir)?;
    write_json(
        &out_dir.join("run.json"),
        &RunRecord {
            segment_id: &segment.segment_id,
            method: ctx.method.to_method(),
            config,
        },
    )?;

    if ctx.diagnostics {
        write_diagnostics(out_dir, &masked, &objects, &problem)?;
    }

    println!(
        "{}: {} frames, {} transitions, {} objects -> {} images ({})",
        segment.segment_id,
        frames.len(),
        masked.len(),
        objects.len(),
        summary.selected.len(),
        out_dir.join("summary.png").display()
    );
    Ok(())
}

/// The pairwise matrix is the expensive stage, so it is the unit of caching:
/// one entry per segment, keyed by object pixels and similarity knobs.
fn load_or_build_distances(
    segment: &Segment,
    ctx: &SegmentContext,
    objects: &[lectsum::ImageObject],
) -> anyhow::Result<DistanceMatrix> {
    let Some(cache_dir) = ctx.cache_dir else {
        return Ok(simile::build_distance_matrix(objects, &ctx.config.similarity)?);
    };
    let key = cache::cache_key(objects, &ctx.config.similarity);
    let path = cache_dir.join(format!("{}.json", segment.segment_id));
    if let Some(hit) = cache::SimilarityCache::lookup(&path, &key)
        .with_context(|| format!("similarity cache {}", path.display()))?
    {
        return Ok(hit.distances);
    }
    let distances = simile::build_distance_matrix(objects, &ctx.config.similarity)?;
    let entry = cache::SimilarityCache {
        key,
        keypoint_counts: objects.iter().map(|o| o.keypoint_count).collect(),
        distances: distances.clone(),
    };
    entry
        .store(&path)
        .with_context(|| format!("similarity cache {}", path.display()))?;
    Ok(distances)
}

fn write_diagnostics(
    out_dir: &Path,
    masked: &[TransitionFrame],
    objects: &[lectsum::ImageObject],
    problem: &SelectionProblem,
) -> anyhow::Result<()> {
    let dir = out_dir.join("diagnostics");
    std::fs::create_dir_all(dir.join("objects"))?;

    write_json(&dir.join("distance_matrix.json"), problem.distances())?;
    write_json(&dir.join("importance.json"), problem.importance())?;

    let object_records: Vec<ObjectRecord> = objects
        .iter()
        .map(|o| ObjectRecord {
            id: o.id,
            source_frame: o.source_frame,
            bbox: o.bbox,
            duration_s: o.duration_s,
            area_px: o.area_px,
            keypoint_count: o.keypoint_count,
        })
        .collect();
    write_json(&dir.join("objects.json"), &object_records)?;

    let transition_records: Vec<TransitionRecord> = masked
        .iter()
        .map(|f| TransitionRecord {
            index: f.index,
            timestamp_s: f.timestamp_s,
            text_regions: &f.text_regions,
        })
        .collect();
    write_json(&dir.join("transitions.json"), &transition_records)?;

    for object in objects {
        let png = compose::encode_png(&object.pixels)?;
        compose::write_atomic(&dir.join("objects").join(format!("object_{:03}.png", object.id)), &png)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    compose::write_atomic(path, text.as_bytes())?;
    Ok(())
}
