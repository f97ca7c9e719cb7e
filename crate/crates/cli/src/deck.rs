//! Write the synthetic slide deck to disk in the exact layout `summarize`
//! consumes: numbered PNG frames, a timing sidecar, text-box annotations,
//! and the planted ground truth for checking results.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use lectsum::compose;
use lectsum::layout::TextAnnotation;
use lectsum::synth;
use lectsum::types::BoundingBox;
use serde::Serialize;

use crate::summarize::write_json;
use crate::Failure;

#[derive(Args)]
pub struct GenDeckArgs {
    /// Directory to write the deck into.
    #[arg(long, short = 'o', value_name = "DIR")]
    pub out: PathBuf,

    /// Texture seed; each seed plants different diagram content.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Serialize)]
struct DiagramRecord {
    bbox: BoundingBox,
    frames: Vec<usize>,
    duration_s: f64,
}

#[derive(Serialize)]
struct DeckTruth {
    seed: u64,
    transition_indices: Vec<usize>,
    diagrams: Vec<DiagramRecord>,
}

pub fn run(args: GenDeckArgs) -> Result<(), Failure> {
    let deck = synth::synthetic_deck(args.seed);
    std::fs::create_dir_all(&args.out)?;

    let mut timing = BTreeMap::new();
    for (i, frame) in deck.frames.iter().enumerate() {
        let name = format!("frame_{i:03}.png");
        let png = compose::encode_png(frame)?;
        compose::write_atomic(&args.out.join(&name), &png)?;
        timing.insert(name, deck.timestamps_s[i]);
    }
    write_json(&args.out.join("timing.json"), &timing)?;

    let annotations: Vec<TextAnnotation> = deck
        .text_boxes
        .iter()
        .enumerate()
        .map(|(frame_index, boxes)| TextAnnotation {
            frame_index,
            boxes: boxes.clone(),
        })
        .collect();
    write_json(&args.out.join("annotations.json"), &annotations)?;

    let truth = DeckTruth {
        seed: args.seed,
        transition_indices: deck.transition_indices.clone(),
        diagrams: deck
            .diagrams
            .iter()
            .map(|d| DiagramRecord {
                bbox: d.bbox,
                frames: d.frames.clone(),
                duration_s: d.duration_s,
            })
            .collect(),
    };
    write_json(&args.out.join("truth.json"), &truth)?;

    let (w, h) = (deck.frames[0].width(), deck.frames[0].height());
    println!(
        "wrote {} frames ({w}x{h}), timing.json, annotations.json, truth.json to {}",
        deck.frames.len(),
        args.out.display()
    );
    Ok(())
}
