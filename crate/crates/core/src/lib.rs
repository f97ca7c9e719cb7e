//! Visual summarization of lecture screencast segments.
//!
//! The pipeline turns a directory of video frames into a single composite
//! image of the segment's most representative visuals:
//!
//! 1. [`ingest`]: load frames and detect slide transitions.
//! 2. [`layout`]: mask text, extract and track distinct image objects.
//! 3. [`simile`]: keypoint-based pairwise similarity between objects.
//! 4. [`rank`]: importance from size, information density, and display time.
//! 5. [`select`]: pick the representative subset.
//! 6. [`compose`]: render the selection as a grid and write artifacts.
//!
//! [`evalkit`] scores summaries against viewer surveys, and [`synth`]
//! generates deterministic synthetic fixtures for tests and demos.

pub mod error;
pub mod compose;
pub mod ingest;
pub mod layout;
pub mod evalkit;
pub mod rank;
pub mod select;
pub mod simile;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    BoundingBox, DistanceMatrix, ImageObject, ImportanceVector, PixelBuffer, SelectionMethod,
    Summary, TransitionFrame,
};
