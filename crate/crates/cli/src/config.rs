//! One TOML file covering every pipeline stage.

use std::path::Path;

use anyhow::{bail, Context};
use lectsum::compose::GridSpec;
use lectsum::ingest::TransitionConfig;
use lectsum::layout::LayoutConfig;
use lectsum::simile::SimilarityConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SUMMARY_SIZE: usize = 4;

/// Aggregate run configuration. Every key is optional and falls back to the
/// stage defaults, so an empty file behaves exactly like no file. Unknown
/// top-level keys are rejected rather than silently ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Images in the composed summary.
    pub summary_size: usize,
    pub transition: TransitionConfig,
    pub layout: LayoutConfig,
    pub similarity: SimilarityConfig,
    pub grid: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            summary_size: DEFAULT_SUMMARY_SIZE,
            transition: TransitionConfig::default(),
            layout: LayoutConfig::default(),
            similarity: SimilarityConfig::default(),
            grid: GridSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.summary_size == 0 {
            bail!("summary_size must be at least 1");
        }
        self.transition.validate()?;
        self.layout.validate()?;
        self.similarity.validate()?;
        self.grid.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_equals_defaults() {
        let parsed: RunConfig = toml::from_str("").unwrap();
        assert_eq!(parsed, RunConfig::default());
        parsed.validate().unwrap();
    }

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let parsed: RunConfig = toml::from_str(
            "summary_size = 6\n\n[transition]\ndiff_threshold = 0.05\n\n[grid]\ncell_w = 160\n",
        )
        .unwrap();
        assert_eq!(parsed.summary_size, 6);
        assert_eq!(parsed.transition.diff_threshold, 0.05);
        assert_eq!(parsed.transition.dwell_frames, TransitionConfig::default().dwell_frames);
        assert_eq!(parsed.grid.cell_w, 160);
        assert_eq!(parsed.grid.cell_h, GridSpec::default().cell_h);
        parsed.validate().unwrap();
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let err = toml::from_str::<RunConfig>("summery_size = 4\n").unwrap_err();
        assert!(err.to_string().contains("summery_size"));
    }

    #[test]
    fn zero_summary_size_fails_validation() {
        let parsed: RunConfig = toml::from_str("summary_size = 0\n").unwrap();
        assert!(parsed.validate().is_err());
    }

    #[test]
    fn invalid_stage_value_fails_validation() {
        let parsed: RunConfig =
            toml::from_str("[similarity]\nratio_threshold = 1.5\n").unwrap();
        assert!(parsed.validate().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let config = RunConfig {
            summary_size: 5,
            ..RunConfig::default()
        };
        let text = toml::to_string(&config).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }
}
