//! Optional TOML run configuration. Command-line flags take precedence.

use std::path::Path;

use ncc_core::abstraction::AbstractionConfig;
use ncc_core::{Error, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub k_neighbors: Option<usize>,
    pub rg_trials: Option<usize>,
    pub jobs: Option<usize>,
    pub baselines: Option<Vec<String>>,
    pub variant: Option<String>,
    #[serde(default)]
    pub abstraction: AbstractionSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionSection {
    pub tree_depth: Option<usize>,
    pub similarity_threshold: Option<f64>,
    pub max_children: Option<usize>,
    /// `false` disables the built-in masking rules.
    pub masks: Option<bool>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format("config", e.to_string()))
    }

    pub fn abstraction(&self) -> Result<AbstractionConfig> {
        let a = &self.abstraction;
        let mut config = if a.masks == Some(false) {
            AbstractionConfig::without_masks()
        } else {
            AbstractionConfig::default()
        };
        if let Some(d) = a.tree_depth {
            config.tree_depth = d;
        }
        if let Some(t) = a.similarity_threshold {
            config.similarity_threshold = t;
        }
        if let Some(c) = a.max_children {
            config.max_children = c;
        }
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c: RunConfig = toml::from_str(
            "seed = 3\nbaselines = [\"rg\"]\n[abstraction]\ntree_depth = 5\nmasks = false\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        let a = c.abstraction().unwrap();
        assert_eq!(a.tree_depth, 5);
        assert!(a.mask_rules.is_empty());
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        let bad: RunConfig = toml::from_str("[abstraction]\nsimilarity_threshold = 0.0").unwrap();
        assert!(bad.abstraction().is_err());
    }
}
