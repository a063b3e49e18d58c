//! Run configuration: a TOML file with one table per stage.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! gazetteer = "terms.txt"
//! output = "run"
//!
//! [split]
//! train = 0.7
//! validation = 0.15
//! test = 0.15
//!
//! [embeddings]
//! dim = 100
//!
//! [crf]
//! epochs = 300
//! ```
//!
//! Every key is optional. A top-level `seed` overrides the seed of every
//! stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierConfig;
use crate::corpus::SplitRatios;
use crate::crf::CrfConfig;
use crate::embeddings::SkipgramConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// JSON-lines documents; the pipeline generates a synthetic corpus when
    /// unset.
    pub corpus: Option<PathBuf>,
    /// One term per line; the bundled list when unset.
    pub gazetteer: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub split: SplitRatios,
    pub synth: SynthConfig,
    pub embeddings: SkipgramConfig,
    pub classifier: ClassifierConfig,
    pub crf: CrfConfig,
}

impl Default for RunConfig {
    /// Settings that train all three stages on the default synthetic corpus
    /// in well under a minute.
    fn default() -> Self {
        RunConfig {
            seed: None,
            paths: Paths::default(),
            split: SplitRatios::default(),
            synth: SynthConfig::default(),
            embeddings: SkipgramConfig { dim: 50, epochs: 10, ..SkipgramConfig::default() },
            classifier: ClassifierConfig::default(),
            crf: CrfConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut config: RunConfig = toml::from_str(text)?;
        if let Some(seed) = config.seed {
            config.set_seed(seed);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.embeddings.seed = seed;
        self.classifier.seed = seed;
        self.crf.seed = seed;
    }

    /// Seed used for balancing and splitting.
    pub fn data_seed(&self) -> u64 {
        self.seed.unwrap_or(self.synth.seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.split.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.embeddings.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.classifier.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.crf.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for path in [&self.paths.corpus, &self.paths.gazetteer].into_iter().flatten() {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_and_seed() {
        let c = RunConfig::from_toml(
            "seed = 9\n[embeddings]\ndim = 8\n[crf]\nepochs = 3\n[crf.features]\nngram_max = 3\n[split]\ntrain = 0.8\nvalidation = 0.1\ntest = 0.1\n",
        )
        .unwrap();
        assert_eq!((c.embeddings.dim, c.embeddings.seed, c.classifier.seed), (8, 9, 9));
        assert_eq!((c.crf.epochs, c.crf.features.ngram_max, c.crf.features.ngram_min), (3, 3, 2));
        assert_eq!(c.split.train, 0.8);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.set_seed(3);
        c.paths.output = Some("out".into());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects() {
        assert!(matches!(RunConfig::from_toml("[crf]\nepoch = 3\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml("seed = \"x\""), Err(ConfigError::Parse(_))));
        let bad = RunConfig::from_toml("[split]\ntrain = 0.9\nvalidation = 0.2\ntest = 0.1\n").unwrap();
        assert!(bad.validate().is_err());
        let missing = RunConfig::from_toml("[paths]\ngazetteer = \"/nonexistent/terms.txt\"\n").unwrap();
        assert!(missing.validate().is_err());
    }
}
