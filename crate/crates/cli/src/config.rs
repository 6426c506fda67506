//! Experiment configuration file (TOML). Every section is optional and
//! falls back to its defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use crossling_core::classifier::ClassifierConfig;
use crossling_core::corpus::CleaningConfig;
use crossling_core::embeddings::EmbeddingConfig;
use crossling_core::synthdata::SynthConfig;
use crossling_core::transfer::TransferMode;
use crossling_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub seeds: SeedConfig,
    pub cleaning: CleaningConfig,
    pub vocab: VocabConfig,
    pub embedding: EmbeddingConfig,
    pub classifier: ClassifierConfig,
    pub transfer: TransferConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Whether the TSV files start with a header row.
    pub has_header: bool,
    /// One stopword per line, merged into `cleaning.stopwords`.
    pub stopwords: Option<PathBuf>,
    /// Embedding bundle for `train-clf`.
    pub embedding: Option<PathBuf>,
    /// Source classifier bundle for `transfer`.
    pub source: Option<PathBuf>,
    /// Target-language embedding bundle for `transfer`.
    pub target_embedding: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    /// Run `r` uses seed `base + r`.
    pub base: u64,
    pub runs: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig { base: 0, runs: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub min_count: u64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { min_count: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetInit {
    /// Use the center matrix of a target-language embedding bundle.
    #[default]
    Pretrained,
    XavierFresh,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub mode: TransferMode,
    pub init: TargetInit,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn runs(&self) -> Vec<u64> {
        (0..self.seeds.runs as u64).map(|r| self.seeds.base + r).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.runs == 0 {
            return Err(Error::Config("seeds.runs must be >= 1".into()));
        }
        if self.vocab.min_count == 0 {
            return Err(Error::Config("vocab.min_count must be >= 1".into()));
        }
        self.embedding.validate()?;
        self.classifier.validate_settings()?;
        self.synth.validate()
    }

    /// Cleaning rules with the stopword file, if any, merged in.
    pub fn resolved_cleaning(&self) -> Result<CleaningConfig> {
        let mut c = self.cleaning.clone();
        if let Some(p) = &self.data.stopwords {
            c.stopwords.extend(crossling_core::corpus::load_stopwords(p)?);
        }
        Ok(c)
    }

    pub fn train_path(&self) -> Result<&Path> {
        required(&self.data.train, "data.train")
    }

    pub fn test_path(&self) -> Result<&Path> {
        required(&self.data.test, "data.test")
    }
}

pub fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is not set (config file or command-line flag)")))
}
