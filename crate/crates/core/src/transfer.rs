//! Cross-lingual transfer: put a new language's embedding under a trained
//! classifier and keep training with some parameter groups frozen.

use std::fmt;
use std::str::FromStr;

use crossling_tensor::init::xavier_uniform;
use crossling_tensor::{Parameter, Rng, Tensor};
use serde::{Deserialize, Serialize};

use crate::bundle::ClassifierBundle;
use crate::classifier::{train_classifier, ClassifierConfig, ClassifierModel, FreezeMask, Group, TrainRunResult};
use crate::corpus::{Document, Vocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Everything trains.
    NoFix,
    /// Only the new embedding trains.
    #[default]
    FixNonEmbedding,
    /// The embedding is frozen; blocks and head train.
    FixEmbedding,
}

impl TransferMode {
    pub const ALL: [TransferMode; 3] = [
        TransferMode::NoFix,
        TransferMode::FixNonEmbedding,
        TransferMode::FixEmbedding,
    ];

    pub fn freeze_mask(self) -> FreezeMask {
        match self {
            TransferMode::NoFix => FreezeMask::none(),
            TransferMode::FixNonEmbedding => FreezeMask::of(&[Group::Blocks, Group::Head]),
            TransferMode::FixEmbedding => FreezeMask::of(&[Group::Embedding]),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransferMode::NoFix => "no_fix",
            TransferMode::FixNonEmbedding => "fix_non_embedding",
            TransferMode::FixEmbedding => "fix_embedding",
        }
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransferMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown transfer mode {s:?}")))
    }
}

/// How the replacement embedding is initialized.
#[derive(Debug, Clone)]
pub enum EmbeddingInit {
    /// Rows taken from a pretrained matrix aligned with the target
    /// vocabulary.
    Pretrained(Tensor<f32>),
    /// Xavier-uniform rows drawn from the swap seed.
    XavierFresh,
}

/// Provenance attached to a transfer run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferRecord {
    pub mode: TransferMode,
    /// Content hash of the source classifier bundle.
    pub source_hash: String,
    pub target_vocab_size: usize,
}

/// Copy of `source` with its embedding replaced by one sized to
/// `target_vocab`. All other parameters are copied bit-exactly; every
/// optimizer moment is reset and nothing is frozen.
pub fn swap_embedding(
    source: &ClassifierModel,
    target_vocab: &Vocabulary,
    init: EmbeddingInit,
    seed: u64,
) -> Result<ClassifierModel> {
    let dim = source.dim();
    let table = match init {
        EmbeddingInit::Pretrained(t) => {
            if t.rank() != 2 || t.cols() != dim {
                return Err(Error::Config(format!(
                    "target embedding shape {:?} does not match model dim {dim}",
                    t.shape()
                )));
            }
            if t.rows() != target_vocab.len() {
                return Err(Error::Config(format!(
                    "target embedding has {} rows for a vocabulary of {}",
                    t.rows(),
                    target_vocab.len()
                )));
            }
            t
        }
        EmbeddingInit::XavierFresh => xavier_uniform(target_vocab.len(), dim, &mut Rng::with_stream(seed, 20))?,
    };
    let mut model = source.clone();
    *model.params.get_mut(model.embedding) = Parameter::new("embedding", table);
    for p in model.params.iter_mut() {
        p.reset_optimizer_state();
    }
    model.set_freeze(FreezeMask::none());
    Ok(model)
}

/// Training settings for a transfer run must keep the source architecture.
fn check_compatible(source: &ClassifierConfig, train: &ClassifierConfig) -> Result<()> {
    let same = source.arch == train.arch
        && source.block_count() == train.block_count()
        && source.heads == train.heads
        && source.max_len == train.max_len;
    if same {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "training config ({} x{} heads {} max_len {}) does not match the source classifier ({} x{} heads {} max_len {})",
            train.arch,
            train.block_count(),
            train.heads,
            train.max_len,
            source.arch,
            source.block_count(),
            source.heads,
            source.max_len
        )))
    }
}

/// Swaps the embedding, applies the mode's freeze mask and trains on the
/// target language. Optimization settings come from `train_config`.
#[allow(clippy::too_many_arguments)]
pub fn transfer_train(
    source: &ClassifierBundle,
    target_vocab: &Vocabulary,
    init: EmbeddingInit,
    target_train: &[Document],
    target_eval: &[Document],
    mode: TransferMode,
    train_config: &ClassifierConfig,
    seed: u64,
) -> Result<(ClassifierModel, TrainRunResult)> {
    check_compatible(&source.model.config, train_config)?;
    let mut model = swap_embedding(&source.model, target_vocab, init, seed)?;
    model.config = train_config.clone();
    model.set_freeze(mode.freeze_mask());
    let mut result = train_classifier(&mut model, target_train, target_eval, target_vocab, seed)?;
    result.transfer = Some(TransferRecord {
        mode,
        source_hash: source.content_hash()?,
        target_vocab_size: target_vocab.len(),
    });
    Ok((model, result))
}
