//! Training and evaluation pipeline for binary hate-speech classification
//! in low-resource languages.
//!
//! The stages mirror how the toolkit is used end to end:
//!
//! * [`corpus`]: TSV ingestion, cleaning, whitespace tokenization,
//!   vocabularies, corpus statistics and stratified sampling.
//! * [`embeddings`]: skip-gram word vectors, trained either with a full
//!   softmax or with negative sampling.
//! * [`classifier`]: attention classifier (baseline and encoder-stack
//!   variants) and its training loop.
//! * [`transfer`]: embedding-layer swap onto a trained classifier with
//!   configurable freezing.
//! * [`eval`]: accuracy, macro-F1, multi-run aggregation and the
//!   cross-lingual cosine ranking probe.
//! * [`synthdata`]: deterministic synthetic bilingual corpora.
//! * [`bundle`]: on-disk model bundles.

pub mod bundle;
pub mod classifier;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod synthdata;
pub mod transfer;

pub use error::{Error, Result};
