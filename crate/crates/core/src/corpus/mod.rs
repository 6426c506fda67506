//! Dataset ingestion and text preprocessing.

mod clean;
mod dataset;
mod stats;
mod vocab;

pub use clean::{bin_number_token, clean_text, load_stopwords, tokenize, CleaningConfig};
pub use dataset::{load_dataset, stratified_sample, write_dataset, Label, RawRecord, Split};
pub use stats::{corpus_stats, CorpusStats};
pub use vocab::{build_vocab, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

/// A cleaned, tokenized text with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label: Label,
}

impl Document {
    pub fn from_record(record: &RawRecord, config: &CleaningConfig) -> Self {
        Document {
            tokens: tokenize(&clean_text(&record.text, config), config),
            label: record.label,
        }
    }
}

pub fn preprocess(records: &[RawRecord], config: &CleaningConfig) -> Vec<Document> {
    records
        .iter()
        .map(|r| Document::from_record(r, config))
        .collect()
}
