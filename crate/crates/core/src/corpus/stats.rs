use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Document, Vocabulary};

/// The five per-corpus quantities reported for each dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_texts: usize,
    pub total_tokens: u64,
    pub avg_tokens_per_text: f64,
    pub vocab_size: usize,
    pub avg_occurrences_per_token: f64,
    pub hate_proportion: f64,
}

impl CorpusStats {
    pub fn from_counts(num_texts: usize, total_tokens: u64, vocab_size: usize, num_hof: usize) -> Self {
        let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        CorpusStats {
            num_texts,
            total_tokens,
            avg_tokens_per_text: ratio(total_tokens as f64, num_texts as f64),
            vocab_size,
            avg_occurrences_per_token: ratio(total_tokens as f64, vocab_size as f64),
            hate_proportion: ratio(num_hof as f64, num_texts as f64),
        }
    }
}

/// `vocab_size` counts distinct token types as seen through `vocab`: every
/// in-vocabulary token that occurs, plus one type for all out-of-vocabulary
/// occurrences together.
pub fn corpus_stats(docs: &[Document], vocab: &Vocabulary) -> CorpusStats {
    let mut types = HashSet::new();
    let mut total = 0u64;
    for d in docs {
        for t in &d.tokens {
            types.insert(vocab.lookup(t));
            total += 1;
        }
    }
    let hof = docs.iter().filter(|d| d.label.is_hof()).count();
    CorpusStats::from_counts(docs.len(), total, types.len(), hof)
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "num_texts={}", self.num_texts)?;
        writeln!(f, "total_tokens={}", self.total_tokens)?;
        writeln!(f, "avg_tokens_per_text={:.4}", self.avg_tokens_per_text)?;
        writeln!(f, "vocab_size={}", self.vocab_size)?;
        writeln!(f, "avg_occurrences_per_token={:.4}", self.avg_occurrences_per_token)?;
        write!(f, "hate_proportion={:.4}", self.hate_proportion)
    }
}
