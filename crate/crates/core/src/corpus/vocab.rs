use std::collections::HashMap;

use super::Document;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// Bidirectional token/id map with occurrence counts.
///
/// Ids `0..num_specials` hold `<PAD>`, `<UNK>` and any `<NUMd>` bins seen in
/// the corpus (ascending `d`); ordinary tokens follow in descending count,
/// ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    num_specials: usize,
}

fn number_bin_width(token: &str) -> Option<usize> {
    token
        .strip_prefix("<NUM")?
        .strip_suffix('>')?
        .parse()
        .ok()
}

/// Builds a vocabulary from tokenized documents, keeping tokens that occur
/// at least `min_count` times. Pruned occurrences are counted under `<UNK>`.
pub fn build_vocab(docs: &[Document], min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be >= 1".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in docs.iter().flat_map(|d| d.tokens.iter()) {
        *freq.entry(t.as_str()).or_default() += 1;
    }
    if freq.is_empty() {
        return Err(Error::Data("empty corpus: no tokens to build a vocabulary from".into()));
    }

    let mut bins: Vec<(usize, &str, u64)> = freq
        .iter()
        .filter_map(|(&t, &c)| number_bin_width(t).map(|d| (d, t, c)))
        .collect();
    bins.sort();

    let mut words: Vec<(&str, u64)> = freq
        .iter()
        .filter(|(t, _)| number_bin_width(t).is_none() && **t != PAD_TOKEN && **t != UNK_TOKEN)
        .map(|(&t, &c)| (t, c))
        .collect();
    let pruned: u64 = words.iter().filter(|(_, c)| *c < min_count).map(|(_, c)| c).sum::<u64>()
        + freq.get(UNK_TOKEN).copied().unwrap_or(0);
    words.retain(|(_, c)| *c >= min_count);
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut counts = vec![0, pruned];
    for (_, t, c) in &bins {
        tokens.push(t.to_string());
        counts.push(*c);
    }
    for (t, c) in words {
        tokens.push(t.to_string());
        counts.push(c);
    }
    Vocabulary::from_parts(tokens, counts)
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered tokens and counts (e.g. when
    /// loading a bundle). The first two tokens must be `<PAD>` and `<UNK>`.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::Data(format!(
                "{} tokens but {} counts",
                tokens.len(),
                counts.len()
            )));
        }
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Data("vocabulary must start with <PAD>, <UNK>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let num_specials = 2 + tokens[2..]
            .iter()
            .take_while(|t| number_bin_width(t).is_some())
            .count();
        Ok(Vocabulary {
            tokens,
            index,
            counts,
            num_specials,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_specials(&self) -> usize {
        self.num_specials
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`] when absent.
    pub fn lookup(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }
}
