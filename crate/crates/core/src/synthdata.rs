//! Deterministic synthetic bilingual corpora.
//!
//! Each text draws its background tokens from one topic block, so words of
//! the same block co-occur. HOF texts additionally contain at least one
//! token from a toxic lexicon; NOT texts contain none. Language B is
//! language A passed through a fixed token bijection, so both languages
//! carry identical labels and structure with disjoint surface forms.

use serde::{Deserialize, Serialize};

use crossling_tensor::Rng;

use crate::corpus::{Label, RawRecord, Split};
use crate::eval::TranslationPair;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Background words per language.
    pub vocab_size: usize,
    /// Number of topic blocks the background vocabulary is split into.
    pub num_topics: usize,
    pub num_train: usize,
    pub num_test: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub toxic_lexicon_size: usize,
    /// Per-position chance of a toxic token in a HOF text.
    pub toxic_insert_prob: f64,
    pub hate_proportion: f64,
    pub seed: u64,
    pub prefix_a: String,
    pub prefix_b: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 400,
            num_topics: 8,
            num_train: 4665,
            num_test: 1318,
            min_len: 6,
            max_len: 14,
            toxic_lexicon_size: 20,
            toxic_insert_prob: 0.15,
            hate_proportion: 0.5,
            seed: 0,
            prefix_a: "la".into(),
            prefix_b: "lb".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth: {m}")));
        if self.vocab_size == 0 || self.num_topics == 0 || self.vocab_size < self.num_topics {
            return bad(format!(
                "need 1 <= num_topics <= vocab_size, got {} topics over {} words",
                self.num_topics, self.vocab_size
            ));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad(format!("bad length range {}..={}", self.min_len, self.max_len));
        }
        if !(0.0..=1.0).contains(&self.hate_proportion) || !(0.0..=1.0).contains(&self.toxic_insert_prob) {
            return bad("hate_proportion and toxic_insert_prob must lie in [0, 1]".into());
        }
        if self.hate_proportion > 0.0 && self.toxic_lexicon_size == 0 {
            return bad("HOF texts requested but the toxic lexicon is empty".into());
        }
        for p in [&self.prefix_a, &self.prefix_b] {
            if p.is_empty() || !p.chars().all(|c| c.is_ascii_lowercase()) {
                return bad(format!("prefix {p:?} must be non-empty lowercase ASCII letters"));
            }
        }
        if self.prefix_a.starts_with(&self.prefix_b) || self.prefix_b.starts_with(&self.prefix_a) {
            return bad("language prefixes must not overlap".into());
        }
        if self.num_train + self.num_test == 0 {
            return bad("no texts requested".into());
        }
        Ok(())
    }

    /// Topic block of background word `idx`.
    pub fn topic_of(&self, idx: usize) -> usize {
        idx * self.num_topics / self.vocab_size
    }

    fn block(&self, topic: usize) -> std::ops::Range<usize> {
        let lo = (topic * self.vocab_size).div_ceil(self.num_topics);
        let hi = ((topic + 1) * self.vocab_size).div_ceil(self.num_topics);
        lo..hi
    }
}

/// Background word `idx` of a language.
pub fn word(prefix: &str, idx: usize) -> String {
    format!("{prefix}w{idx}")
}

/// Toxic lexicon entry `idx` of a language.
pub fn toxic(prefix: &str, idx: usize) -> String {
    format!("{prefix}t{idx}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train_a: Vec<RawRecord>,
    pub test_a: Vec<RawRecord>,
    pub train_b: Vec<RawRecord>,
    pub test_b: Vec<RawRecord>,
    /// Every language-A token with its language-B image.
    pub bijection: Vec<TranslationPair>,
    pub lexicon_a: Vec<String>,
    pub lexicon_b: Vec<String>,
}

impl SynthCorpus {
    /// Maps a language-A text to language B.
    pub fn translate(&self, text: &str) -> String {
        let map: std::collections::HashMap<&str, &str> = self
            .bijection
            .iter()
            .map(|p| (p.source_word.as_str(), p.target_word.as_str()))
            .collect();
        text.split(' ').map(|t| map.get(t).copied().unwrap_or(t)).collect::<Vec<_>>().join(" ")
    }
}

/// The rule that defines the labels: HOF iff any token is in `lexicon`.
pub fn oracle_label(text: &str, lexicon: &[String]) -> Label {
    if text.split_whitespace().any(|t| lexicon.iter().any(|l| l == t)) {
        Label::Hof
    } else {
        Label::Not
    }
}

fn permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}

/// Token indices of one text; toxic entries are offset by `vocab_size`.
fn generate_text(cfg: &SynthConfig, hof: bool, rng: &mut Rng) -> Vec<usize> {
    let topic = rng.below(cfg.num_topics);
    let block = cfg.block(topic);
    let len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    let mut toks: Vec<usize> = (0..len)
        .map(|_| block.start + rng.below(block.len()))
        .collect();
    if hof {
        let lex = cfg.toxic_lexicon_size;
        let mut any = false;
        for t in toks.iter_mut() {
            if rng.bernoulli(cfg.toxic_insert_prob) {
                *t = cfg.vocab_size + rng.below(lex);
                any = true;
            }
        }
        if !any {
            let pos = rng.below(len);
            toks[pos] = cfg.vocab_size + rng.below(lex);
        }
    }
    toks
}

fn split_records(
    cfg: &SynthConfig,
    n: usize,
    split: Split,
    rng: &mut Rng,
    perm: &[usize],
) -> (Vec<RawRecord>, Vec<RawRecord>) {
    let n_hof = (cfg.hate_proportion * n as f64).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_hof).collect();
    rng.shuffle(&mut labels);
    let tag = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let name = |prefix: &str, idx: usize| {
        if idx < cfg.vocab_size {
            word(prefix, idx)
        } else {
            toxic(prefix, idx - cfg.vocab_size)
        }
    };
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for (i, &hof) in labels.iter().enumerate() {
        let toks = generate_text(cfg, hof, rng);
        let label = if hof { Label::Hof } else { Label::Not };
        let text_a: Vec<String> = toks.iter().map(|&t| name(&cfg.prefix_a, t)).collect();
        let text_b: Vec<String> = toks.iter().map(|&t| name(&cfg.prefix_b, perm[t])).collect();
        a.push(RawRecord {
            id: format!("{}-{tag}-{i}", cfg.prefix_a),
            text: text_a.join(" "),
            label,
            split,
        });
        b.push(RawRecord {
            id: format!("{}-{tag}-{i}", cfg.prefix_b),
            text: text_b.join(" "),
            label,
            split,
        });
    }
    (a, b)
}

/// Builds both languages' train and test sets. Each split has exactly
/// `round(hate_proportion * n)` HOF texts.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut perm_rng = Rng::with_stream(cfg.seed, 0);
    // background words map within their topic block, toxic words within
    // the lexicon, so B keeps A's structure
    let mut perm = vec![0usize; cfg.vocab_size + cfg.toxic_lexicon_size];
    for topic in 0..cfg.num_topics {
        let block = cfg.block(topic);
        let p = permutation(block.len(), &mut perm_rng);
        for (i, &j) in p.iter().enumerate() {
            perm[block.start + i] = block.start + j;
        }
    }
    let p = permutation(cfg.toxic_lexicon_size, &mut perm_rng);
    for (i, &j) in p.iter().enumerate() {
        perm[cfg.vocab_size + i] = cfg.vocab_size + j;
    }

    let mut rng = Rng::with_stream(cfg.seed, 1);
    let (train_a, train_b) = split_records(cfg, cfg.num_train, Split::Train, &mut rng, &perm);
    let (test_a, test_b) = split_records(cfg, cfg.num_test, Split::Test, &mut rng, &perm);

    let mut bijection = Vec::with_capacity(perm.len());
    for (i, &j) in perm.iter().enumerate() {
        let (concept, src, dst) = if i < cfg.vocab_size {
            (format!("w{i}"), word(&cfg.prefix_a, i), word(&cfg.prefix_b, j))
        } else {
            let (i, j) = (i - cfg.vocab_size, j - cfg.vocab_size);
            (format!("t{i}"), toxic(&cfg.prefix_a, i), toxic(&cfg.prefix_b, j))
        };
        bijection.push(TranslationPair {
            concept,
            source_word: src,
            target_word: dst,
        });
    }
    let lexicon = |prefix: &str| (0..cfg.toxic_lexicon_size).map(|i| toxic(prefix, i)).collect();
    Ok(SynthCorpus {
        train_a,
        test_a,
        train_b,
        test_b,
        bijection,
        lexicon_a: lexicon(&cfg.prefix_a),
        lexicon_b: lexicon(&cfg.prefix_b),
    })
}
