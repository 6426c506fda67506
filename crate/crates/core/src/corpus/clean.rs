use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which cleaning rules to apply before whitespace tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub strip_mentions: bool,
    pub strip_urls: bool,
    pub strip_punctuation: bool,
    pub lowercase_latin: bool,
    pub keep_hashtags: bool,
    pub drop_stopwords: bool,
    pub bin_numbers: bool,
    #[serde(default)]
    pub stopwords: BTreeSet<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self::enhanced()
    }
}

impl CleaningConfig {
    /// Mentions, punctuation, Latin lowercasing and stopwords; hashtags kept.
    pub fn baseline() -> Self {
        CleaningConfig {
            strip_mentions: true,
            strip_urls: false,
            strip_punctuation: true,
            lowercase_latin: true,
            keep_hashtags: true,
            drop_stopwords: true,
            bin_numbers: false,
            stopwords: BTreeSet::new(),
        }
    }

    /// Baseline plus URL removal and number binning.
    pub fn enhanced() -> Self {
        CleaningConfig {
            strip_urls: true,
            bin_numbers: true,
            ..Self::baseline()
        }
    }

    pub fn with_stopwords(mut self, stopwords: impl IntoIterator<Item = String>) -> Self {
        self.stopwords = stopwords.into_iter().collect();
        self
    }
}

/// One token per line; blank lines and surrounding whitespace ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Unicode punctuation plus the ASCII symbol characters.
    RE.get_or_init(|| Regex::new(r"[\p{P}$+<=>^`|~]").expect("valid regex"))
}

fn digits() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{Nd}+$").expect("valid regex"))
}

fn is_url(token: &str) -> bool {
    let head: String = token.chars().take(8).collect::<String>().to_lowercase();
    head.starts_with("http://") || head.starts_with("https://") || head.starts_with("www.")
}

fn is_latin_letter(c: char) -> bool {
    c.is_alphabetic()
        && matches!(c as u32,
            0x41..=0x5A | 0x61..=0x7A | 0xC0..=0x24F | 0x1E00..=0x1EFF | 0xFF21..=0xFF3A)
}

fn lowercase_latin(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        if is_latin_letter(c) {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Applies the enabled cleaning rules and rejoins surviving tokens with
/// single spaces. Idempotent under both presets.
pub fn clean_text(raw: &str, config: &CleaningConfig) -> String {
    let punct = punctuation();
    let mut kept: Vec<String> = Vec::new();
    for token in raw.split_whitespace() {
        if config.strip_mentions && token.starts_with('@') {
            continue;
        }
        if config.strip_urls && is_url(token) {
            continue;
        }
        let mut tok = if config.strip_punctuation {
            match token.strip_prefix('#') {
                Some(rest) if config.keep_hashtags => {
                    let rest = punct.replace_all(rest, "");
                    if rest.is_empty() {
                        String::new()
                    } else {
                        format!("#{rest}")
                    }
                }
                _ => punct.replace_all(token, "").into_owned(),
            }
        } else {
            token.to_string()
        };
        if config.lowercase_latin {
            tok = lowercase_latin(&tok);
        }
        if !tok.is_empty() {
            kept.push(tok);
        }
    }
    kept.join(" ")
}

/// `"0"`, `"1"` and `"2"` pass through; any other all-digit token becomes
/// `<NUMd>` where `d` is its digit count.
pub fn bin_number_token(token: &str) -> String {
    if matches!(token, "0" | "1" | "2") || !digits().is_match(token) {
        token.to_string()
    } else {
        format!("<NUM{}>", token.chars().count())
    }
}

/// Whitespace split, then number binning, then stopword removal.
pub fn tokenize(cleaned: &str, config: &CleaningConfig) -> Vec<String> {
    cleaned
        .split_whitespace()
        .map(|t| {
            if config.bin_numbers {
                bin_number_token(t)
            } else {
                t.to_string()
            }
        })
        .filter(|t| !(config.drop_stopwords && config.stopwords.contains(t)))
        .collect()
}
