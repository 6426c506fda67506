//! On-disk model bundles: a directory holding `manifest.toml`, the
//! vocabulary (`vocab.txt`, `counts.txt`) and one `.lxt` file per tensor.
//!
//! Files are produced from the in-memory bundle in a fixed order, so the
//! same bundle always serializes to the same bytes and
//! [`EmbeddingBundle::content_hash`] / [`ClassifierBundle::content_hash`]
//! identify it independently of where it is stored.

use std::fs;
use std::path::Path;

use crossling_tensor::{io as tio, ParamStore, Parameter};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ClassifierConfig, ClassifierModel, FreezeMask};
use crate::corpus::{CleaningConfig, Vocabulary};
use crate::embeddings::{EmbeddingConfig, SkipGramModel};
use crate::transfer::TransferRecord;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.toml";
const VOCAB: &str = "vocab.txt";
const COUNTS: &str = "counts.txt";

type Files = Vec<(String, Vec<u8>)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Embedding,
    Classifier,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    kind: BundleKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingManifest {
    format_version: u32,
    kind: BundleKind,
    seed: u64,
    dim: usize,
    vocab_size: usize,
    vocab_file: String,
    counts_file: String,
    center_file: String,
    context_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    replay_config: Option<String>,
    embedding: EmbeddingConfig,
    cleaning: CleaningConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierManifest {
    format_version: u32,
    kind: BundleKind,
    seed: u64,
    dim: usize,
    vocab_size: usize,
    vocab_file: String,
    counts_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    replay_config: Option<String>,
    classifier: ClassifierConfig,
    cleaning: CleaningConfig,
    freeze: FreezeMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transfer: Option<TransferRecord>,
    tensors: Vec<TensorEntry>,
}

/// Trained skip-gram model with the vocabulary and settings that produced
/// it.
#[derive(Debug, Clone)]
pub struct EmbeddingBundle {
    pub vocab: Vocabulary,
    pub model: SkipGramModel,
    pub config: EmbeddingConfig,
    pub cleaning: CleaningConfig,
    pub seed: u64,
    /// Full resolved experiment configuration, for replay.
    pub replay_config: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ClassifierBundle {
    pub vocab: Vocabulary,
    pub model: ClassifierModel,
    pub cleaning: CleaningConfig,
    pub seed: u64,
    pub transfer: Option<TransferRecord>,
    pub replay_config: Option<String>,
}

fn vocab_files(vocab: &Vocabulary) -> Files {
    let mut tokens = String::new();
    let mut counts = String::new();
    for (t, c) in vocab.tokens().iter().zip(vocab.counts()) {
        tokens.push_str(t);
        tokens.push('\n');
        counts.push_str(&c.to_string());
        counts.push('\n');
    }
    vec![
        (VOCAB.to_string(), tokens.into_bytes()),
        (COUNTS.to_string(), counts.into_bytes()),
    ]
}

fn read_vocab(dir: &Path, vocab_file: &str, counts_file: &str) -> Result<Vocabulary> {
    let tokens: Vec<String> = read_text(&dir.join(vocab_file))?.lines().map(str::to_string).collect();
    let counts = read_text(&dir.join(counts_file))?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.parse::<u64>()
                .map_err(|e| Error::Bundle(format!("{counts_file}:{}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Vocabulary::from_parts(tokens, counts).map_err(|e| Error::Bundle(format!("{vocab_file}: {e}")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn write_files(dir: &Path, files: &Files) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(Error::io(&path))?;
    }
    Ok(())
}

fn hash_files(files: &Files) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

fn to_toml<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    toml::to_string(value)
        .map(String::into_bytes)
        .map_err(|e| Error::Bundle(format!("cannot serialize manifest: {e}")))
}

/// Parses the manifest after checking its format version and kind.
fn read_manifest<T: DeserializeOwned>(dir: &Path, kind: BundleKind) -> Result<T> {
    let text = read_text(&dir.join(MANIFEST))?;
    let header: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Bundle(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    let version = header.get("format_version").and_then(|v| v.as_integer());
    if version != Some(FORMAT_VERSION as i64) {
        return Err(Error::Bundle(format!(
            "{}: unsupported format_version {version:?} (expected {FORMAT_VERSION})",
            dir.display()
        )));
    }
    let h: Header = Header::deserialize(toml::Value::Table(
        header
            .iter()
            .filter(|(k, _)| *k == "format_version" || *k == "kind")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    ))
    .map_err(|e| Error::Bundle(format!("{}: {e}", dir.display())))?;
    if h.kind != kind {
        return Err(Error::Bundle(format!(
            "{}: expected a {kind:?} bundle, found {:?}",
            dir.display(),
            h.kind
        )));
    }
    toml::from_str(&text).map_err(|e| Error::Bundle(format!("{}: {e}", dir.join(MANIFEST).display())))
}

fn read_lxt(dir: &Path, file: &str) -> Result<crossling_tensor::Tensor<f32>> {
    if file.contains('/') || file.contains('\\') || file.starts_with('.') {
        return Err(Error::Bundle(format!("tensor file name {file:?} escapes the bundle")));
    }
    let path = dir.join(file);
    tio::load(&path).map_err(|e| Error::Bundle(format!("{}: {e}", path.display())))
}

/// Reads the kind recorded in a bundle's manifest.
pub fn bundle_kind(dir: impl AsRef<Path>) -> Result<BundleKind> {
    let dir = dir.as_ref();
    let text = read_text(&dir.join(MANIFEST))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Bundle(e.to_string()))?;
    match table.get("kind").and_then(|v| v.as_str()) {
        Some("embedding") => Ok(BundleKind::Embedding),
        Some("classifier") => Ok(BundleKind::Classifier),
        other => Err(Error::Bundle(format!("{}: unknown bundle kind {other:?}", dir.display()))),
    }
}

impl EmbeddingBundle {
    fn files(&self) -> Result<Files> {
        let manifest = EmbeddingManifest {
            format_version: FORMAT_VERSION,
            kind: BundleKind::Embedding,
            seed: self.seed,
            dim: self.model.dim(),
            vocab_size: self.vocab.len(),
            vocab_file: VOCAB.into(),
            counts_file: COUNTS.into(),
            center_file: "center.lxt".into(),
            context_file: "context.lxt".into(),
            replay_config: self.replay_config.clone(),
            embedding: self.config.clone(),
            cleaning: self.cleaning.clone(),
        };
        let mut files = vec![(MANIFEST.to_string(), to_toml(&manifest)?)];
        files.extend(vocab_files(&self.vocab));
        files.push((manifest.center_file, tio::encode(self.model.embedding())));
        files.push((manifest.context_file, tio::encode(self.model.context_matrix())));
        Ok(files)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_files(dir.as_ref(), &self.files()?)
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(hash_files(&self.files()?))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: EmbeddingManifest = read_manifest(dir, BundleKind::Embedding)?;
        let vocab = read_vocab(dir, &m.vocab_file, &m.counts_file)?;
        let center = read_lxt(dir, &m.center_file)?;
        let context = read_lxt(dir, &m.context_file)?;
        for (name, t) in [("center", &center), ("context", &context)] {
            if t.shape() != [vocab.len(), m.dim] {
                return Err(Error::Bundle(format!(
                    "{name} matrix has shape {:?}, manifest says [{}, {}]",
                    t.shape(),
                    vocab.len(),
                    m.dim
                )));
            }
        }
        Ok(EmbeddingBundle {
            vocab,
            model: SkipGramModel::from_matrices(center, context),
            config: m.embedding,
            cleaning: m.cleaning,
            seed: m.seed,
            replay_config: m.replay_config,
        })
    }
}

impl ClassifierBundle {
    pub fn new(vocab: Vocabulary, model: ClassifierModel, cleaning: CleaningConfig, seed: u64) -> Self {
        ClassifierBundle {
            vocab,
            model,
            cleaning,
            seed,
            transfer: None,
            replay_config: None,
        }
    }

    fn files(&self) -> Result<Files> {
        let tensors: Vec<TensorEntry> = self
            .model
            .params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                file: format!("{}.lxt", p.name),
            })
            .collect();
        let mut files = Vec::new();
        for (p, t) in self.model.params.iter().zip(&tensors) {
            files.push((t.file.clone(), tio::encode(&p.value)));
        }
        let manifest = ClassifierManifest {
            format_version: FORMAT_VERSION,
            kind: BundleKind::Classifier,
            seed: self.seed,
            dim: self.model.dim(),
            vocab_size: self.vocab.len(),
            vocab_file: VOCAB.into(),
            counts_file: COUNTS.into(),
            replay_config: self.replay_config.clone(),
            classifier: self.model.config.clone(),
            cleaning: self.cleaning.clone(),
            freeze: self.model.freeze,
            transfer: self.transfer.clone(),
            tensors,
        };
        let mut out = vec![(MANIFEST.to_string(), to_toml(&manifest)?)];
        out.extend(vocab_files(&self.vocab));
        out.extend(files);
        Ok(out)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_files(dir.as_ref(), &self.files()?)
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(hash_files(&self.files()?))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: ClassifierManifest = read_manifest(dir, BundleKind::Classifier)?;
        let vocab = read_vocab(dir, &m.vocab_file, &m.counts_file)?;
        let mut params = ParamStore::new();
        for t in &m.tensors {
            params.push(Parameter::new(t.name.clone(), read_lxt(dir, &t.file)?));
        }
        let mut model = ClassifierModel::from_params(m.classifier, params, m.freeze)?;
        model.set_freeze(m.freeze);
        if model.vocab_size() != vocab.len() || model.dim() != m.dim {
            return Err(Error::Bundle(format!(
                "embedding is {}x{}, manifest says {}x{}",
                model.vocab_size(),
                model.dim(),
                vocab.len(),
                m.dim
            )));
        }
        Ok(ClassifierBundle {
            vocab,
            model,
            cleaning: m.cleaning,
            seed: m.seed,
            transfer: m.transfer,
            replay_config: m.replay_config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Group;
    use crate::corpus::{build_vocab, Document, Label};
    use crate::transfer::TransferMode;
    use crossling_tensor::Rng;

    fn vocab() -> Vocabulary {
        let d = vec![Document {
            tokens: "a b b c <NUM1>".split(' ').map(str::to_string).collect(),
            label: Label::Hof,
        }];
        build_vocab(&d, 1).unwrap()
    }

    #[test]
    fn embedding_roundtrip() {
        let v = vocab();
        let cfg = EmbeddingConfig {
            dim: 4,
            subsample_t: None,
            ..EmbeddingConfig::enhanced()
        };
        let model = SkipGramModel::init(v.len(), &cfg, &mut Rng::new(0)).unwrap();
        let b = EmbeddingBundle {
            vocab: v,
            model,
            config: cfg,
            cleaning: CleaningConfig::enhanced().with_stopwords(["x".to_string()]),
            seed: 42,
            replay_config: Some("[seeds]\nbase = 1\n".into()),
        };
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let l = EmbeddingBundle::load(dir.path()).unwrap();
        assert_eq!(l.vocab, b.vocab);
        assert_eq!(l.model.embedding(), b.model.embedding());
        assert_eq!(l.model.context_matrix(), b.model.context_matrix());
        assert_eq!(l.config, b.config);
        assert_eq!(l.cleaning, b.cleaning);
        assert_eq!(l.replay_config, b.replay_config);
        assert_eq!(l.content_hash().unwrap(), b.content_hash().unwrap());
        assert_eq!(bundle_kind(dir.path()).unwrap(), BundleKind::Embedding);
        assert!(ClassifierBundle::load(dir.path()).is_err());
    }

    fn classifier_bundle() -> ClassifierBundle {
        let v = vocab();
        let mut rng = Rng::new(1);
        let emb = crossling_tensor::init::uniform(&[v.len(), 6], -1.0, 1.0, &mut rng);
        let cfg = ClassifierConfig {
            heads: 3,
            ..ClassifierConfig::enhanced()
        };
        let mut model = ClassifierModel::new(cfg, emb, &mut rng).unwrap();
        model.set_freeze(FreezeMask::of(&[Group::Head]));
        let mut b = ClassifierBundle::new(v, model, CleaningConfig::baseline(), 9);
        b.transfer = Some(TransferRecord {
            mode: TransferMode::FixEmbedding,
            source_hash: "ab".into(),
            target_vocab_size: 3,
        });
        b
    }

    #[test]
    fn classifier_roundtrip() {
        let b = classifier_bundle();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let l = ClassifierBundle::load(dir.path()).unwrap();
        assert_eq!(l.vocab, b.vocab);
        assert_eq!(l.model.config, b.model.config);
        assert_eq!(l.model.freeze, b.model.freeze);
        assert_eq!(l.transfer, b.transfer);
        for g in Group::ALL {
            assert_eq!(l.model.group_digest(g), b.model.group_digest(g));
        }
        assert!(l.model.params.iter().all(|p| p.frozen == (p.name.starts_with("head."))));
        assert_eq!(l.content_hash().unwrap(), b.content_hash().unwrap());

        let dir2 = tempfile::tempdir().unwrap();
        l.save(dir2.path()).unwrap();
        for entry in fs::read_dir(dir.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(dir.path().join(&name)).unwrap(),
                fs::read(dir2.path().join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let b = classifier_bundle();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path).unwrap().replace("format_version = 1", "format_version = 2");
        fs::write(&path, text).unwrap();
        let err = ClassifierBundle::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("format_version"), "{err}");
    }

    #[test]
    fn missing_tensor_is_reported() {
        let b = classifier_bundle();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("head.w.lxt")).unwrap();
        assert!(ClassifierBundle::load(dir.path()).is_err());
    }
}
