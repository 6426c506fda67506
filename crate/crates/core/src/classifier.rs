//! Attention text classifier and its training loop.
//!
//! Both architectures embed the non-PAD tokens of a text, mix them with
//! self-attention, mean-pool and apply an affine head producing one logit:
//!
//! * baseline: `layer_norm(E + MHA(E))`
//! * enhanced: `h = E + PE`, then per block `dropout(layer_norm(h + MHA(h)))`

use std::fmt;

use crossling_tensor::init::xavier_uniform;
use crossling_tensor::{exp_decay_lr, Adam, ParamId, ParamStore, Real, Rng, Segment, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{clean_text, tokenize, CleaningConfig, Document, Label, Vocabulary, PAD};
use crate::eval::{accuracy, macro_f1};
use crate::transfer::TransferRecord;
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Baseline,
    Enhanced,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Baseline => "baseline",
            Arch::Enhanced => "enhanced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub arch: Arch,
    /// Encoder blocks; the baseline always has exactly one attention layer.
    pub num_blocks: usize,
    pub heads: usize,
    pub dropout_p: f64,
    /// Texts are truncated to this many tokens.
    pub max_len: usize,
    pub lr0: f64,
    pub lr_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl ClassifierConfig {
    pub fn enhanced() -> Self {
        ClassifierConfig {
            arch: Arch::Enhanced,
            num_blocks: 2,
            heads: 6,
            dropout_p: 0.7,
            max_len: 64,
            lr0: 1e-3,
            lr_gamma: 0.95,
            epochs: 15,
            batch_size: 32,
        }
    }

    pub fn baseline() -> Self {
        ClassifierConfig {
            arch: Arch::Baseline,
            num_blocks: 1,
            dropout_p: 0.0,
            ..Self::enhanced()
        }
    }

    pub fn block_count(&self) -> usize {
        match self.arch {
            Arch::Baseline => 1,
            Arch::Enhanced => self.num_blocks,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("classifier: {m}")));
        if self.heads == 0 || !dim.is_multiple_of(self.heads) {
            return bad(format!("embedding dim {dim} is not divisible by {} heads", self.heads));
        }
        if self.arch == Arch::Enhanced && self.num_blocks == 0 {
            return bad("num_blocks must be >= 1".into());
        }
        if self.arch == Arch::Enhanced && !dim.is_multiple_of(2) {
            return bad(format!("positional encoding needs an even dim, got {dim}"));
        }
        self.validate_settings()
    }

    /// The checks that do not depend on the embedding width.
    pub fn validate_settings(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("classifier: {m}")));
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.max_len == 0 || self.batch_size == 0 {
            return bad("max_len and batch_size must be >= 1".into());
        }
        if !(self.lr0 > 0.0) || !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return bad("need lr0 > 0 and 0 < lr_gamma <= 1".into());
        }
        Ok(())
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::enhanced()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Embedding,
    Blocks,
    Head,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Embedding, Group::Blocks, Group::Head];

    pub fn name(self) -> &'static str {
        match self {
            Group::Embedding => "embedding",
            Group::Blocks => "blocks",
            Group::Head => "head",
        }
    }

    fn of_param(name: &str) -> Group {
        if name == "embedding" {
            Group::Embedding
        } else if name.starts_with("head.") {
            Group::Head
        } else {
            Group::Blocks
        }
    }
}

/// Parameter groups excluded from optimizer updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreezeMask {
    #[serde(default)]
    pub embedding: bool,
    #[serde(default)]
    pub blocks: bool,
    #[serde(default)]
    pub head: bool,
}

impl FreezeMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of(groups: &[Group]) -> Self {
        let mut m = Self::none();
        for g in groups {
            match g {
                Group::Embedding => m.embedding = true,
                Group::Blocks => m.blocks = true,
                Group::Head => m.head = true,
            }
        }
        m
    }

    pub fn is_frozen(&self, group: Group) -> bool {
        match group {
            Group::Embedding => self.embedding,
            Group::Blocks => self.blocks,
            Group::Head => self.head,
        }
    }

    pub fn all_frozen(&self) -> bool {
        self.embedding && self.blocks && self.head
    }
}

/// `PE[pos, 2i] = sin(pos / 10000^(2i/dim))`, `PE[pos, 2i+1] = cos(same)`.
pub fn positional_encoding<F: Real>(max_len: usize, dim: usize) -> Result<Tensor<F>> {
    if !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("positional encoding needs an even dim, got {dim}")));
    }
    let mut data = Vec::with_capacity(max_len * dim);
    for pos in 0..max_len {
        for i in 0..dim / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            data.push(F::from_f64(angle.sin()));
            data.push(F::from_f64(angle.cos()));
        }
    }
    Ok(Tensor::from_vec(&[max_len, dim], data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct ClassifierModel<F: Real = f32> {
    pub config: ClassifierConfig,
    pub params: ParamStore<F>,
    pub embedding: ParamId,
    pub blocks: Vec<BlockParams>,
    pub head_w: ParamId,
    pub head_b: ParamId,
    /// Fixed sine-cosine table, enhanced architecture only.
    pub positional: Option<Tensor<F>>,
    pub freeze: FreezeMask,
}

impl<F: Real> ClassifierModel<F> {
    /// Fresh model on top of a pretrained `V x dim` embedding; all other
    /// weights are Xavier-initialized from `rng`.
    pub fn new(config: ClassifierConfig, embedding: Tensor<F>, rng: &mut Rng) -> Result<Self> {
        if embedding.rank() != 2 || embedding.rows() == 0 {
            return Err(Error::Config(format!(
                "embedding must be a non-empty matrix, got shape {:?}",
                embedding.shape()
            )));
        }
        let dim = embedding.cols();
        config.validate(dim)?;
        let mut params = ParamStore::new();
        let embedding = params.add("embedding", embedding);
        let mut blocks = Vec::new();
        for b in 0..config.block_count() {
            let mut w = |name: &str, params: &mut ParamStore<F>| -> Result<ParamId> {
                Ok(params.add(format!("block{b}.{name}"), xavier_uniform(dim, dim, rng)?))
            };
            let (wq, wk, wv, wo) = (
                w("wq", &mut params)?,
                w("wk", &mut params)?,
                w("wv", &mut params)?,
                w("wo", &mut params)?,
            );
            let gain = params.add(format!("block{b}.ln_gain"), Tensor::full(&[dim], F::one()));
            let bias = params.add(format!("block{b}.ln_bias"), Tensor::zeros(&[dim]));
            blocks.push(BlockParams {
                wq,
                wk,
                wv,
                wo,
                gain,
                bias,
            });
        }
        let head_w = params.add("head.w", xavier_uniform(dim, 1, rng)?);
        let head_b = params.add("head.b", Tensor::zeros(&[1]));
        let positional = match config.arch {
            Arch::Enhanced => Some(positional_encoding(config.max_len, dim)?),
            Arch::Baseline => None,
        };
        Ok(ClassifierModel {
            config,
            params,
            embedding,
            blocks,
            head_w,
            head_b,
            positional,
            freeze: FreezeMask::none(),
        })
    }

    /// Rebuilds a model from a parameter store laid out as [`Self::new`]
    /// creates it.
    pub fn from_params(config: ClassifierConfig, params: ParamStore<F>, freeze: FreezeMask) -> Result<Self> {
        let find = |name: String| {
            params
                .find(&name)
                .ok_or_else(|| Error::Bundle(format!("missing parameter {name}")))
        };
        let embedding = find("embedding".into())?;
        let dim = params.get(embedding).value.cols();
        config.validate(dim)?;
        let mut blocks = Vec::new();
        for b in 0..config.block_count() {
            let p = |n: &str| find(format!("block{b}.{n}"));
            blocks.push(BlockParams {
                wq: p("wq")?,
                wk: p("wk")?,
                wv: p("wv")?,
                wo: p("wo")?,
                gain: p("ln_gain")?,
                bias: p("ln_bias")?,
            });
        }
        let head_w = find("head.w".into())?;
        let head_b = find("head.b".into())?;
        let expected = 1 + 6 * blocks.len() + 2;
        if params.len() != expected {
            return Err(Error::Bundle(format!(
                "expected {expected} parameters, found {}",
                params.len()
            )));
        }
        for p in params.iter() {
            let want: Vec<usize> = match p.name.as_str() {
                "embedding" => p.shape().to_vec(),
                "head.w" => vec![dim, 1],
                "head.b" => vec![1],
                n if n.ends_with("ln_gain") || n.ends_with("ln_bias") => vec![dim],
                _ => vec![dim, dim],
            };
            if p.shape() != want.as_slice() {
                return Err(Error::Bundle(format!(
                    "parameter {} has shape {:?}, expected {want:?}",
                    p.name,
                    p.shape()
                )));
            }
        }
        let positional = match config.arch {
            Arch::Enhanced => Some(positional_encoding(config.max_len, dim)?),
            Arch::Baseline => None,
        };
        Ok(ClassifierModel {
            config,
            params,
            embedding,
            blocks,
            head_w,
            head_b,
            positional,
            freeze,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.get(self.embedding).value.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.params.get(self.embedding).value.rows()
    }

    pub fn embedding_matrix(&self) -> &Tensor<F> {
        &self.params.get(self.embedding).value
    }

    pub fn group_of(&self, id: ParamId) -> Group {
        Group::of_param(&self.params.get(id).name)
    }

    /// Marks parameters frozen according to `mask`.
    pub fn set_freeze(&mut self, mask: FreezeMask) {
        self.freeze = mask;
        for p in self.params.iter_mut() {
            p.frozen = mask.is_frozen(Group::of_param(&p.name));
        }
    }

    /// SHA-256 over the names, shapes and values of one group's
    /// parameters.
    pub fn group_digest(&self, group: Group) -> String {
        let mut h = Sha256::new();
        for p in self.params.iter().filter(|p| Group::of_param(&p.name) == group) {
            h.update(p.name.as_bytes());
            for &s in p.shape() {
                h.update((s as u64).to_le_bytes());
            }
            for &v in p.value.data() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Validates one token sequence and returns its non-PAD ids and their
    /// positions (ranks among the non-PAD tokens).
    fn compact(&self, ids: &[usize]) -> Result<Vec<usize>> {
        if ids.len() > self.config.max_len {
            return Err(Error::Data(format!(
                "sequence of {} tokens exceeds max_len {}",
                ids.len(),
                self.config.max_len
            )));
        }
        let v = self.vocab_size();
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Data(format!("token id {bad} outside vocabulary of {v}")));
        }
        let kept: Vec<usize> = ids.iter().copied().filter(|&i| i != PAD).collect();
        if kept.is_empty() {
            return Err(Error::Data("cannot classify an all-PAD sequence".into()));
        }
        Ok(kept)
    }

    /// Records the forward pass for a batch of sequences on `tape`,
    /// returning `B x 1` logits.
    pub fn forward_batch(&self, tape: &mut Tape<F>, batch: &[&[usize]], training: bool, rng: &mut Rng) -> Result<Var> {
        let mut ids = Vec::new();
        let mut segments = Vec::with_capacity(batch.len());
        let mut positions = Vec::new();
        for seq in batch {
            let kept = self.compact(seq)?;
            segments.push(Segment {
                start: ids.len(),
                len: kept.len(),
            });
            positions.extend(0..kept.len());
            ids.extend(kept);
        }
        if ids.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let mut h = tape.gather_param(&self.params, self.embedding, &ids)?;
        if let Some(pe) = &self.positional {
            let d = pe.cols();
            let mut rows = Vec::with_capacity(positions.len() * d);
            for &p in &positions {
                rows.extend_from_slice(pe.row(p));
            }
            let pe = tape.leaf(Tensor::from_vec_unchecked(&[positions.len(), d], rows)?);
            h = tape.add(h, pe)?;
        }
        let dropout = match self.config.arch {
            Arch::Enhanced => self.config.dropout_p,
            Arch::Baseline => 0.0,
        };
        for b in &self.blocks {
            let w = [b.wq, b.wk, b.wv, b.wo].map(|id| tape.param(&self.params, id));
            let a = tape.multi_head_attention(h, w, self.config.heads, &segments, None)?;
            let s = tape.add(h, a)?;
            let gain = tape.param(&self.params, b.gain);
            let bias = tape.param(&self.params, b.bias);
            let n = tape.layer_norm(s, gain, bias, F::from_f64(LN_EPS))?;
            h = tape.dropout(n, dropout, training, rng)?;
        }
        let pooled = tape.segment_mean(h, &segments)?;
        let hw = tape.param(&self.params, self.head_w);
        let hb = tape.param(&self.params, self.head_b);
        let z = tape.matmul(pooled, hw)?;
        Ok(tape.add_row(z, hb)?)
    }

    /// Logit for a single sequence. PAD entries are ignored.
    pub fn forward(&self, ids: &[usize], training: bool, rng: &mut Rng) -> Result<F> {
        let mut tape = Tape::new();
        let out = self.forward_batch(&mut tape, &[ids], training, rng)?;
        Ok(tape.scalar(out))
    }

    /// Inference logits for many sequences, batched.
    pub fn logits(&self, seqs: &[Vec<usize>]) -> Result<Vec<F>> {
        let mut rng = Rng::new(0);
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(EVAL_BATCH) {
            let refs: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
            let mut tape = Tape::new();
            let z = self.forward_batch(&mut tape, &refs, false, &mut rng)?;
            out.extend_from_slice(tape.value(z).data());
        }
        Ok(out)
    }

    pub fn cast<G: Real>(&self) -> ClassifierModel<G> {
        ClassifierModel {
            config: self.config.clone(),
            params: self.params.cast(),
            embedding: self.embedding,
            blocks: self.blocks.clone(),
            head_w: self.head_w,
            head_b: self.head_b,
            positional: self.positional.as_ref().map(Tensor::cast),
            freeze: self.freeze,
        }
    }
}

/// Encodes a document for the classifier: vocabulary lookup and
/// truncation to `max_len`. Returns `None` for a document with no tokens.
pub fn encode_document(doc: &Document, vocab: &Vocabulary, max_len: usize) -> Option<Vec<usize>> {
    let mut ids = vocab.encode(&doc.tokens);
    ids.retain(|&i| i != PAD);
    ids.truncate(max_len);
    (!ids.is_empty()).then_some(ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mean BCE over the scorable texts.
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    pub eval_macro_f1: f64,
}

impl EpochMetrics {
    pub const NAMES: [&'static str; 4] = ["train_loss", "eval_loss", "eval_accuracy", "eval_macro_f1"];

    /// Value of one of [`Self::NAMES`].
    pub fn get(&self, metric: &str) -> f64 {
        match metric {
            "train_loss" => self.train_loss,
            "eval_loss" => self.eval_loss,
            "eval_accuracy" => self.eval_accuracy,
            "eval_macro_f1" => self.eval_macro_f1,
            other => panic!("unknown metric {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunResult {
    pub seed: u64,
    /// Eval-set metrics before the first update.
    pub initial: EvalMetrics,
    pub epochs: Vec<EpochMetrics>,
    #[serde(default)]
    pub transfer: Option<TransferRecord>,
}

impl TrainRunResult {
    pub fn final_metrics(&self) -> EvalMetrics {
        self.epochs.last().map_or(self.initial, |e| EvalMetrics {
            loss: e.eval_loss,
            accuracy: e.eval_accuracy,
            macro_f1: e.eval_macro_f1,
        })
    }
}

fn bce(z: f64, target: f64) -> f64 {
    z.max(0.0) - target * z + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn label_of(z: f64) -> Label {
    if sigmoid(z) > 0.5 {
        Label::Hof
    } else {
        Label::Not
    }
}

/// Accuracy, macro-F1 and mean loss of `model` on `docs`. Documents with
/// no tokens are predicted NOT and left out of the loss.
pub fn evaluate<F: Real>(model: &ClassifierModel<F>, docs: &[Document], vocab: &Vocabulary) -> Result<EvalMetrics> {
    if docs.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let max_len = model.config.max_len;
    let encoded: Vec<Option<Vec<usize>>> = docs.iter().map(|d| encode_document(d, vocab, max_len)).collect();
    let scorable: Vec<Vec<usize>> = encoded.iter().flatten().cloned().collect();
    let logits = model.logits(&scorable)?;
    let mut it = logits.iter();
    let mut preds = Vec::with_capacity(docs.len());
    let mut loss = 0.0;
    for (doc, enc) in docs.iter().zip(&encoded) {
        match enc {
            Some(_) => {
                let z = it.next().expect("one logit per scorable doc").as_f64();
                loss += bce(z, doc.label.target() as f64);
                preds.push(label_of(z));
            }
            None => preds.push(Label::Not),
        }
    }
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let loss = if scorable.is_empty() {
        0.0
    } else {
        loss / scorable.len() as f64
    };
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("evaluation loss is {loss}")));
    }
    Ok(EvalMetrics {
        loss,
        accuracy: accuracy(&preds, &labels)?,
        macro_f1: macro_f1(&preds, &labels)?,
    })
}

/// Minibatch Adam with `lr0 * gamma^epoch` decay, respecting the model's
/// freeze mask. The eval set is scored before training and after every
/// epoch.
pub fn train_classifier<F: Real>(
    model: &mut ClassifierModel<F>,
    train_docs: &[Document],
    eval_docs: &[Document],
    vocab: &Vocabulary,
    seed: u64,
) -> Result<TrainRunResult> {
    let config = model.config.clone();
    config.validate(model.dim())?;
    if vocab.len() != model.vocab_size() {
        return Err(Error::Config(format!(
            "vocabulary has {} entries but the embedding has {} rows",
            vocab.len(),
            model.vocab_size()
        )));
    }
    if model.freeze.all_frozen() && config.epochs > 0 {
        return Err(Error::Config("every parameter group is frozen".into()));
    }
    model.set_freeze(model.freeze);
    let train: Vec<(Vec<usize>, F)> = train_docs
        .iter()
        .filter_map(|d| encode_document(d, vocab, config.max_len).map(|ids| (ids, F::from_f64(d.label.target() as f64))))
        .collect();
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if train.len() < train_docs.len() {
        log::warn!("{} training texts are empty and were skipped", train_docs.len() - train.len());
    }

    let initial = evaluate(model, eval_docs, vocab)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = Rng::with_stream(seed, 1);
    let mut dropout_rng = Rng::with_stream(seed, 2);
    let adam = Adam::default();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = exp_decay_lr(config.lr0, config.lr_gamma, epoch);
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let seqs: Vec<&[usize]> = chunk.iter().map(|&i| train[i].0.as_slice()).collect();
            let targets: Vec<F> = chunk.iter().map(|&i| train[i].1).collect();
            let mut tape = Tape::new();
            let z = model.forward_batch(&mut tape, &seqs, true, &mut dropout_rng)?;
            let loss = tape.bce_with_logits(z, &targets)?;
            let l = tape.scalar(loss).as_f64();
            if !l.is_finite() {
                return Err(Error::Numerical(format!("training loss is {l} in epoch {}", epoch + 1)));
            }
            total += l * chunk.len() as f64;
            tape.backward(loss, &mut model.params);
            adam.step(&mut model.params, lr);
            model.params.zero_grad();
        }
        let m = evaluate(model, eval_docs, vocab)?;
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            lr,
            train_loss: total / train.len() as f64,
            eval_loss: m.loss,
            eval_accuracy: m.accuracy,
            eval_macro_f1: m.macro_f1,
        };
        log::info!(
            "epoch {}: train_loss {:.4} eval_acc {:.4} eval_f1 {:.4}",
            metrics.epoch,
            metrics.train_loss,
            metrics.eval_accuracy,
            metrics.eval_macro_f1
        );
        epochs.push(metrics);
    }
    Ok(TrainRunResult {
        seed,
        initial,
        epochs,
        transfer: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Scored { probability: f64, label: Label },
    /// Nothing was left of the text after cleaning.
    Unscorable,
}

/// Cleans, tokenizes and scores one raw text.
pub fn predict<F: Real>(
    model: &ClassifierModel<F>,
    text: &str,
    cleaning: &CleaningConfig,
    vocab: &Vocabulary,
) -> Result<Prediction> {
    let doc = Document {
        tokens: tokenize(&clean_text(text, cleaning), cleaning),
        label: Label::Not,
    };
    let Some(ids) = encode_document(&doc, vocab, model.config.max_len) else {
        return Ok(Prediction::Unscorable);
    };
    let z = model.forward(&ids, false, &mut Rng::new(0))?.as_f64();
    Ok(prediction_from_logit(z))
}

/// `probability = σ(z)`; HOF only when strictly above one half.
pub fn prediction_from_logit(z: f64) -> Prediction {
    Prediction::Scored {
        probability: sigmoid(z),
        label: label_of(z),
    }
}
