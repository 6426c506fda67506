//! Skip-gram word embeddings: a full-softmax baseline and skip-gram with
//! negative sampling (SGNS).

use crossling_tensor::init::{uniform, xavier_uniform};
use crossling_tensor::kernels;
use crossling_tensor::{exp_decay_lr, Adam, ParamId, ParamStore, Parameter, Real, Rng, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary, PAD, UNK};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Full softmax over the vocabulary with cross-entropy loss.
    BaselineSoftmax,
    /// Negative sampling from the smoothed unigram distribution.
    Sgns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub mode: EmbeddingMode,
    pub dim: usize,
    pub window: usize,
    pub neg_ratio: usize,
    /// Subsampling threshold; `None` (written as 0 in config files)
    /// disables subsampling.
    #[serde(with = "zero_is_none")]
    pub subsample_t: Option<f64>,
    pub noise_power: f64,
    pub lr0: f64,
    pub lr_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

mod zero_is_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.unwrap_or(0.0))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let v = f64::deserialize(d)?;
        Ok((v != 0.0).then_some(v))
    }
}

impl EmbeddingConfig {
    /// SGNS, window 5, 10 negatives, Xavier init.
    pub fn enhanced() -> Self {
        EmbeddingConfig {
            mode: EmbeddingMode::Sgns,
            dim: 300,
            window: 5,
            neg_ratio: 10,
            subsample_t: Some(1e-5),
            noise_power: 0.75,
            lr0: 0.025,
            lr_gamma: 0.9,
            epochs: 5,
            batch_size: 256,
        }
    }

    /// Full softmax, window 10.
    pub fn baseline() -> Self {
        EmbeddingConfig {
            mode: EmbeddingMode::BaselineSoftmax,
            window: 10,
            ..Self::enhanced()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("embedding: {m}")));
        if self.dim == 0 {
            return bad("dim must be > 0");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.mode == EmbeddingMode::Sgns && self.neg_ratio == 0 {
            return bad("neg_ratio must be >= 1 for sgns");
        }
        if matches!(self.subsample_t, Some(t) if !(t > 0.0 && t.is_finite())) {
            return bad("subsample_t must be > 0, or 0 to disable subsampling");
        }
        if !(self.lr0 > 0.0) || !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return bad("need lr0 > 0 and 0 < lr_gamma <= 1");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1");
        }
        Ok(())
    }
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self::enhanced()
    }
}

/// Negative-sampling distribution over vocabulary ids.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

/// `P(w) ∝ count(w)^power` over ids with a nonzero count; `<PAD>` is never
/// drawn.
pub fn build_noise_table(vocab: &Vocabulary, power: f64) -> Result<NoiseTable> {
    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .enumerate()
        .map(|(id, &c)| if id == PAD || c == 0 { 0.0 } else { (c as f64).powf(power) })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Data("noise table: all counts are zero".into()));
    }
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut acc = 0.0;
    let cumulative = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(NoiseTable { probs, cumulative })
}

impl NoiseTable {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.uniform() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        // guard against landing on a zero-probability tail through rounding
        let mut i = i.min(self.probs.len() - 1);
        while self.probs[i] == 0.0 {
            i -= 1;
        }
        i
    }
}

/// Keep probability `min(1, sqrt(t / freq))` for a token of relative
/// frequency `freq`.
pub fn subsample_keep_prob(freq: f64, t: f64) -> f64 {
    (t / freq).sqrt().min(1.0)
}

/// Per-id keep probabilities for one vocabulary.
#[derive(Debug, Clone)]
pub struct Subsampler {
    keep: Vec<f64>,
}

impl Subsampler {
    pub fn new(vocab: &Vocabulary, t: f64) -> Self {
        let total = vocab.total_count().max(1) as f64;
        let keep = vocab
            .counts()
            .iter()
            .map(|&c| if c == 0 { 1.0 } else { subsample_keep_prob(c as f64 / total, t) })
            .collect();
        Subsampler { keep }
    }

    pub fn keep_prob(&self, id: usize) -> f64 {
        self.keep[id]
    }
}

/// All `(center, context)` pairs within `window` positions after `<PAD>`,
/// `<UNK>` and subsampled-away positions are removed. The window is fixed
/// (no random shrinking).
pub fn generate_pairs(
    ids: &[usize],
    window: usize,
    subsampler: Option<&Subsampler>,
    rng: &mut Rng,
) -> Vec<(usize, usize)> {
    let kept: Vec<usize> = ids
        .iter()
        .copied()
        .filter(|&id| id != PAD && id != UNK)
        .filter(|&id| match subsampler {
            Some(s) => {
                let p = s.keep_prob(id);
                p >= 1.0 || rng.uniform() < p
            }
            None => true,
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..kept.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(kept.len() - 1);
        for j in lo..=hi {
            if j != i {
                pairs.push((kept[i], kept[j]));
            }
        }
    }
    pairs
}

/// Stable negative-sampling loss for one pair; see
/// [`kernels::sgns`].
pub fn sgns_loss(center: &[f32], context: &[f32], negatives: &[&[f32]]) -> f32 {
    let d = center.len();
    let mut dn = vec![vec![0.0; d]; negatives.len()];
    kernels::sgns(center, context, negatives, &mut vec![0.0; d], &mut vec![0.0; d], &mut dn)
}

/// Paired center ("input") and context ("output") matrices, `V x dim`.
#[derive(Debug, Clone)]
pub struct SkipGramModel {
    pub params: ParamStore<f32>,
    pub center: ParamId,
    pub context: ParamId,
}

impl SkipGramModel {
    /// Xavier-initialized matrices for SGNS, uniform `±0.5/dim` for the
    /// baseline.
    pub fn init(vocab_size: usize, config: &EmbeddingConfig, rng: &mut Rng) -> Result<Self> {
        let dim = config.dim;
        let mut make = || -> Result<Tensor<f32>> {
            Ok(match config.mode {
                EmbeddingMode::Sgns => xavier_uniform(vocab_size, dim, rng)?,
                EmbeddingMode::BaselineSoftmax => {
                    let b = 0.5 / dim as f64;
                    uniform(&[vocab_size, dim], -b, b, rng)
                }
            })
        };
        let (c, x) = (make()?, make()?);
        Ok(Self::from_matrices(c, x))
    }

    pub fn from_matrices(center: Tensor<f32>, context: Tensor<f32>) -> Self {
        let mut params = ParamStore::new();
        let center = params.push(Parameter::new_row_sparse("center", center));
        let context = params.push(Parameter::new_row_sparse("context", context));
        SkipGramModel {
            params,
            center,
            context,
        }
    }

    /// The word embedding handed to downstream models.
    pub fn embedding(&self) -> &Tensor<f32> {
        &self.params.get(self.center).value
    }

    pub fn context_matrix(&self) -> &Tensor<f32> {
        &self.params.get(self.context).value
    }

    pub fn dim(&self) -> usize {
        self.embedding().cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding().rows()
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.params.iter_mut().for_each(|p| p.frozen = frozen);
    }
}

/// Mean full-softmax cross-entropy of predicting each context id from its
/// center row: `logits = center[c] · contextᵀ`.
pub fn baseline_loss<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamStore<F>,
    center: ParamId,
    context: ParamId,
    pairs: &[(usize, usize)],
) -> Result<Var> {
    let centers: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let targets: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let rows = tape.gather_param(params, center, &centers)?;
    let ctx = tape.param(params, context);
    let logits = tape.matmul_t(rows, false, ctx, true)?;
    Ok(tape.cross_entropy(logits, &targets)?)
}

/// One Adam step on a single pair of the full-softmax objective. Returns
/// the loss before the update.
pub fn baseline_step(model: &mut SkipGramModel, center_id: usize, context_id: usize, lr: f64) -> Result<f32> {
    let loss = baseline_batch(model, &[(center_id, context_id)], lr)?;
    Ok(loss as f32)
}

fn baseline_batch(model: &mut SkipGramModel, pairs: &[(usize, usize)], lr: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let out = baseline_loss(&mut tape, &model.params, model.center, model.context, pairs)?;
    let loss = tape.scalar(out) as f64;
    tape.backward(out, &mut model.params);
    Adam::default().step(&mut model.params, lr);
    model.params.zero_grad();
    Ok(loss)
}

fn sgns_batch(
    model: &mut SkipGramModel,
    pairs: &[(usize, usize)],
    neg_ratio: usize,
    noise: &NoiseTable,
    rng: &mut Rng,
    lr: f64,
) -> f64 {
    let d = model.dim();
    let scale = 1.0 / pairs.len() as f32;
    let mut c = vec![0.0f32; d];
    let mut x = vec![0.0f32; d];
    let mut negs = vec![vec![0.0f32; d]; neg_ratio];
    let mut neg_ids = vec![0usize; neg_ratio];
    let mut dc = vec![0.0f32; d];
    let mut dx = vec![0.0f32; d];
    let mut dn = vec![vec![0.0f32; d]; neg_ratio];
    let mut loss = 0.0f64;
    for &(ci, xi) in pairs {
        for (slot, id) in negs.iter_mut().zip(neg_ids.iter_mut()) {
            *id = noise.sample(rng);
            slot.copy_from_slice(model.params.get(model.context).value.row(*id));
        }
        c.copy_from_slice(model.params.get(model.center).value.row(ci));
        x.copy_from_slice(model.params.get(model.context).value.row(xi));
        let neg_refs: Vec<&[f32]> = negs.iter().map(Vec::as_slice).collect();
        loss += kernels::sgns(&c, &x, &neg_refs, &mut dc, &mut dx, &mut dn) as f64;

        dc.iter_mut().for_each(|v| *v *= scale);
        model.params.get_mut(model.center).accumulate_row(ci, &dc);
        let ctx = model.params.get_mut(model.context);
        dx.iter_mut().for_each(|v| *v *= scale);
        ctx.accumulate_row(xi, &dx);
        for (g, &id) in dn.iter_mut().zip(&neg_ids) {
            g.iter_mut().for_each(|v| *v *= scale);
            ctx.accumulate_row(id, g);
        }
    }
    Adam::default().step(&mut model.params, lr);
    model.params.zero_grad();
    loss
}

#[derive(Debug, Clone)]
pub struct EmbeddingRun {
    pub model: SkipGramModel,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Initializes a model from `seed` and trains it on `docs`.
pub fn train_embeddings(
    docs: &[Document],
    vocab: &Vocabulary,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<EmbeddingRun> {
    config.validate()?;
    let mut model = SkipGramModel::init(vocab.len(), config, &mut Rng::with_stream(seed, 0))?;
    let epoch_losses = train_embeddings_into(&mut model, docs, vocab, config, seed)?;
    Ok(EmbeddingRun {
        model,
        epoch_losses,
    })
}

/// Trains an existing model. Each epoch regenerates the pair stream with
/// fresh subsampling draws, shuffles it and applies minibatch Adam with an
/// exponentially decayed learning rate.
pub fn train_embeddings_into(
    model: &mut SkipGramModel,
    docs: &[Document],
    vocab: &Vocabulary,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    config.validate()?;
    if model.vocab_size() != vocab.len() || model.dim() != config.dim {
        return Err(Error::Config(format!(
            "model is {}x{}, vocabulary/config need {}x{}",
            model.vocab_size(),
            model.dim(),
            vocab.len(),
            config.dim
        )));
    }
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let subsampler = config.subsample_t.map(|t| Subsampler::new(vocab, t));
    let noise = match config.mode {
        EmbeddingMode::Sgns => Some(build_noise_table(vocab, config.noise_power)?),
        EmbeddingMode::BaselineSoftmax => None,
    };
    let mut pair_rng = Rng::with_stream(seed, 1);
    let mut shuffle_rng = Rng::with_stream(seed, 2);
    let mut neg_rng = Rng::with_stream(seed, 3);

    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = exp_decay_lr(config.lr0, config.lr_gamma, epoch);
        let mut pairs: Vec<(usize, usize)> = encoded
            .iter()
            .flat_map(|ids| generate_pairs(ids, config.window, subsampler.as_ref(), &mut pair_rng))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Data(format!("epoch {epoch}: no training pairs")));
        }
        shuffle_rng.shuffle(&mut pairs);
        let mut total = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            total += match &noise {
                Some(noise) => sgns_batch(model, batch, config.neg_ratio, noise, &mut neg_rng, lr),
                None => baseline_batch(model, batch, lr)? * batch.len() as f64,
            };
        }
        let mean = total / pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical(format!("embedding loss became {mean} in epoch {epoch}")));
        }
        log::info!("embedding epoch {epoch}: loss {mean:.5} over {} pairs", pairs.len());
        losses.push(mean);
    }
    model.embedding().check_finite()?;
    model.context_matrix().check_finite()?;
    Ok(losses)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The `k` rows most cosine-similar to row `word_id`, excluding itself,
/// ties broken by ascending id.
pub fn nearest_neighbors(matrix: &Tensor<f32>, word_id: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let v = matrix.rows();
    if word_id >= v {
        return Err(Error::Data(format!("unknown id {word_id} (vocabulary has {v})")));
    }
    if k >= v {
        return Err(Error::Config(format!("k = {k} must be below vocabulary size {v}")));
    }
    let q = matrix.row(word_id);
    let mut sims: Vec<(usize, f64)> = (0..v)
        .filter(|&i| i != word_id)
        .map(|i| (i, cosine(q, matrix.row(i))))
        .collect();
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    Ok(sims)
}
