//! Recording tape for reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. [`Tape::backward`] walks the nodes in exact
//! reverse order, so each node is visited once and only after all of its
//! consumers.

use crate::kernels::{self, LayerNormCache, MhaCache, Segment};
use crate::{ParamId, ParamStore, Real, Result, Rng, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Param(ParamId),
    MatMul {
        a: Var,
        b: Var,
        a_t: bool,
        b_t: bool,
    },
    Add(Var, Var),
    Mul(Var, Var),
    AddRow {
        x: Var,
        bias: Var,
    },
    Scale(Var, F),
    Sigmoid(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        cache: LayerNormCache<F>,
    },
    Dropout {
        x: Var,
        mask: Vec<F>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    GatherParam {
        table: ParamId,
        ids: Vec<usize>,
    },
    SegmentMean {
        x: Var,
        segments: Vec<Segment>,
    },
    Sum(Var),
    Bce {
        logits: Var,
        grad: Vec<F>,
    },
    CrossEntropy {
        logits: Var,
        grad: Vec<F>,
    },
    Sgns {
        center: Var,
        context: Var,
        negatives: Var,
    },
    Mha {
        x: Var,
        w: [Var; 4],
        heads: usize,
        segments: Vec<Segment>,
        cache: Box<MhaCache<F>>,
    },
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
}

#[derive(Debug)]
pub struct Tape<F = f32> {
    nodes: Vec<Node<F>>,
    grads: Vec<Option<Vec<F>>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err<T>(msg: String) -> Result<T> {
    Err(TensorError::Shape(msg))
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> F {
        self.nodes[v.0].value.data()[0]
    }

    /// Gradient computed by the last [`Tape::backward`] call, if the node
    /// was reached.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Constant or input tensor.
    pub fn leaf(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Copies a parameter's value onto the tape; its gradient is deposited
    /// back into the store on backward.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    /// `op(a) op(b)` where `op` optionally transposes a rank-2 operand.
    pub fn matmul_t(&mut self, a: Var, a_t: bool, b: Var, b_t: bool) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 {
            return shape_err(format!("matmul needs matrices, got {sa:?} and {sb:?}"));
        }
        let (m, k) = if a_t { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
        let (k2, n) = if b_t { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        if k != k2 {
            return shape_err(format!("matmul inner dims {k} vs {k2}"));
        }
        let mut out = vec![F::zero(); m * n];
        F::gemm(
            m,
            k,
            n,
            F::one(),
            self.value(a).data(),
            a_t,
            self.value(b).data(),
            b_t,
            F::zero(),
            &mut out,
        );
        let t = Tensor::from_vec_unchecked(&[m, n], out)?;
        Ok(self.push(t, Op::MatMul { a, b, a_t, b_t }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(format!("add {:?} + {:?}", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let t = Tensor::from_vec_unchecked(ta.shape(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(format!("mul {:?} * {:?}", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
        let t = Tensor::from_vec_unchecked(ta.shape(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Adds a length-`d` vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let d = tx.cols();
        if tb.len() != d {
            return shape_err(format!("add_row {:?} + {:?}", tx.shape(), tb.shape()));
        }
        let mut data = tx.data().to_vec();
        for row in data.chunks_mut(d) {
            for (v, &b) in row.iter_mut().zip(tb.data()) {
                *v += b;
            }
        }
        let t = Tensor::from_vec_unchecked(tx.shape(), data)?;
        Ok(self.push(t, Op::AddRow { x, bias }))
    }

    pub fn scale(&mut self, x: Var, s: F) -> Var {
        let t = self.value(x).map(|v| v * s);
        self.push(t, Op::Scale(x, s))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x).map(kernels::sigmoid);
        self.push(t, Op::Sigmoid(x))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let tx = self.value(x);
        if axis >= tx.rank() {
            return Err(TensorError::Invalid(format!(
                "softmax axis {axis} for shape {:?}",
                tx.shape()
            )));
        }
        let data = kernels::softmax_axis(tx.data(), tx.shape(), axis);
        let t = Tensor::from_vec_unchecked(tx.shape(), data)?;
        Ok(self.push(t, Op::Softmax { x, axis }))
    }

    /// Layer normalization over the last axis followed by `gain * x + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: F) -> Result<Var> {
        let tx = self.value(x);
        let d = tx.cols();
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return shape_err(format!("layer_norm affine params must have length {d}"));
        }
        let (y, cache) =
            kernels::layer_norm(tx.data(), d, self.value(gain).data(), self.value(bias).data(), eps);
        let t = Tensor::from_vec_unchecked(tx.shape(), y)?;
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gain,
                bias,
                cache,
            },
        ))
    }

    /// Inverted dropout. Identity (no node recorded) outside training or
    /// when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Invalid(format!("dropout p={p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep_scale = F::from_f64(1.0 / (1.0 - p));
        let tx = self.value(x);
        let mask: Vec<F> = (0..tx.len())
            .map(|_| if rng.uniform() < p { F::zero() } else { keep_scale })
            .collect();
        let data = tx.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let t = Tensor::from_vec_unchecked(tx.shape(), data)?;
        Ok(self.push(t, Op::Dropout { x, mask }))
    }

    /// Row lookup into a `V x d` table held on the tape.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = gather_rows(self.value(table), ids)?;
        Ok(self.push(
            t,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Row lookup straight out of a parameter, without copying the table.
    /// Only the looked-up rows receive gradient.
    pub fn gather_param(&mut self, store: &ParamStore<F>, table: ParamId, ids: &[usize]) -> Result<Var> {
        let t = gather_rows(&store.get(table).value, ids)?;
        Ok(self.push(
            t,
            Op::GatherParam {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Mean of the rows in each segment: `n x d` to `segments x d`.
    pub fn segment_mean(&mut self, x: Var, segments: &[Segment]) -> Result<Var> {
        let tx = self.value(x);
        let d = tx.cols();
        let mut out = vec![F::zero(); segments.len() * d];
        for (s, seg) in segments.iter().enumerate() {
            if seg.len == 0 || seg.start + seg.len > tx.rows() {
                return shape_err(format!("bad segment {seg:?} for {} rows", tx.rows()));
            }
            let inv = F::one() / F::from_f64(seg.len as f64);
            let dst = &mut out[s * d..(s + 1) * d];
            for r in seg.start..seg.start + seg.len {
                for (o, &v) in dst.iter_mut().zip(tx.row(r)) {
                    *o += v;
                }
            }
            dst.iter_mut().for_each(|v| *v *= inv);
        }
        let t = Tensor::from_vec_unchecked(&[segments.len(), d], out)?;
        Ok(self.push(
            t,
            Op::SegmentMean {
                x,
                segments: segments.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean binary cross-entropy with logits; `targets` must be 0 or 1.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[F]) -> Result<Var> {
        let tl = self.value(logits);
        if tl.len() != targets.len() {
            return shape_err(format!("{} logits vs {} targets", tl.len(), targets.len()));
        }
        if targets.iter().any(|&t| t != F::zero() && t != F::one()) {
            return Err(TensorError::Invalid("bce targets must be 0 or 1".into()));
        }
        let (loss, grad) = kernels::bce_with_logits(tl.data(), targets);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { logits, grad }))
    }

    /// Mean cross-entropy of row-wise softmax against target ids.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let (rows, cols) = (tl.rows(), tl.cols());
        if rows != targets.len() {
            return shape_err(format!("{rows} logit rows vs {} targets", targets.len()));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= cols) {
            return Err(TensorError::OutOfRange {
                index: bad,
                size: cols,
            });
        }
        let (loss, grad) = kernels::cross_entropy(tl.data(), cols, targets);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, grad }))
    }

    /// Negative-sampling loss for one (center, context) pair and `k x d`
    /// negatives.
    pub fn sgns_loss(&mut self, center: Var, context: Var, negatives: Var) -> Result<Var> {
        let d = self.value(center).len();
        if self.value(context).len() != d || self.value(negatives).cols() != d {
            return shape_err("sgns vectors must share one dimension".into());
        }
        let tn = self.value(negatives);
        let negs: Vec<&[F]> = (0..tn.rows()).map(|r| tn.row(r)).collect();
        let mut dc = vec![F::zero(); d];
        let mut dx = vec![F::zero(); d];
        let mut dn = vec![vec![F::zero(); d]; negs.len()];
        let loss = kernels::sgns(
            self.value(center).data(),
            self.value(context).data(),
            &negs,
            &mut dc,
            &mut dx,
            &mut dn,
        );
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Sgns {
                center,
                context,
                negatives,
            },
        ))
    }

    /// Multi-head self-attention over each segment of a stacked `n x d`
    /// input. `key_mask[i] == true` marks row `i` as padding.
    pub fn multi_head_attention(
        &mut self,
        x: Var,
        w: [Var; 4],
        heads: usize,
        segments: &[Segment],
        key_mask: Option<&[bool]>,
    ) -> Result<Var> {
        let tx = self.value(x);
        let d = tx.cols();
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(TensorError::Invalid(format!(
                "model dim {d} not divisible by {heads} heads"
            )));
        }
        for wv in w {
            if self.value(wv).shape() != [d, d] {
                return shape_err(format!(
                    "attention weight {:?}, expected [{d}, {d}]",
                    self.value(wv).shape()
                ));
            }
        }
        if let Some(m) = key_mask {
            if m.len() != tx.rows() {
                return shape_err(format!("mask of {} for {} rows", m.len(), tx.rows()));
            }
        }
        let (y, cache) = kernels::mha_forward(
            tx.data(),
            d,
            self.value(w[0]).data(),
            self.value(w[1]).data(),
            self.value(w[2]).data(),
            self.value(w[3]).data(),
            heads,
            segments,
            key_mask,
        );
        let t = Tensor::from_vec_unchecked(tx.shape(), y)?;
        Ok(self.push(
            t,
            Op::Mha {
                x,
                w,
                heads,
                segments: segments.to_vec(),
                cache: Box::new(cache),
            },
        ))
    }

    /// Attention weights recorded by an attention node, one `len x len`
    /// matrix per (segment, head).
    pub fn attention_weights(&self, v: Var) -> Option<&[Vec<F>]> {
        match &self.nodes[v.0].op {
            Op::Mha { cache, .. } => Some(&cache.attn),
            _ => None,
        }
    }

    /// Backpropagates from a scalar node. Parameter gradients are added to
    /// `store`; every other node's gradient stays readable via
    /// [`Tape::grad`].
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<F>) {
        let n = self.nodes.len();
        self.grads = (0..n).map(|_| None).collect();
        self.grads[loss.0] = Some(vec![F::one(); self.nodes[loss.0].value.len()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &g, store);
            self.grads[i] = Some(g);
        }
    }

    fn acc(&mut self, v: Var, d: Vec<F>) {
        match &mut self.grads[v.0] {
            Some(g) => g.iter_mut().zip(d).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(d),
        }
    }

    fn acc_with(&mut self, v: Var, f: impl FnOnce(&mut [F])) {
        let len = self.nodes[v.0].value.len();
        let slot = self.grads[v.0].get_or_insert_with(|| vec![F::zero(); len]);
        f(slot);
    }

    fn backprop_node(&mut self, i: usize, g: &[F], store: &mut ParamStore<F>) {
        // Temporarily take the op out so inputs can be borrowed freely.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Param(id) => store.get_mut(*id).accumulate(g),
            Op::MatMul { a, b, a_t, b_t } => {
                let (sa, sb) = (self.value(*a).shape().to_vec(), self.value(*b).shape().to_vec());
                let (m, k) = if *a_t { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
                let n = if *b_t { sb[0] } else { sb[1] };
                let mut da = vec![F::zero(); m * k];
                let mut db = vec![F::zero(); k * n];
                {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    if *a_t {
                        // dA (k x m) = op(B) dC^T
                        F::gemm(k, n, m, F::one(), bv, *b_t, g, true, F::zero(), &mut da);
                    } else {
                        // dA (m x k) = dC op(B)^T
                        F::gemm(m, n, k, F::one(), g, false, bv, !*b_t, F::zero(), &mut da);
                    }
                    if *b_t {
                        // dB (n x k) = dC^T op(A)
                        F::gemm(n, m, k, F::one(), g, true, av, *a_t, F::zero(), &mut db);
                    } else {
                        // dB (k x n) = op(A)^T dC
                        F::gemm(k, m, n, F::one(), av, !*a_t, g, false, F::zero(), &mut db);
                    }
                }
                self.acc(*a, da);
                self.acc(*b, db);
            }
            Op::Add(a, b) => {
                self.acc(*a, g.to_vec());
                self.acc(*b, g.to_vec());
            }
            Op::Mul(a, b) => {
                let da = g.iter().zip(self.value(*b).data()).map(|(&g, &y)| g * y).collect();
                let db = g.iter().zip(self.value(*a).data()).map(|(&g, &x)| g * x).collect();
                self.acc(*a, da);
                self.acc(*b, db);
            }
            Op::AddRow { x, bias } => {
                let d = self.value(*bias).len();
                let mut db = vec![F::zero(); d];
                for row in g.chunks(d) {
                    db.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                }
                self.acc(*x, g.to_vec());
                self.acc(*bias, db);
            }
            Op::Scale(x, s) => self.acc(*x, g.iter().map(|&v| v * *s).collect()),
            Op::Sigmoid(x) => {
                let y = self.nodes[i].value.data();
                let d = g.iter().zip(y).map(|(&g, &y)| g * y * (F::one() - y)).collect();
                self.acc(*x, d);
            }
            Op::Softmax { x, axis } => {
                let y = &self.nodes[i].value;
                let d = kernels::softmax_axis_backward(y.data(), g, y.shape(), *axis);
                self.acc(*x, d);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                cache,
            } => {
                let d = self.value(*gain).len();
                let (dx, dg, db) = kernels::layer_norm_backward(cache, self.value(*gain).data(), g, d);
                self.acc(*x, dx);
                self.acc(*gain, dg);
                self.acc(*bias, db);
            }
            Op::Dropout { x, mask } => {
                self.acc(*x, g.iter().zip(mask).map(|(&g, &m)| g * m).collect());
            }
            Op::Gather { table, ids } => {
                let d = self.value(*table).cols();
                self.acc_with(*table, |dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        for c in 0..d {
                            dt[id * d + c] += g[r * d + c];
                        }
                    }
                });
            }
            Op::GatherParam { table, ids } => {
                let p = store.get_mut(*table);
                let d = p.value.cols();
                for (r, &id) in ids.iter().enumerate() {
                    p.accumulate_row(id, &g[r * d..(r + 1) * d]);
                }
            }
            Op::SegmentMean { x, segments } => {
                let d = self.value(*x).cols();
                self.acc_with(*x, |dx| {
                    for (s, seg) in segments.iter().enumerate() {
                        let inv = F::one() / F::from_f64(seg.len as f64);
                        for r in seg.start..seg.start + seg.len {
                            for c in 0..d {
                                dx[r * d + c] += g[s * d + c] * inv;
                            }
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.acc(*x, vec![g[0]; n]);
            }
            Op::Bce { logits, grad } | Op::CrossEntropy { logits, grad } => {
                self.acc(*logits, grad.iter().map(|&v| v * g[0]).collect());
            }
            Op::Sgns {
                center,
                context,
                negatives,
            } => {
                let tn = self.value(*negatives);
                let d = tn.cols();
                let negs: Vec<&[F]> = (0..tn.rows()).map(|r| tn.row(r)).collect();
                let mut dc = vec![F::zero(); d];
                let mut dx = vec![F::zero(); d];
                let mut dn = vec![vec![F::zero(); d]; negs.len()];
                kernels::sgns(
                    self.value(*center).data(),
                    self.value(*context).data(),
                    &negs,
                    &mut dc,
                    &mut dx,
                    &mut dn,
                );
                let s = g[0];
                self.acc(*center, dc.into_iter().map(|v| v * s).collect());
                self.acc(*context, dx.into_iter().map(|v| v * s).collect());
                self.acc(*negatives, dn.into_iter().flatten().map(|v| v * s).collect());
            }
            Op::Mha {
                x,
                w,
                heads,
                segments,
                cache,
            } => {
                let d = self.value(*x).cols();
                let (dx, dw) = kernels::mha_backward(
                    self.value(*x).data(),
                    d,
                    [
                        self.value(w[0]).data(),
                        self.value(w[1]).data(),
                        self.value(w[2]).data(),
                        self.value(w[3]).data(),
                    ],
                    *heads,
                    segments,
                    cache,
                    g,
                );
                self.acc(*x, dx);
                for (wv, dwv) in w.iter().zip(dw) {
                    self.acc(*wv, dwv);
                }
            }
        }
        self.nodes[i].op = op;
    }
}

fn gather_rows<F: Real>(table: &Tensor<F>, ids: &[usize]) -> Result<Tensor<F>> {
    if table.rank() != 2 {
        return shape_err(format!("gather needs a matrix, got {:?}", table.shape()));
    }
    let (v, d) = (table.rows(), table.cols());
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(TensorError::OutOfRange { index: id, size: v });
        }
        out.extend_from_slice(table.row(id));
    }
    Tensor::from_vec_unchecked(&[ids.len(), d], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_sum_gradient_is_ones_times_bt() {
        let mut tape = Tape::new();
        let mut store = ParamStore::new();
        let a = tape.leaf(t(&[2, 3], &[1., 2., 3., 4., 5., 6.]));
        let b = tape.leaf(t(&[3, 2], &[1., -1., 2., 0.5, 0., 3.]));
        let c = tape.matmul(a, b).unwrap();
        let s = tape.sum(c);
        tape.backward(s, &mut store);
        // ones(2x2) * B^T: each row of dA is the row sums of B.
        assert_eq!(tape.grad(a).unwrap(), &[0., 2.5, 3., 0., 2.5, 3.]);
        // A^T * ones(2x2): each row of dB is the column sums of A... per row.
        assert_eq!(tape.grad(b).unwrap(), &[5., 5., 7., 7., 9., 9.]);
    }

    #[test]
    fn param_gradients_land_in_store() {
        let mut store = ParamStore::new();
        let w = store.add("w", t(&[2], &[3., 4.]));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let s = tape.sum(wv);
        tape.backward(s, &mut store);
        assert_eq!(store.get(w).grad.data(), &[1., 1.]);
    }

    #[test]
    fn gather_param_touches_only_used_rows() {
        let mut store = ParamStore::new();
        let e = store.add("e", t(&[4, 2], &[0., 1., 2., 3., 4., 5., 6., 7.]));
        let mut tape = Tape::new();
        let rows = tape.gather_param(&store, e, &[2, 2, 0]).unwrap();
        assert_eq!(tape.value(rows).data(), &[4., 5., 4., 5., 0., 1.]);
        let s = tape.sum(rows);
        tape.backward(s, &mut store);
        assert_eq!(store.get(e).grad.data(), &[1., 1., 0., 0., 2., 2., 0., 0.]);
    }

    #[test]
    fn single_token_attention_ignores_query_and_key() {
        let mut rng = Rng::new(5);
        let d = 4;
        let rand = |rng: &mut Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
        };
        let x = rand(&mut rng, d);
        let wv = rand(&mut rng, d * d);
        let wo = rand(&mut rng, d * d);
        let seg = [Segment { start: 0, len: 1 }];
        let mut outs = vec![];
        for _ in 0..2 {
            let mut tape = Tape::new();
            let xv = tape.leaf(t(&[1, d], &x));
            let ws = [
                tape.leaf(t(&[d, d], &rand(&mut rng, d * d))),
                tape.leaf(t(&[d, d], &rand(&mut rng, d * d))),
                tape.leaf(t(&[d, d], &wv)),
                tape.leaf(t(&[d, d], &wo)),
            ];
            let y = tape.multi_head_attention(xv, ws, 2, &seg, None).unwrap();
            outs.push(tape.value(y).clone());
        }
        let expected = t(&[1, d], &x)
            .matmul(&t(&[d, d], &wv))
            .unwrap()
            .matmul(&t(&[d, d], &wo))
            .unwrap();
        for o in outs {
            for (a, b) in o.data().iter().zip(expected.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rejects_indivisible_heads() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[2, 6]));
        let w = tape.leaf(Tensor::zeros(&[6, 6]));
        let r = tape.multi_head_attention(x, [w; 4], 4, &[Segment { start: 0, len: 2 }], None);
        assert!(matches!(r, Err(TensorError::Invalid(_))));
    }

    #[test]
    fn cross_entropy_rejects_bad_target() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[1, 3]));
        assert!(matches!(
            tape.cross_entropy(x, &[3]),
            Err(TensorError::OutOfRange { index: 3, size: 3 })
        ));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut tape = Tape::<f32>::new();
        let mut rng = Rng::new(0);
        let x = tape.leaf(Tensor::full(&[10], 2.0));
        assert_eq!(tape.dropout(x, 0.7, false, &mut rng).unwrap(), x);
        assert_eq!(tape.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert!(tape.dropout(x, 1.0, true, &mut rng).is_err());
    }
}
