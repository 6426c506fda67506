//! Forward and backward kernels on raw row-major buffers. The tape calls
//! these; the embedding trainer calls a few of them directly.

use crate::Real;

/// Additive score given to masked attention keys.
pub const MASK_SCORE: f64 = -1e9;

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Softmax over the slices of `x` along one axis of `shape`.
pub fn softmax_axis<F: Real>(x: &[F], shape: &[usize], axis: usize) -> Vec<F> {
    let (outer, len, inner) = axis_split(shape, axis);
    let mut out = vec![F::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut max = F::neg_infinity();
            for j in 0..len {
                max = max.max(x[base + j * inner]);
            }
            let mut sum = F::zero();
            for j in 0..len {
                let e = (x[base + j * inner] - max).exp();
                out[base + j * inner] = e;
                sum += e;
            }
            for j in 0..len {
                out[base + j * inner] /= sum;
            }
        }
    }
    out
}

/// Given softmax output `y` and upstream `dy`, returns `dx`.
pub fn softmax_axis_backward<F: Real>(y: &[F], dy: &[F], shape: &[usize], axis: usize) -> Vec<F> {
    let (outer, len, inner) = axis_split(shape, axis);
    let mut dx = vec![F::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut dot = F::zero();
            for j in 0..len {
                dot += y[base + j * inner] * dy[base + j * inner];
            }
            for j in 0..len {
                let k = base + j * inner;
                dx[k] = y[k] * (dy[k] - dot);
            }
        }
    }
    dx
}

pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let len = shape[axis];
    let inner = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

/// Row-wise softmax in place on a `rows x cols` buffer.
pub fn softmax_rows_inplace<F: Real>(x: &mut [F], cols: usize) {
    for row in x.chunks_mut(cols) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Saved statistics of a layer-norm forward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache<F> {
    pub xhat: Vec<F>,
    pub inv_std: Vec<F>,
}

pub fn layer_norm<F: Real>(
    x: &[F],
    cols: usize,
    gain: &[F],
    bias: &[F],
    eps: F,
) -> (Vec<F>, LayerNormCache<F>) {
    let rows = x.len() / cols;
    let n = cols as f64;
    let eps = eps.as_f64();
    let mut y = vec![F::zero(); x.len()];
    let mut xhat = vec![F::zero(); x.len()];
    let mut inv_std = vec![F::zero(); rows];
    // Statistics accumulate in f64 so that f32 rows still standardize to
    // mean ~1e-7.
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / n;
        let var = row.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[r] = F::from_f64(is);
        for c in 0..cols {
            let h = F::from_f64((row[c].as_f64() - mean) * is);
            xhat[r * cols + c] = h;
            y[r * cols + c] = gain[c] * h + bias[c];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns `(dx, dgain, dbias)`.
pub fn layer_norm_backward<F: Real>(
    cache: &LayerNormCache<F>,
    gain: &[F],
    dy: &[F],
    cols: usize,
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let rows = dy.len() / cols;
    let n = F::from_f64(cols as f64);
    let mut dx = vec![F::zero(); dy.len()];
    let mut dgain = vec![F::zero(); cols];
    let mut dbias = vec![F::zero(); cols];
    let mut dxhat = vec![F::zero(); cols];
    for r in 0..rows {
        let xh = &cache.xhat[r * cols..(r + 1) * cols];
        let g = &dy[r * cols..(r + 1) * cols];
        let mut mean_d = F::zero();
        let mut mean_dx = F::zero();
        for c in 0..cols {
            dgain[c] += g[c] * xh[c];
            dbias[c] += g[c];
            dxhat[c] = g[c] * gain[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xh[c];
        }
        mean_d /= n;
        mean_dx /= n;
        let is = cache.inv_std[r];
        for c in 0..cols {
            dx[r * cols + c] = is * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    (dx, dgain, dbias)
}

/// Mean binary cross-entropy on logits, `softplus(z) - t * z`.
/// Returns the loss and `dloss/dz`.
pub fn bce_with_logits<F: Real>(logits: &[F], targets: &[F]) -> (F, Vec<F>) {
    let n = F::from_f64(logits.len() as f64);
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(targets) {
        // max(z, 0) - t z first so that large logits cancel exactly
        loss += (z.max(F::zero()) - t * z) + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - t) / n);
    }
    (loss / n, grad)
}

/// Mean of `-log softmax(row)[target]` over rows. Returns the loss and the
/// gradient with respect to the logits.
pub fn cross_entropy<F: Real>(logits: &[F], cols: usize, targets: &[usize]) -> (F, Vec<F>) {
    let rows = targets.len();
    let n = F::from_f64(rows as f64);
    let mut probs = logits.to_vec();
    softmax_rows_inplace(&mut probs, cols);
    let mut loss = F::zero();
    for (r, &t) in targets.iter().enumerate() {
        let row = &logits[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
        loss += lse - row[t];
        probs[r * cols + t] -= F::one();
    }
    for p in probs.iter_mut() {
        *p /= n;
    }
    (loss / n, probs)
}

/// Skip-gram negative-sampling loss for one positive pair:
/// `softplus(-c.x) + sum_j softplus(c.n_j)`.
///
/// Gradients are written into (not added to) the output buffers.
pub fn sgns<F: Real>(
    center: &[F],
    context: &[F],
    negatives: &[&[F]],
    d_center: &mut [F],
    d_context: &mut [F],
    d_negatives: &mut [Vec<F>],
) -> F {
    let dot = |a: &[F], b: &[F]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<F>();
    let pos = dot(center, context);
    let mut loss = softplus(-pos);
    // d softplus(-s)/ds = -sigmoid(-s)
    let gp = -sigmoid(-pos);
    for i in 0..center.len() {
        d_center[i] = gp * context[i];
        d_context[i] = gp * center[i];
    }
    for (neg, dn) in negatives.iter().zip(d_negatives.iter_mut()) {
        let s = dot(center, neg);
        loss += softplus(s);
        let gn = sigmoid(s);
        for i in 0..center.len() {
            d_center[i] += gn * neg[i];
            dn[i] = gn * center[i];
        }
    }
    loss
}

/// Contiguous run of rows forming one sequence in a stacked batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

/// Everything the attention backward pass needs.
#[derive(Debug, Clone)]
pub struct MhaCache<F> {
    pub q: Vec<F>,
    pub k: Vec<F>,
    pub v: Vec<F>,
    /// Attention weights per (segment, head), each `len x len`.
    pub attn: Vec<Vec<F>>,
    /// Concatenated head outputs before the output projection.
    pub concat: Vec<F>,
}

/// Multi-head scaled dot-product self-attention over every segment of a
/// stacked `n x d` input. Weights are `d x d`, applied as `x W`. Keys whose
/// `key_mask` entry is `true` receive an additive [`MASK_SCORE`].
#[allow(clippy::too_many_arguments)]
pub fn mha_forward<F: Real>(
    x: &[F],
    d: usize,
    wq: &[F],
    wk: &[F],
    wv: &[F],
    wo: &[F],
    heads: usize,
    segments: &[Segment],
    key_mask: Option<&[bool]>,
) -> (Vec<F>, MhaCache<F>) {
    let n = x.len() / d;
    let dh = d / heads;
    let proj = |w: &[F]| {
        let mut out = vec![F::zero(); n * d];
        F::gemm(n, d, d, F::one(), x, false, w, false, F::zero(), &mut out);
        out
    };
    let (q, k, v) = (proj(wq), proj(wk), proj(wv));
    let scale = F::one() / F::from_f64(dh as f64).sqrt();
    let mask_score = F::from_f64(MASK_SCORE);
    let mut concat = vec![F::zero(); n * d];
    let mut attn = Vec::with_capacity(segments.len() * heads);
    for seg in segments {
        let l = seg.len;
        for h in 0..heads {
            let qh = head_block(&q, seg, h, d, dh);
            let kh = head_block(&k, seg, h, d, dh);
            let vh = head_block(&v, seg, h, d, dh);
            let mut s = vec![F::zero(); l * l];
            F::gemm(l, dh, l, scale, &qh, false, &kh, true, F::zero(), &mut s);
            if let Some(mask) = key_mask {
                for j in 0..l {
                    if mask[seg.start + j] {
                        for i in 0..l {
                            s[i * l + j] += mask_score;
                        }
                    }
                }
            }
            softmax_rows_inplace(&mut s, l);
            let mut o = vec![F::zero(); l * dh];
            F::gemm(l, l, dh, F::one(), &s, false, &vh, false, F::zero(), &mut o);
            for i in 0..l {
                let dst = (seg.start + i) * d + h * dh;
                concat[dst..dst + dh].copy_from_slice(&o[i * dh..(i + 1) * dh]);
            }
            attn.push(s);
        }
    }
    let mut out = vec![F::zero(); n * d];
    F::gemm(n, d, d, F::one(), &concat, false, wo, false, F::zero(), &mut out);
    (
        out,
        MhaCache {
            q,
            k,
            v,
            attn,
            concat,
        },
    )
}

/// Gradients of [`mha_forward`]: `(dx, [dwq, dwk, dwv, dwo])`.
#[allow(clippy::too_many_arguments)]
pub fn mha_backward<F: Real>(
    x: &[F],
    d: usize,
    w: [&[F]; 4],
    heads: usize,
    segments: &[Segment],
    cache: &MhaCache<F>,
    dy: &[F],
) -> (Vec<F>, [Vec<F>; 4]) {
    let [wq, wk, wv, wo] = w;
    let n = x.len() / d;
    let dh = d / heads;
    let scale = F::one() / F::from_f64(dh as f64).sqrt();

    let mut dwo = vec![F::zero(); d * d];
    F::gemm(d, n, d, F::one(), &cache.concat, true, dy, false, F::zero(), &mut dwo);
    let mut dconcat = vec![F::zero(); n * d];
    F::gemm(n, d, d, F::one(), dy, false, wo, true, F::zero(), &mut dconcat);

    let mut dq = vec![F::zero(); n * d];
    let mut dk = vec![F::zero(); n * d];
    let mut dv = vec![F::zero(); n * d];
    let mut a_iter = cache.attn.iter();
    for seg in segments {
        let l = seg.len;
        for h in 0..heads {
            let a = a_iter.next().expect("attention cache matches segments");
            let qh = head_block(&cache.q, seg, h, d, dh);
            let kh = head_block(&cache.k, seg, h, d, dh);
            let vh = head_block(&cache.v, seg, h, d, dh);
            let doh = head_block(&dconcat, seg, h, d, dh);

            let mut da = vec![F::zero(); l * l];
            F::gemm(l, dh, l, F::one(), &doh, false, &vh, true, F::zero(), &mut da);
            let mut dvh = vec![F::zero(); l * dh];
            F::gemm(l, l, dh, F::one(), a, true, &doh, false, F::zero(), &mut dvh);
            // softmax backward, then the score scale
            let mut ds = softmax_axis_backward(a, &da, &[l, l], 1);
            ds.iter_mut().for_each(|v| *v *= scale);
            let mut dqh = vec![F::zero(); l * dh];
            F::gemm(l, l, dh, F::one(), &ds, false, &kh, false, F::zero(), &mut dqh);
            let mut dkh = vec![F::zero(); l * dh];
            F::gemm(l, l, dh, F::one(), &ds, true, &qh, false, F::zero(), &mut dkh);
            for i in 0..l {
                let dst = (seg.start + i) * d + h * dh;
                let src = i * dh..(i + 1) * dh;
                dq[dst..dst + dh].copy_from_slice(&dqh[src.clone()]);
                dk[dst..dst + dh].copy_from_slice(&dkh[src.clone()]);
                dv[dst..dst + dh].copy_from_slice(&dvh[src]);
            }
        }
    }

    let mut dx = vec![F::zero(); n * d];
    let mut grads: [Vec<F>; 4] = Default::default();
    for (i, (dproj, wmat)) in [(&dq, wq), (&dk, wk), (&dv, wv)].into_iter().enumerate() {
        let mut dw = vec![F::zero(); d * d];
        F::gemm(d, n, d, F::one(), x, true, dproj, false, F::zero(), &mut dw);
        F::gemm(n, d, d, F::one(), dproj, false, wmat, true, F::one(), &mut dx);
        grads[i] = dw;
    }
    grads[3] = dwo;
    (dx, grads)
}

fn head_block<F: Real>(m: &[F], seg: &Segment, h: usize, d: usize, dh: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(seg.len * dh);
    for i in 0..seg.len {
        let off = (seg.start + i) * d + h * dh;
        out.extend_from_slice(&m[off..off + dh]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric_and_stable() {
        assert_eq!(softmax_axis(&[0.0f32, 0.0], &[2], 0), vec![0.5, 0.5]);
        assert_eq!(softmax_axis(&[1000.0f32, 1000.0], &[2], 0), vec![0.5, 0.5]);
        let y = softmax_axis(&[-1000.0f32, 0.0, 1000.0], &[3], 0);
        assert!(y.iter().all(|v| v.is_finite()));
        assert_eq!(y[2], 1.0);
    }

    #[test]
    fn softmax_column_axis() {
        // 2x2, softmax down each column
        let y = softmax_axis(&[0.0f64, 1.0, 0.0, 1.0], &[2, 2], 0);
        assert_eq!(y, vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn softplus_and_sigmoid_extremes() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0f32), 1000.0);
        assert_eq!(softplus(-1000.0f32), 0.0);
        assert_eq!(sigmoid(-1000.0f32), 0.0);
        assert_eq!(sigmoid(1000.0f32), 1.0);
    }

    #[test]
    fn bce_values() {
        let (l, g) = bce_with_logits(&[0.0f64], &[1.0]);
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!((g[0] + 0.5).abs() < 1e-12);
        // softplus(20) - 20 = ln(1 + e^-20)
        let (l, _) = bce_with_logits(&[20.0f64], &[1.0]);
        assert!((l - 2.061153620314381e-9).abs() < 1e-18);
    }

    #[test]
    fn cross_entropy_values() {
        let (l, _) = cross_entropy(&[0.5f64; 4], 4, &[2]);
        assert!((l - 4f64.ln()).abs() < 1e-12);
        // ln(1 + 3 e^-10)
        let (l, _) = cross_entropy(&[10.0f64, 0.0, 0.0, 0.0], 4, &[0]);
        assert!((l - 1.361905149382713e-4).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_constant_and_unit_vectors() {
        let (y, _) = layer_norm(&[3.0f64; 4], 4, &[1.0; 4], &[0.0; 4], 1e-5);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
        let (y, _) = layer_norm(&[1.0f64, -1.0], 2, &[1.0; 2], &[0.0; 2], 1e-5);
        assert!((y[0] - 1.0).abs() < 1e-5 && (y[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn sgns_zero_dots() {
        let z = [0.0f64; 3];
        let mut dc = [0.0; 3];
        let mut dx = [0.0; 3];
        let mut dn = vec![vec![0.0; 3]];
        let l = sgns(&z, &z, &[&z], &mut dc, &mut dx, &mut dn);
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);
    }
}
