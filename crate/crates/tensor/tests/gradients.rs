use crossling_tensor::init::uniform;
use crossling_tensor::{grad_check, Rng, Segment, Tape, Tensor, Var};

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-3;
const CASES: u64 = 25;

fn rand(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    uniform(shape, -1.0, 1.0, rng)
}

fn dim(rng: &mut Rng) -> usize {
    1 + rng.below(8)
}

/// Weighted sum so the upstream gradient is not all ones.
fn weighted(t: &mut Tape<f64>, x: Var, rng: &mut Rng) -> Var {
    let w = rand(t.value(x).shape(), rng);
    let wv = t.leaf(w);
    let p = t.mul(x, wv).unwrap();
    t.sum(p)
}

#[test]
fn matmul_all_transpose_modes() {
    let mut rng = Rng::new(1);
    for case in 0..CASES {
        let (m, k, n) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
        let (a_t, b_t) = (case % 2 == 1, (case / 2) % 2 == 1);
        let a_shape = if a_t { [k, m] } else { [m, k] };
        let b_shape = if b_t { [n, k] } else { [k, n] };
        let a = rand(&a_shape, &mut rng);
        let b = rand(&b_shape, &mut rng);
        let seed = rng.next_u64();
        let err = grad_check(
            |t, v| {
                let c = t.matmul_t(v[0], a_t, v[1], b_t).unwrap();
                weighted(t, c, &mut Rng::new(seed))
            },
            &[a, b],
            EPS,
        );
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn softmax_both_axes() {
    let mut rng = Rng::new(2);
    for case in 0..CASES {
        let x = rand(&[dim(&mut rng), dim(&mut rng)], &mut rng).map(|v| 3.0 * v);
        let axis = (case % 2) as usize;
        let seed = rng.next_u64();
        let err = grad_check(
            |t, v| {
                let y = t.softmax(v[0], axis).unwrap();
                weighted(t, y, &mut Rng::new(seed))
            },
            &[x],
            EPS,
        );
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn sigmoid_and_bce() {
    let mut rng = Rng::new(3);
    for case in 0..CASES {
        let n = dim(&mut rng);
        let x = rand(&[n, 1], &mut rng).map(|v| 4.0 * v);
        let targets: Vec<f64> = (0..n).map(|_| rng.below(2) as f64).collect();
        let seed = rng.next_u64();
        let err = grad_check(
            |t, v| {
                let y = t.sigmoid(v[0]);
                weighted(t, y, &mut Rng::new(seed))
            },
            &[x.clone()],
            EPS,
        );
        assert!(err < TOL, "sigmoid case {case}: {err}");
        let err = grad_check(|t, v| t.bce_with_logits(v[0], &targets).unwrap(), &[x], EPS);
        assert!(err < TOL, "bce case {case}: {err}");
    }
}

#[test]
fn cross_entropy_rows() {
    let mut rng = Rng::new(4);
    for case in 0..CASES {
        let (n, v) = (dim(&mut rng), 1 + dim(&mut rng));
        let x = rand(&[n, v], &mut rng).map(|z| 3.0 * z);
        let targets: Vec<usize> = (0..n).map(|_| rng.below(v)).collect();
        let err = grad_check(|t, vs| t.cross_entropy(vs[0], &targets).unwrap(), &[x], EPS);
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn layer_norm_all_inputs() {
    let mut rng = Rng::new(5);
    for case in 0..CASES {
        let (n, d) = (dim(&mut rng), 2 + rng.below(7));
        let x = rand(&[n, d], &mut rng);
        let g = rand(&[d], &mut rng);
        let b = rand(&[d], &mut rng);
        let seed = rng.next_u64();
        let err = grad_check(
            |t, v| {
                let y = t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap();
                weighted(t, y, &mut Rng::new(seed))
            },
            &[x, g, b],
            EPS,
        );
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn attention_with_segments_and_mask() {
    let mut rng = Rng::new(6);
    for case in 0..CASES {
        let heads = 1 + rng.below(2);
        let d = heads * (1 + rng.below(4));
        let lens: Vec<usize> = (0..1 + rng.below(3)).map(|_| 1 + rng.below(4)).collect();
        let mut segs = vec![];
        let mut start = 0;
        for &l in &lens {
            segs.push(Segment { start, len: l });
            start += l;
        }
        // mask one key in segments longer than one row
        let mut mask = vec![false; start];
        for s in &segs {
            if s.len > 1 && case % 2 == 0 {
                mask[s.start + s.len - 1] = true;
            }
        }
        let x = rand(&[start, d], &mut rng);
        let ws: Vec<Tensor<f64>> = (0..4).map(|_| rand(&[d, d], &mut rng)).collect();
        let seed = rng.next_u64();
        let mut inputs = vec![x];
        inputs.extend(ws);
        let err = grad_check(
            |t, v| {
                let y = t
                    .multi_head_attention(v[0], [v[1], v[2], v[3], v[4]], heads, &segs, Some(&mask))
                    .unwrap();
                weighted(t, y, &mut Rng::new(seed))
            },
            &inputs,
            EPS,
        );
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn sgns_loss_all_vectors() {
    let mut rng = Rng::new(7);
    for case in 0..CASES {
        let (d, k) = (dim(&mut rng), dim(&mut rng));
        let inputs = vec![rand(&[d], &mut rng), rand(&[d], &mut rng), rand(&[k, d], &mut rng)];
        let err = grad_check(|t, v| t.sgns_loss(v[0], v[1], v[2]).unwrap(), &inputs, EPS);
        assert!(err < TOL, "case {case}: {err}");
    }
}

#[test]
fn gather_pool_bias_dropout() {
    let mut rng = Rng::new(8);
    for case in 0..CASES {
        let (v, d) = (dim(&mut rng), dim(&mut rng));
        let ids: Vec<usize> = (0..1 + rng.below(6)).map(|_| rng.below(v)).collect();
        let split = rng.below(ids.len());
        let segs = if split == 0 {
            vec![Segment { start: 0, len: ids.len() }]
        } else {
            vec![
                Segment { start: 0, len: split },
                Segment { start: split, len: ids.len() - split },
            ]
        };
        let table = rand(&[v, d], &mut rng);
        let bias = rand(&[d], &mut rng);
        let seed = rng.next_u64();
        let err = grad_check(
            |t, vs| {
                let rows = t.gather(vs[0], &ids).unwrap();
                let rows = t.add_row(rows, vs[1]).unwrap();
                let rows = t.dropout(rows, 0.3, true, &mut Rng::new(seed)).unwrap();
                let pooled = t.segment_mean(rows, &segs).unwrap();
                let s = t.scale(pooled, 1.7);
                weighted(t, s, &mut Rng::new(seed ^ 1))
            },
            &[table, bias],
            EPS,
        );
        assert!(err < TOL, "case {case}: {err}");
    }
}
