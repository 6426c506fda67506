use std::collections::BTreeMap;

use crossling_core::bundle::ClassifierBundle;
use crossling_core::classifier::{ClassifierConfig, ClassifierModel};
use crossling_core::corpus::{
    build_vocab, corpus_stats, preprocess, stratified_sample, CleaningConfig, Document, Label, RawRecord, Split, PAD,
};
use crossling_core::embeddings::{build_noise_table, generate_pairs, sgns_loss};
use crossling_core::eval::{accuracy, cosine_rank, macro_f1, translation_rank_ids, ConfusionCounts};
use crossling_core::synthdata::{generate_corpus, oracle_label, SynthConfig};
use crossling_core::transfer::{swap_embedding, EmbeddingInit};
use crossling_tensor::init::uniform;
use crossling_tensor::{Rng, Tensor};
use proptest::prelude::*;

fn label(b: bool) -> Label {
    if b {
        Label::Hof
    } else {
        Label::Not
    }
}

fn labelled_pairs() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..40)
        .prop_map(|v| v.into_iter().map(|(p, l)| (label(p), label(l))).unzip())
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Tensor<f32> {
    uniform(&[rows, cols], -1.0, 1.0, &mut Rng::new(seed))
}

/// Rank by a full descending sort with ties broken by id.
fn sorted_rank(query: &[f32], target: &Tensor<f32>, t: usize) -> usize {
    let cos = |a: &[f32], b: &[f32]| {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        let n = |v: &[f32]| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (n(a) * n(b))
    };
    let mut order: Vec<(f64, usize)> = (0..target.rows()).map(|r| (cos(query, target.row(r)), r)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    1 + order.iter().position(|&(_, r)| r == t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_order((preds, labels) in labelled_pairs(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..preds.len()).collect();
        Rng::new(seed).shuffle(&mut idx);
        let p2: Vec<Label> = idx.iter().map(|&i| preds[i]).collect();
        let l2: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(accuracy(&preds, &labels).unwrap(), accuracy(&p2, &l2).unwrap());
        let f = macro_f1(&preds, &labels).unwrap();
        prop_assert!((f - macro_f1(&p2, &l2).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&f));
        let c = ConfusionCounts::from_labels(&preds, &labels).unwrap();
        prop_assert_eq!(c.total(), preds.len());
    }

    #[test]
    fn symmetric_confusion_gives_macro_equal_accuracy(tp in 1usize..20, off in 0usize..10) {
        // tp == tn and fp == fn
        let tn = tp;
        let mut preds = vec![Label::Hof; tp];
        let mut labels = vec![Label::Hof; tp];
        preds.extend(vec![Label::Not; tn]);
        labels.extend(vec![Label::Not; tn]);
        preds.extend(vec![Label::Hof; off]);
        labels.extend(vec![Label::Not; off]);
        preds.extend(vec![Label::Not; off]);
        labels.extend(vec![Label::Hof; off]);
        let acc = accuracy(&preds, &labels).unwrap();
        let f = macro_f1(&preds, &labels).unwrap();
        prop_assert!((f - acc).abs() < 1e-12);
    }

    #[test]
    fn rank_survives_positive_row_rescaling(seed in any::<u64>(), n in 2usize..30, d in 1usize..9) {
        let src = matrix(n, d, seed);
        let tgt = matrix(n, d, seed ^ 1);
        let mut rng = Rng::new(seed ^ 2);
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, rng.below(n))).collect();
        let ranks = translation_rank_ids(&src, &tgt, &pairs).unwrap();
        let mut scaled = tgt.clone();
        for r in 0..n {
            let s = 0.01 + 10.0 * rng.uniform() as f32;
            scaled.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        let src7 = src.map(|v| 7.0 * v);
        let after = translation_rank_ids(&src7, &scaled, &pairs).unwrap();
        prop_assert_eq!(&ranks, &after);
        prop_assert!(ranks.iter().all(|&r| (1..=n).contains(&r)));
    }

    #[test]
    fn rank_matches_full_sort(seed in any::<u64>()) {
        let src = matrix(50, 8, seed);
        let tgt = matrix(50, 8, seed.wrapping_add(1));
        for q in 0..50 {
            let t = (q * 7) % 50;
            prop_assert_eq!(cosine_rank(src.row(q), &tgt, t), sorted_rank(src.row(q), &tgt, t));
        }
    }

    #[test]
    fn noise_table_is_a_distribution(counts in prop::collection::vec(1u64..500, 1..40), power in 0.0f64..1.5) {
        let docs: Vec<Document> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| Document {
                tokens: vec![format!("w{i}"); c as usize],
                label: Label::Not,
            })
            .collect();
        let vocab = build_vocab(&docs, 1).unwrap();
        let table = build_noise_table(&vocab, power).unwrap();
        prop_assert!((table.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(table.probs()[PAD], 0.0);
    }

    #[test]
    fn pairs_are_symmetric_without_subsampling(ids in prop::collection::vec(2usize..30, 0..40), window in 1usize..6) {
        let pairs = generate_pairs(&ids, window, None, &mut Rng::new(0));
        let mut count: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for &(a, b) in &pairs {
            *count.entry((a, b)).or_default() += 1;
        }
        for (&(a, b), &n) in &count {
            prop_assert_eq!(count.get(&(b, a)).copied().unwrap_or(0), n);
        }
    }

    #[test]
    fn sgns_loss_is_nonnegative(seed in any::<u64>(), d in 1usize..16, k in 1usize..12) {
        let mut rng = Rng::new(seed);
        let c: Tensor<f32> = uniform(&[d], -3.0, 3.0, &mut rng);
        let x: Tensor<f32> = uniform(&[d], -3.0, 3.0, &mut rng);
        let n: Tensor<f32> = uniform(&[k, d], -3.0, 3.0, &mut rng);
        let negs: Vec<&[f32]> = (0..k).map(|i| n.row(i)).collect();
        prop_assert!(sgns_loss(c.data(), x.data(), &negs) >= 0.0);
        let zero = vec![0.0f32; d];
        let zeros: Vec<&[f32]> = (0..k).map(|_| zero.as_slice()).collect();
        let at_zero = sgns_loss(&zero, &zero, &zeros) as f64;
        prop_assert!((at_zero - (k as f64 + 1.0) * std::f64::consts::LN_2).abs() < 1e-5);
    }

    #[test]
    fn stratified_sample_is_exact_and_reproducible(n_hof in 5usize..40, n_not in 5usize..40, size in 2usize..10, seed in any::<u64>()) {
        let records: Vec<RawRecord> = (0..n_hof + n_not)
            .map(|i| RawRecord {
                id: format!("r{i}"),
                text: format!("t{i}"),
                label: label(i < n_hof),
                split: Split::Train,
            })
            .collect();
        let a = stratified_sample(&records, size, 0.5, seed).unwrap();
        let b = stratified_sample(&records, size, 0.5, seed).unwrap();
        let ids = |v: &[RawRecord]| {
            let mut x: Vec<String> = v.iter().map(|r| r.id.clone()).collect();
            x.sort();
            x
        };
        prop_assert_eq!(ids(&a), ids(&b));
        prop_assert_eq!(a.len(), size);
        let hof = a.iter().filter(|r| r.label.is_hof()).count();
        prop_assert_eq!(hof, (size as f64 * 0.5).round() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_labels_follow_the_lexicon(seed in any::<u64>(), topics in 1usize..5, p in 0.0f64..=1.0) {
        let cfg = SynthConfig {
            vocab_size: 40,
            num_topics: topics,
            num_train: 60,
            num_test: 20,
            toxic_lexicon_size: 5,
            hate_proportion: p,
            seed,
            ..SynthConfig::default()
        };
        let c = generate_corpus(&cfg).unwrap();
        for r in c.train_a.iter().chain(&c.test_a) {
            prop_assert_eq!(oracle_label(&r.text, &c.lexicon_a), r.label);
        }
        for (a, b) in c.train_a.iter().zip(&c.train_b) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(&c.translate(&a.text), &b.text);
            prop_assert_eq!(oracle_label(&b.text, &c.lexicon_b), b.label);
        }
        let hof = c.train_a.iter().filter(|r| r.label.is_hof()).count();
        prop_assert_eq!(hof, (60.0 * p).round() as usize);
        prop_assert_eq!(&generate_corpus(&cfg).unwrap().train_a, &c.train_a);

        let docs = preprocess(&c.train_a, &CleaningConfig::enhanced());
        let vocab = build_vocab(&docs, 1).unwrap();
        let stats = corpus_stats(&docs, &vocab);
        prop_assert_eq!(stats.num_texts, docs.len());
        let product = stats.avg_occurrences_per_token * stats.vocab_size as f64;
        prop_assert!((product - stats.total_tokens as f64).abs() < 1e-6 * stats.total_tokens as f64);
        prop_assert!((0.0..=1.0).contains(&stats.hate_proportion));
    }
}

#[test]
fn swap_leaves_the_source_bundle_untouched() {
    let docs: Vec<Document> = ["a b c", "b c d", "a d"]
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            tokens: t.split(' ').map(String::from).collect(),
            label: label(i % 2 == 0),
        })
        .collect();
    let vocab = build_vocab(&docs, 1).unwrap();
    let mut rng = Rng::new(1);
    let config = ClassifierConfig {
        heads: 2,
        max_len: 8,
        ..ClassifierConfig::enhanced()
    };
    let model = ClassifierModel::new(config, matrix(vocab.len(), 4, 2), &mut rng).unwrap();
    let bundle = ClassifierBundle::new(vocab.clone(), model, CleaningConfig::enhanced(), 1);
    let before = bundle.content_hash().unwrap();
    let target = build_vocab(&[Document { tokens: vec!["x".into(), "y".into()], label: Label::Not }], 1).unwrap();
    swap_embedding(&bundle.model, &target, EmbeddingInit::XavierFresh, 3).unwrap();
    assert_eq!(bundle.content_hash().unwrap(), before);
}

#[test]
fn random_spaces_give_a_middling_median_rank() {
    // a null model: unrelated 300-dim spaces rank the true partner uniformly
    let mut inside = 0;
    for seed in 0..20 {
        let src = matrix(50, 300, 100 + seed);
        let tgt = matrix(1000, 300, 200 + seed);
        let pairs: Vec<(usize, usize)> = (0..50).map(|i| (i, i * 13)).collect();
        let mut ranks = translation_rank_ids(&src, &tgt, &pairs).unwrap();
        ranks.sort_unstable();
        let median = (ranks[24] + ranks[25]) as f64 / 2.0;
        if (250.0..=750.0).contains(&median) {
            inside += 1;
        }
    }
    assert!(inside >= 18, "median inside [250, 750] for {inside}/20 seeds");
}
