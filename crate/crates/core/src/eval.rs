//! Reference metrics, multi-run aggregation and the cross-lingual
//! translation-ranking probe.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crossling_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::classifier::TrainRunResult;
use crate::corpus::{Label, Vocabulary};
use crate::{Error, Result};

/// Binary confusion counts with HOF as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        check_lengths(predictions, labels)?;
        let mut c = ConfusionCounts::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p.is_hof(), l.is_hof()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with NOT treated as the positive class.
    pub fn flipped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }

    /// F1 of the positive class; `None` when the class appears in neither
    /// predictions nor labels.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

fn check_lengths(predictions: &[Label], labels: &[Label]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Unweighted mean of the HOF and NOT F1 scores. A class absent from both
/// sequences contributes 0.
pub fn macro_f1(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    let c = ConfusionCounts::from_labels(predictions, labels)?;
    let mut sum = 0.0;
    for (name, counts) in [("HOF", c), ("NOT", c.flipped())] {
        match counts.f1() {
            Some(f) => sum += f,
            None => log::warn!("class {name} absent from predictions and labels; F1 taken as 0"),
        }
    }
    Ok(sum / 2.0)
}

/// Per-epoch mean and min/max band of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Metric name to one [`Band`] per epoch.
pub type Aggregate = BTreeMap<String, Vec<Band>>;

pub fn aggregate_runs(results: &[TrainRunResult]) -> Result<Aggregate> {
    let Some(first) = results.first() else {
        return Err(Error::Data("no runs to aggregate".into()));
    };
    let epochs = first.epochs.len();
    if let Some(bad) = results.iter().find(|r| r.epochs.len() != epochs) {
        return Err(Error::Data(format!(
            "mismatched epoch counts: {epochs} vs {}",
            bad.epochs.len()
        )));
    }
    let mut out = Aggregate::new();
    for metric in crate::classifier::EpochMetrics::NAMES {
        let bands = (0..epochs)
            .map(|e| {
                let vals: Vec<f64> = results.iter().map(|r| r.epochs[e].get(metric)).collect();
                Band {
                    mean: vals.iter().sum::<f64>() / vals.len() as f64,
                    min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                    max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect();
        out.insert(metric.to_string(), bands);
    }
    Ok(out)
}

/// One probe concept with its word in each language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationPair {
    pub concept: String,
    pub source_word: String,
    pub target_word: String,
}

/// Reads `concept<TAB>source_word<TAB>target_word` rows. A first row equal
/// to `concept\tsource_word\ttarget_word` is treated as a header.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<TranslationPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (i == 0 && line == "concept\tsource_word\ttarget_word") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Row {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        pairs.push(TranslationPair {
            concept: cols[0].to_string(),
            source_word: cols[1].trim().to_string(),
            target_word: cols[2].trim().to_string(),
        });
    }
    Ok(pairs)
}

pub fn pairs_to_tsv(pairs: &[TranslationPair]) -> String {
    let mut s = String::from("concept\tsource_word\ttarget_word\n");
    for p in pairs {
        s.push_str(&format!("{}\t{}\t{}\n", p.concept, p.source_word, p.target_word));
    }
    s
}

fn cosine_row(a: &[f32], b: &[f32], b_norm: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let denom = norm(a) * b_norm;
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt()
}

/// Rank of `target_id` among all rows of `target` by cosine similarity to
/// `query`: 1 + rows strictly more similar + equally similar rows with a
/// smaller id.
pub fn cosine_rank(query: &[f32], target: &Tensor<f32>, target_id: usize) -> usize {
    let qn = norm(query);
    let sims: Vec<f64> = (0..target.rows())
        .map(|r| cosine_row(target.row(r), query, qn))
        .collect();
    let truth = sims[target_id];
    1 + sims
        .iter()
        .enumerate()
        .filter(|&(id, &s)| s > truth || (s == truth && id < target_id))
        .count()
}

/// Ranks for `(source_id, target_id)` pairs of two embedding matrices.
pub fn translation_rank_ids(
    source: &Tensor<f32>,
    target: &Tensor<f32>,
    pairs: &[(usize, usize)],
) -> Result<Vec<usize>> {
    if source.cols() != target.cols() {
        return Err(Error::Data(format!(
            "embedding dims differ: {} vs {}",
            source.cols(),
            target.cols()
        )));
    }
    pairs
        .iter()
        .map(|&(s, t)| {
            if s >= source.rows() || t >= target.rows() {
                return Err(Error::Data(format!("pair ({s}, {t}) out of range")));
            }
            Ok(cosine_rank(source.row(s), target, t))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Query with the source word, rank among target-vocabulary words.
    #[default]
    SourceToTarget,
    /// Query with the target word, rank among source-vocabulary words.
    TargetToSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub pair: TranslationPair,
    /// `None` when either word is out of vocabulary.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub direction: Direction,
    pub candidates: usize,
    pub entries: Vec<RankEntry>,
}

impl RankReport {
    pub fn ranks(&self) -> Vec<usize> {
        self.entries.iter().filter_map(|e| e.rank).collect()
    }

    pub fn median_rank(&self) -> Option<f64> {
        let mut r = self.ranks();
        if r.is_empty() {
            return None;
        }
        r.sort_unstable();
        let n = r.len();
        Some(if n % 2 == 1 {
            r[n / 2] as f64
        } else {
            (r[n / 2 - 1] + r[n / 2]) as f64 / 2.0
        })
    }

    pub fn rank1_count(&self) -> usize {
        self.ranks().iter().filter(|&&r| r == 1).count()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("concept\tsource_word\ttarget_word\trank\n");
        for e in &self.entries {
            let rank = e.rank.map_or_else(|| "OOV".to_string(), |r| r.to_string());
            s.push_str(&format!(
                "{}\t{}\t{}\t{rank}\n",
                e.pair.concept, e.pair.source_word, e.pair.target_word
            ));
        }
        s
    }
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = |sel: fn(&RankEntry) -> &str, head: &str| {
            self.entries
                .iter()
                .map(|e| sel(e).chars().count())
                .chain([head.len()])
                .max()
                .unwrap_or(0)
        };
        let (wc, ws, wt) = (
            w(|e| &e.pair.concept, "concept"),
            w(|e| &e.pair.source_word, "source"),
            w(|e| &e.pair.target_word, "target"),
        );
        writeln!(f, "{:wc$}  {:ws$}  {:wt$}  rank", "concept", "source", "target")?;
        for e in &self.entries {
            let rank = e.rank.map_or_else(|| "OOV".to_string(), |r| r.to_string());
            writeln!(
                f,
                "{:wc$}  {:ws$}  {:wt$}  {rank}",
                e.pair.concept, e.pair.source_word, e.pair.target_word
            )?;
        }
        match self.median_rank() {
            Some(m) => write!(
                f,
                "median rank {m} of {} candidates; {} at rank 1",
                self.candidates,
                self.rank1_count()
            ),
            None => write!(f, "no in-vocabulary pairs"),
        }
    }
}

/// Word-level translation probe between two embedding spaces, compared
/// directly by cosine similarity with no alignment step.
pub fn translation_rank(
    source: (&Tensor<f32>, &Vocabulary),
    target: (&Tensor<f32>, &Vocabulary),
    pairs: &[TranslationPair],
    direction: Direction,
) -> Result<RankReport> {
    let (query, candidates) = match direction {
        Direction::SourceToTarget => (source, target),
        Direction::TargetToSource => (target, source),
    };
    if query.0.cols() != candidates.0.cols() {
        return Err(Error::Data(format!(
            "embedding dims differ: {} vs {}",
            query.0.cols(),
            candidates.0.cols()
        )));
    }
    let entries = pairs
        .iter()
        .map(|p| {
            let (qw, cw) = match direction {
                Direction::SourceToTarget => (&p.source_word, &p.target_word),
                Direction::TargetToSource => (&p.target_word, &p.source_word),
            };
            let rank = match (query.1.id(qw), candidates.1.id(cw)) {
                (Some(q), Some(c)) => Some(cosine_rank(query.0.row(q), candidates.0, c)),
                _ => {
                    log::warn!("translation pair {:?} is out of vocabulary", p.concept);
                    None
                }
            };
            RankEntry {
                pair: p.clone(),
                rank,
            }
        })
        .collect();
    Ok(RankReport {
        direction,
        candidates: candidates.0.rows(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crossling_tensor::{init::uniform, Rng};
    use Label::{Hof as H, Not as N};

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[H, N], &[H, N]).unwrap(), 1.0);
        assert_eq!(accuracy(&[H, N], &[N, H]).unwrap(), 0.0);
        assert_eq!(accuracy(&[H, N, N, N], &[H, N, H, N]).unwrap(), 0.75);
        assert!(accuracy(&[H], &[H, N]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn macro_f1_hand_computed() {
        let m = macro_f1(&[H, N, N, N], &[H, H, N, N]).unwrap();
        assert!((m - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(macro_f1(&[H, N, H, N], &[H, N, H, N]).unwrap(), 1.0);
        let all_not = macro_f1(&[N, N, N, N], &[H, H, N, N]).unwrap();
        assert!((all_not - 1.0 / 3.0).abs() < 1e-12);
        assert!(all_not < accuracy(&[N, N, N, N], &[H, H, N, N]).unwrap());
    }

    #[test]
    fn macro_f1_absent_class() {
        // HOF never appears: its F1 counts as 0
        assert_eq!(macro_f1(&[N, N], &[N, N]).unwrap(), 0.5);
    }

    #[test]
    fn confusion_total() {
        let c = ConfusionCounts::from_labels(&[H, N, H, N, N], &[H, H, N, N, N]).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 1, 2, 1));
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn self_and_permuted_ranks() {
        let mut rng = Rng::new(4);
        let src: Tensor<f32> = uniform(&[30, 8], -1.0, 1.0, &mut rng);
        assert_eq!(translation_rank_ids(&src, &src, &[(5, 5)]).unwrap(), vec![1]);
        let mut perm: Vec<usize> = (0..30).collect();
        rng.shuffle(&mut perm);
        let mut tgt = Tensor::zeros(&[30, 8]);
        for (i, &p) in perm.iter().enumerate() {
            tgt.row_mut(p).copy_from_slice(src.row(i));
        }
        let pairs: Vec<_> = perm.iter().enumerate().map(|(i, &p)| (i, p)).collect();
        assert!(translation_rank_ids(&src, &tgt, &pairs).unwrap().iter().all(|&r| r == 1));
    }

    #[test]
    fn ties_broken_by_id() {
        // rows 0 and 2 identical to the query; row 1 orthogonal
        let t = Tensor::from_vec(&[3, 2], vec![1.0f32, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(cosine_rank(&[1.0, 0.0], &t, 0), 1);
        assert_eq!(cosine_rank(&[1.0, 0.0], &t, 2), 2);
        assert_eq!(cosine_rank(&[1.0, 0.0], &t, 1), 3);
    }

    #[test]
    fn dim_mismatch_rejected() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[2, 4]);
        assert!(translation_rank_ids(&a, &b, &[(0, 0)]).is_err());
    }

    #[test]
    fn report_marks_oov_and_summarizes() {
        let vocab = |w: &[&str]| {
            let mut toks = vec!["<PAD>".to_string(), "<UNK>".to_string()];
            toks.extend(w.iter().map(|s| s.to_string()));
            let n = toks.len();
            Vocabulary::from_parts(toks, vec![1; n]).unwrap()
        };
        let va = vocab(&["x", "y"]);
        let vb = vocab(&["p", "q"]);
        let m = uniform::<f32>(&[4, 5], -1.0, 1.0, &mut Rng::new(1));
        let pairs = vec![
            TranslationPair {
                concept: "one".into(),
                source_word: "x".into(),
                target_word: "p".into(),
            },
            TranslationPair {
                concept: "two".into(),
                source_word: "zz".into(),
                target_word: "q".into(),
            },
        ];
        let r = translation_rank((&m, &va), (&m, &vb), &pairs, Direction::SourceToTarget).unwrap();
        assert_eq!(r.entries[0].rank, Some(1));
        assert_eq!(r.entries[1].rank, None);
        assert_eq!(r.rank1_count(), 1);
        assert!(r.to_tsv().contains("two\tzz\tq\tOOV"));
        assert!(r.to_string().contains("median rank 1"));
        let back = translation_rank((&m, &va), (&m, &vb), &pairs, Direction::TargetToSource).unwrap();
        assert_eq!(back.entries[0].rank, Some(1));
    }

    #[test]
    fn pair_file_roundtrip() {
        let pairs = vec![TranslationPair {
            concept: "water".into(),
            source_word: "पानी".into(),
            target_word: "জল".into(),
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), pairs_to_tsv(&pairs)).unwrap();
        assert_eq!(load_pairs(f.path()).unwrap(), pairs);
    }
}
