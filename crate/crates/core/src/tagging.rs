//! Ground-truth tag assignment, dataset splits, micro-averaged metrics and
//! the frequency-matched random baseline.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TransactionDb;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::mining::TagVocabulary;

/// Binary painting x tag incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct TagMatrix {
    n_paintings: usize,
    n_tags: usize,
    data: Vec<bool>,
}

impl TagMatrix {
    pub fn zeros(n_paintings: usize, n_tags: usize) -> Self {
        TagMatrix {
            n_paintings,
            n_tags,
            data: vec![false; n_paintings * n_tags],
        }
    }

    pub fn n_paintings(&self) -> usize {
        self.n_paintings
    }

    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn get(&self, painting: usize, tag: usize) -> bool {
        self.data[painting * self.n_tags + tag]
    }

    pub fn set(&mut self, painting: usize, tag: usize, value: bool) {
        self.data[painting * self.n_tags + tag] = value;
    }

    /// Number of paintings carrying tag `tag`.
    pub fn column_count(&self, tag: usize) -> usize {
        (0..self.n_paintings).filter(|&p| self.get(p, tag)).count()
    }

    /// Painting-level frequency of tag `tag`.
    pub fn column_frequency(&self, tag: usize) -> f64 {
        self.column_count(tag) as f64 / self.n_paintings as f64
    }

    /// Tags per painting, in painting order.
    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.n_paintings)
            .map(|p| (0..self.n_tags).filter(|&t| self.get(p, t)).count())
            .collect()
    }

    /// Restricts the matrix to `rows` (painting indices), preserving order.
    pub fn select_rows(&self, rows: &[usize]) -> TagMatrix {
        let mut out = TagMatrix::zeros(rows.len(), self.n_tags);
        for (i, &p) in rows.iter().enumerate() {
            for t in 0..self.n_tags {
                out.set(i, t, self.get(p, t));
            }
        }
        out
    }

    /// Restricts the matrix to `cols` (tag indices), preserving order.
    pub fn select_cols(&self, cols: &[usize]) -> TagMatrix {
        let mut out = TagMatrix::zeros(self.n_paintings, cols.len());
        for p in 0..self.n_paintings {
            for (j, &t) in cols.iter().enumerate() {
                out.set(p, j, self.get(p, t));
            }
        }
        out
    }
}

/// Real-valued painting x tag probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    n_paintings: usize,
    n_tags: usize,
    data: Vec<f32>,
}

impl PredictionMatrix {
    pub fn zeros(n_paintings: usize, n_tags: usize) -> Self {
        PredictionMatrix {
            n_paintings,
            n_tags,
            data: vec![0.0; n_paintings * n_tags],
        }
    }

    pub fn n_paintings(&self) -> usize {
        self.n_paintings
    }

    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn get(&self, painting: usize, tag: usize) -> f32 {
        self.data[painting * self.n_tags + tag]
    }

    pub fn set(&mut self, painting: usize, tag: usize, value: f32) {
        debug_assert!((0.0..=1.0).contains(&value), "probability out of range");
        self.data[painting * self.n_tags + tag] = value;
    }

    pub fn row(&self, painting: usize) -> &[f32] {
        &self.data[painting * self.n_tags..(painting + 1) * self.n_tags]
    }

    /// Binarized view at the fixed 0.5 threshold.
    pub fn binarize(&self) -> TagMatrix {
        let mut out = TagMatrix::zeros(self.n_paintings, self.n_tags);
        for p in 0..self.n_paintings {
            for t in 0..self.n_tags {
                out.set(p, t, self.get(p, t) > 0.5);
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> PredictionMatrix {
        let mut out = PredictionMatrix::zeros(rows.len(), self.n_tags);
        for (i, &p) in rows.iter().enumerate() {
            for t in 0..self.n_tags {
                out.set(i, t, self.get(p, t));
            }
        }
        out
    }

    pub fn select_cols(&self, cols: &[usize]) -> PredictionMatrix {
        let mut out = PredictionMatrix::zeros(self.n_paintings, cols.len());
        for p in 0..self.n_paintings {
            for (j, &t) in cols.iter().enumerate() {
                out.set(p, j, self.get(p, t));
            }
        }
        out
    }
}

/// Scope for ground-truth containment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignScope {
    /// A tag is present when one sentence contains all its items.
    Sentence,
    /// Ablation: items may be spread over the whole description.
    Description,
}

/// Derives the ground-truth matrix: tag `t` is present for painting `p` iff
/// some transaction owned by `p` contains every item of `t`.
pub fn assign_tags(db: &TransactionDb, vocab: &TagVocabulary) -> TagMatrix {
    assign_tags_scoped(db, vocab, AssignScope::Sentence)
}

pub fn assign_tags_scoped(
    db: &TransactionDb,
    vocab: &TagVocabulary,
    scope: AssignScope,
) -> TagMatrix {
    let mut matrix = TagMatrix::zeros(db.n_paintings(), vocab.len());
    match scope {
        AssignScope::Sentence => {
            for (i, transaction) in db.transactions().iter().enumerate() {
                let p = db.owner(i);
                for (t, tag) in vocab.tags().iter().enumerate() {
                    if !matrix.get(p, t) && tag.items.iter().all(|item| transaction.contains(item)) {
                        matrix.set(p, t, true);
                    }
                }
            }
        }
        AssignScope::Description => {
            let mut unions: Vec<std::collections::BTreeSet<String>> =
                vec![Default::default(); db.n_paintings()];
            for (i, transaction) in db.transactions().iter().enumerate() {
                unions[db.owner(i)].extend(transaction.iter().cloned());
            }
            for (p, tokens) in unions.iter().enumerate() {
                for (t, tag) in vocab.tags().iter().enumerate() {
                    if tag.items.iter().all(|item| tokens.contains(item)) {
                        matrix.set(p, t, true);
                    }
                }
            }
        }
    }
    matrix
}

/// Disjoint train/validation/test painting indices, reproducible from the
/// seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffles `0..n` deterministically and partitions by the given ratios
/// (which must sum to 1). Errors when any part would be empty.
pub fn make_split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (rt, rv, rs) = ratios;
    if (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} do not sum to 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = (rt * n as f64).round() as usize;
    let n_val = (rv * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Config(format!(
            "split of {n} paintings with ratios {ratios:?} leaves an empty part"
        )));
    }
    Ok(Split {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
        seed,
    })
}

/// Micro-averaged precision, recall and F1 pooled over all painting-tag
/// cells. All 0/0 cases resolve to 0.
pub fn micro_metrics(pred: &TagMatrix, truth: &TagMatrix) -> Result<(f64, f64, f64)> {
    if pred.n_paintings != truth.n_paintings || pred.n_tags != truth.n_tags {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.n_paintings, pred.n_tags, truth.n_paintings, truth.n_tags
        )));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (p, t) in pred.data.iter().zip(&truth.data) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(prf(tp, fp, fn_))
}

fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    (precision, recall, f1_score(precision, recall))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One metrics row; `ratio_f1` is absent when the random baseline scored 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ratio_f1: Option<f64>,
}

impl MetricsReport {
    pub fn new(precision: f64, recall: f64) -> Self {
        MetricsReport {
            precision,
            recall,
            f1: f1_score(precision, recall),
            ratio_f1: None,
        }
    }

    pub fn with_ratio(mut self, f1_random: f64) -> Self {
        self.ratio_f1 = ratio_f1(self.f1, f1_random);
        self
    }
}

/// Trial-averaged metrics of the frequency-matched random guesser.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Variance of per-trial F1, recorded so convergence can be inspected.
    pub f1_variance: f64,
    pub trials: usize,
}

/// Draws each cell Bernoulli with the tag's training-split occurrence
/// probability; metrics are averaged over `trials` runs seeded as
/// `base seed + trial index`.
pub fn random_baseline(
    train_freqs: &[f64],
    truth_test: &TagMatrix,
    trials: usize,
    seed: u64,
) -> RandomBaseline {
    assert_eq!(train_freqs.len(), truth_test.n_tags());
    assert!(trials > 0);
    let mut ps = Vec::with_capacity(trials);
    let mut rs = Vec::with_capacity(trials);
    let mut f1s = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial as u64));
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for p in 0..truth_test.n_paintings() {
            for t in 0..truth_test.n_tags() {
                let guess = rng.gen_bool(train_freqs[t].clamp(0.0, 1.0));
                match (guess, truth_test.get(p, t)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        let (p, r, f1) = prf(tp, fp, fn_);
        ps.push(p);
        rs.push(r);
        f1s.push(f1);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let f1_mean = mean(&f1s);
    let f1_variance = f1s.iter().map(|f| (f - f1_mean).powi(2)).sum::<f64>() / trials as f64;
    RandomBaseline {
        precision: mean(&ps),
        recall: mean(&rs),
        f1: f1_mean,
        f1_variance,
        trials,
    }
}

/// How much better the classifier is than chance-matched guessing. Absent
/// (rather than infinite) when the baseline F1 is 0.
pub fn ratio_f1(f1_model: f64, f1_random: f64) -> Option<f64> {
    if f1_random > 0.0 {
        Some(f1_model / f1_random)
    } else {
        None
    }
}

/// Writes a binary matrix as CSV: header `id,<tag names...>`, one row per
/// painting, cells `0`/`1`.
pub fn write_tag_matrix(
    path: &Path,
    matrix: &TagMatrix,
    ids: &[String],
    names: &[String],
) -> Result<()> {
    assert_eq!(ids.len(), matrix.n_paintings());
    assert_eq!(names.len(), matrix.n_tags());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serialize(e.to_string()))?;
    let mut header = vec!["id".to_string()];
    header.extend_from_slice(names);
    w.write_record(&header)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    for (p, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend((0..matrix.n_tags()).map(|t| {
            if matrix.get(p, t) {
                "1".to_string()
            } else {
                "0".to_string()
            }
        }));
        w.write_record(&row)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a matrix written by [`write_tag_matrix`]; returns ids, names and
/// cells.
pub fn read_tag_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, TagMatrix)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Serialize(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| Error::Serialize(e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::Serialize(e.to_string()))?;
        ids.push(record[0].to_owned());
        rows.push(record.iter().skip(1).map(|c| c == "1").collect());
    }
    let mut matrix = TagMatrix::zeros(ids.len(), names.len());
    for (p, row) in rows.iter().enumerate() {
        if row.len() != names.len() {
            return Err(Error::Serialize(format!(
                "row {p} has {} cells, expected {}",
                row.len(),
                names.len()
            )));
        }
        for (t, &v) in row.iter().enumerate() {
            matrix.set(p, t, v);
        }
    }
    Ok((ids, names, matrix))
}

/// Writes probabilities with fixed 6-decimal formatting so regeneration is
/// byte-stable.
pub fn write_prediction_matrix(
    path: &Path,
    matrix: &PredictionMatrix,
    ids: &[String],
    names: &[String],
) -> Result<()> {
    assert_eq!(ids.len(), matrix.n_paintings());
    assert_eq!(names.len(), matrix.n_tags());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serialize(e.to_string()))?;
    let mut header = vec!["id".to_string()];
    header.extend_from_slice(names);
    w.write_record(&header)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    for (p, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend((0..matrix.n_tags()).map(|t| format!("{:.6}", matrix.get(p, t))));
        w.write_record(&row)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_prediction_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, PredictionMatrix)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Serialize(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| Error::Serialize(e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut cells: Vec<Vec<f32>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::Serialize(e.to_string()))?;
        ids.push(record[0].to_owned());
        cells.push(
            record
                .iter()
                .skip(1)
                .map(|c| c.parse::<f32>().map_err(|e| Error::Serialize(e.to_string())))
                .collect::<Result<_>>()?,
        );
    }
    let mut matrix = PredictionMatrix::zeros(ids.len(), names.len());
    for (p, row) in cells.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            matrix.set(p, t, v);
        }
    }
    Ok((ids, names, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TransactionDb;
    use crate::mining::{candidate_tags, fpgrowth, MiningConfig};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn db_and_vocab(
        transactions: &[(&[&str], usize)],
        minsup: f64,
    ) -> (TransactionDb, TagVocabulary) {
        let sets: Vec<BTreeSet<String>> = transactions
            .iter()
            .map(|(t, _)| t.iter().map(|s| s.to_string()).collect())
            .collect();
        let owners: Vec<usize> = transactions.iter().map(|&(_, o)| o).collect();
        let n = owners.iter().max().map_or(0, |m| m + 1);
        let db = TransactionDb::from_parts(sets, owners, n);
        let itemsets = fpgrowth(&db, &MiningConfig::new(minsup)).unwrap();
        let vocab = candidate_tags(&itemsets, &db).unwrap();
        (db, vocab)
    }

    #[test]
    fn assignment_is_sentence_scoped() {
        // painting 0: one sentence {a,b,c}; painting 1: {a} and {b} apart
        let (db, vocab) = db_and_vocab(&[(&["a", "b", "c"], 0), (&["a"], 1), (&["b"], 1)], 0.3);
        let ab = vocab.index_of("a,b").expect("tag a,b mined");
        let matrix = assign_tags(&db, &vocab);
        assert!(matrix.get(0, ab));
        assert!(
            !matrix.get(1, ab),
            "items in different sentences must not count"
        );

        // description scope flips painting 1
        let whole = assign_tags_scoped(&db, &vocab, AssignScope::Description);
        assert!(whole.get(1, ab));
    }

    #[test]
    fn assignment_downward_closure() {
        let (db, vocab) = db_and_vocab(
            &[
                (&["a", "b", "c"], 0),
                (&["a", "b"], 1),
                (&["a", "b", "c"], 2),
                (&["c"], 3),
            ],
            0.25,
        );
        let matrix = assign_tags(&db, &vocab);
        for p in 0..matrix.n_paintings() {
            for (t, tag) in vocab.tags().iter().enumerate() {
                if !matrix.get(p, t) {
                    continue;
                }
                for (u, sub) in vocab.tags().iter().enumerate() {
                    let subset = sub.items.iter().all(|i| tag.items.contains(i));
                    if subset {
                        assert!(matrix.get(p, u), "downward closure violated");
                    }
                }
            }
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = make_split(10, (0.7, 0.1, 0.2), 7).unwrap();
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.validation.len(), 1);
        assert_eq!(s.test.len(), 2);

        let again = make_split(10, (0.7, 0.1, 0.2), 7).unwrap();
        assert_eq!(s.train, again.train);
        assert_eq!(s.test, again.test);

        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_seeds_differ() {
        let perms: BTreeSet<Vec<usize>> = (0..30)
            .map(|seed| make_split(50, (0.7, 0.1, 0.2), seed).unwrap().train)
            .collect();
        assert_eq!(perms.len(), 30, "seed collisions in 30 shuffles");
    }

    #[test]
    fn split_empty_part_is_error() {
        assert!(make_split(3, (0.9, 0.05, 0.05), 0).is_err());
    }

    #[test]
    fn micro_perfect_prediction() {
        let mut truth = TagMatrix::zeros(3, 2);
        truth.set(0, 0, true);
        truth.set(2, 1, true);
        let (p, r, f1) = micro_metrics(&truth, &truth).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_matches_published_row() {
        // harmonic mean of P=.770, R=.705 rounds to .736
        let f1 = f1_score(0.770, 0.705);
        assert!((f1 - 0.736).abs() < 5e-4, "{f1}");
    }

    #[test]
    fn all_positive_prediction() {
        // predicting everything positive gives P = density, R = 1
        let mut truth = TagMatrix::zeros(4, 2);
        truth.set(0, 0, true);
        truth.set(1, 1, true);
        let mut pred = TagMatrix::zeros(4, 2);
        for p in 0..4 {
            for t in 0..2 {
                pred.set(p, t, true);
            }
        }
        let (p, r, _) = micro_metrics(&pred, &truth).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn micro_shape_mismatch() {
        let a = TagMatrix::zeros(2, 2);
        let b = TagMatrix::zeros(2, 3);
        assert!(micro_metrics(&a, &b).is_err());
    }

    #[test]
    fn baseline_degenerate_frequencies() {
        let mut truth = TagMatrix::zeros(5, 1);
        for p in 0..5 {
            truth.set(p, 0, true);
        }
        let sure = random_baseline(&[1.0], &truth, 5, 0);
        assert_eq!(sure.f1, 1.0);

        let never = random_baseline(&[0.0], &truth, 5, 0);
        assert_eq!(never.f1, 0.0);
    }

    #[test]
    fn baseline_half_frequency_converges() {
        // single tag, freq 0.5, truth density 0.5: E[P] = E[R] = 0.5
        let mut truth = TagMatrix::zeros(2000, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 0..2000 {
            truth.set(p, 0, rng.gen_bool(0.5));
        }
        let report = random_baseline(&[0.5], &truth, 30, 11);
        assert!((report.f1 - 0.5).abs() < 0.03, "{}", report.f1);
        assert!(report.f1_variance < 1e-3);
    }

    #[test]
    fn baseline_is_seed_deterministic() {
        let mut truth = TagMatrix::zeros(50, 3);
        truth.set(10, 1, true);
        let a = random_baseline(&[0.2, 0.5, 0.9], &truth, 30, 42);
        let b = random_baseline(&[0.2, 0.5, 0.9], &truth, 30, 42);
        assert_eq!(a.f1, b.f1);
        assert_eq!(a.precision, b.precision);
    }

    #[test]
    fn ratio_f1_published_rows() {
        assert_eq!(ratio_f1(0.7, 0.7), Some(1.0));
        let r = ratio_f1(0.736, 0.736 / 1.402).unwrap();
        assert!((r - 1.402).abs() < 1e-9);
        let r = ratio_f1(0.715, 0.715 / 1.409).unwrap();
        assert!((r - 1.409).abs() < 1e-9);
        assert_eq!(ratio_f1(0.5, 0.0), None);
    }

    #[test]
    fn matrix_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut m = TagMatrix::zeros(2, 3);
        m.set(0, 0, true);
        m.set(1, 2, true);
        let ids = vec!["p0".to_string(), "p1".to_string()];
        let names = vec!["a".to_string(), "a,b".to_string(), "c".to_string()];
        write_tag_matrix(&path, &m, &ids, &names).unwrap();
        let (ids2, names2, m2) = read_tag_matrix(&path).unwrap();
        assert_eq!(ids, ids2);
        assert_eq!(names, names2);
        assert_eq!(m, m2);
    }

    #[test]
    fn prediction_csv_roundtrip_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut m = PredictionMatrix::zeros(1, 2);
        m.set(0, 0, 0.123456789);
        m.set(0, 1, 1.0);
        let ids = vec!["x".to_string()];
        let names = vec!["t1".to_string(), "t2".to_string()];
        write_prediction_matrix(&path, &m, &ids, &names).unwrap();
        let (_, _, m2) = read_prediction_matrix(&path).unwrap();
        assert!((m2.get(0, 0) - 0.123457).abs() < 1e-6);
        assert_eq!(m2.get(0, 1), 1.0);
    }

    proptest! {
        // swapping prediction and truth swaps precision and recall
        #[test]
        fn micro_swap_symmetry(cells in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let n = cells.len();
            let mut pred = TagMatrix::zeros(n, 1);
            let mut truth = TagMatrix::zeros(n, 1);
            for (i, &(a, b)) in cells.iter().enumerate() {
                pred.set(i, 0, a);
                truth.set(i, 0, b);
            }
            let (p1, r1, _) = micro_metrics(&pred, &truth).unwrap();
            let (p2, r2, _) = micro_metrics(&truth, &pred).unwrap();
            prop_assert!((p1 - r2).abs() < 1e-12);
            prop_assert!((r1 - p2).abs() < 1e-12);
        }
    }
}
