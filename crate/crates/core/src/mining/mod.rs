//! Frequent itemset mining over the transaction database: FP-growth,
//! support/lift statistics and the candidate tag vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TransactionDb;
use crate::error::{Error, Result};

mod fptree;

/// A frequent itemset with its exact transaction support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itemset {
    /// Sorted, deduplicated tokens.
    pub items: Vec<String>,
    /// Number of transactions containing every item.
    pub support: usize,
    /// `support / |transactions|`.
    pub rsup: f64,
}

/// Mining parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Relative support threshold in `(0, 1]`.
    pub minsup: f64,
    /// Optional cap on itemset size; low thresholds make the unrestricted
    /// search space explode combinatorially.
    pub max_itemset_size: Option<usize>,
}

impl MiningConfig {
    pub fn new(minsup: f64) -> Self {
        MiningConfig {
            minsup,
            max_itemset_size: None,
        }
    }
}

/// Smallest integer count whose relative support reaches `minsup`.
fn threshold_count(minsup: f64, n_transactions: usize) -> usize {
    let n = n_transactions as f64;
    let mut c = ((minsup * n).ceil() as usize).max(1);
    while c > 1 && (c - 1) as f64 / n >= minsup {
        c -= 1;
    }
    while (c as f64) / n < minsup {
        c += 1;
    }
    c
}

/// Mines all itemsets with relative support at least `cfg.minsup`, each with
/// its exact support, sorted by (size, lexicographic items).
pub fn fpgrowth(db: &TransactionDb, cfg: &MiningConfig) -> Result<Vec<Itemset>> {
    if db.is_empty() {
        return Err(Error::Mining("empty transaction database".into()));
    }
    if !(cfg.minsup > 0.0 && cfg.minsup <= 1.0) {
        return Err(Error::Mining(format!(
            "minsup {} outside (0, 1]",
            cfg.minsup
        )));
    }
    let n = db.len();
    let min_count = threshold_count(cfg.minsup, n);
    let max_size = cfg.max_itemset_size.unwrap_or(usize::MAX);
    if max_size == 0 {
        return Ok(Vec::new());
    }

    // Count tokens; deterministic iteration via BTreeMap.
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in db.transactions() {
        for item in t {
            *counts.entry(item.as_str()).or_default() += 1;
        }
    }
    // Rank frequent items by (count desc, token asc); rank id doubles as the
    // FP-tree path ordering.
    let mut frequent: Vec<(&str, usize)> = counts
        .iter()
        .filter(|&(_, &c)| c >= min_count)
        .map(|(&t, &c)| (t, c))
        .collect();
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let rank: BTreeMap<&str, u32> = frequent
        .iter()
        .enumerate()
        .map(|(i, &(t, _))| (t, i as u32))
        .collect();
    let tokens: Vec<&str> = frequent.iter().map(|&(t, _)| t).collect();
    let item_supports: BTreeMap<u32, usize> = frequent
        .iter()
        .enumerate()
        .map(|(i, &(_, c))| (i as u32, c))
        .collect();

    let transactions: Vec<Vec<u32>> = db
        .transactions()
        .iter()
        .map(|t| {
            let mut ids: Vec<u32> = t.iter().filter_map(|i| rank.get(i.as_str()).copied()).collect();
            ids.sort_unstable();
            ids
        })
        .collect();

    let raw = fptree::growth(&transactions, &item_supports, min_count, max_size);

    let mut itemsets: Vec<Itemset> = raw
        .into_iter()
        .map(|(ids, support)| {
            let mut items: Vec<String> = ids.iter().map(|&i| tokens[i as usize].to_owned()).collect();
            items.sort();
            Itemset {
                items,
                support,
                rsup: support as f64 / n as f64,
            }
        })
        .collect();
    itemsets.sort_by(|a, b| a.items.len().cmp(&b.items.len()).then(a.items.cmp(&b.items)));
    Ok(itemsets)
}

fn count_containing(db: &TransactionDb, items: &[String]) -> usize {
    db.transactions()
        .iter()
        .filter(|t| items.iter().all(|i| t.contains(i)))
        .count()
}

/// Lift of an itemset: observed relative support over the product of its
/// items' individual relative supports. Singletons score exactly 1.
pub fn lift(x: &Itemset, db: &TransactionDb) -> Result<f64> {
    if x.items.len() == 1 {
        return Ok(1.0);
    }
    let n = db.len() as f64;
    let mut expected = 1.0;
    for item in &x.items {
        let support = count_containing(db, std::slice::from_ref(item));
        if support == 0 {
            return Err(Error::Mining(format!(
                "item {item:?} has zero support in the database"
            )));
        }
        expected *= support as f64 / n;
    }
    Ok((x.support as f64 / n) / expected)
}

/// A mined itemset promoted to a candidate tag slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateTag {
    /// Display name: items joined by commas.
    pub name: String,
    pub items: Vec<String>,
    pub support: usize,
    pub rsup: f64,
    pub lift: f64,
}

/// The candidate tag vocabulary; ordering follows the (deterministic)
/// itemset ordering and fixes the classifier's output layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TagVocabulary {
    tags: Vec<CandidateTag>,
}

impl TagVocabulary {
    pub fn tags(&self) -> &[CandidateTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn get(&self, index: usize) -> &CandidateTag {
        &self.tags[index]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().map(|t| t.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tags.iter().position(|t| t.name == name)
    }

    pub fn from_tags(tags: Vec<CandidateTag>) -> Self {
        TagVocabulary { tags }
    }
}

/// Promotes every frequent itemset to one candidate tag, computing its lift
/// against the database. An empty itemset list yields an empty vocabulary.
pub fn candidate_tags(itemsets: &[Itemset], db: &TransactionDb) -> Result<TagVocabulary> {
    let tags = itemsets
        .iter()
        .map(|set| {
            Ok(CandidateTag {
                name: set.items.join(","),
                items: set.items.clone(),
                support: set.support,
                rsup: set.rsup,
                lift: lift(set, db)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TagVocabulary { tags })
}

/// Mean tags per painting with a normal-approximation 95% interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternStats {
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Mean and 95% CI (`mean ± 1.96·sd/√n`, sample sd) of per-painting tag
/// counts.
pub fn pattern_stats(tags_per_painting: &[usize]) -> PatternStats {
    let n = tags_per_painting.len();
    assert!(n > 0, "pattern_stats over an empty corpus");
    let mean = tags_per_painting.iter().sum::<usize>() as f64 / n as f64;
    let sd = if n > 1 {
        let ss: f64 = tags_per_painting
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / (n as f64).sqrt();
    PatternStats {
        mean,
        sd,
        ci_low: mean - half,
        ci_high: mean + half,
        n,
    }
}

/// Mean lift over all itemsets and over compound (size >= 2) itemsets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftStats {
    pub mean_lift_all: f64,
    /// Absent when no compound itemsets exist.
    pub mean_lift_compound: Option<f64>,
    /// Itemset counts keyed by size.
    pub counts_per_size: BTreeMap<usize, usize>,
}

/// Aggregates lift over a mined itemset collection.
pub fn lift_report(itemsets: &[Itemset], db: &TransactionDb) -> Result<LiftStats> {
    if itemsets.is_empty() {
        return Err(Error::Mining("lift report over an empty itemset list".into()));
    }
    let mut all = Vec::with_capacity(itemsets.len());
    let mut compound = Vec::new();
    let mut counts_per_size: BTreeMap<usize, usize> = BTreeMap::new();
    for set in itemsets {
        let l = lift(set, db)?;
        all.push(l);
        *counts_per_size.entry(set.items.len()).or_default() += 1;
        if set.items.len() >= 2 {
            compound.push(l);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(LiftStats {
        mean_lift_all: mean(&all),
        mean_lift_compound: if compound.is_empty() {
            None
        } else {
            Some(mean(&compound))
        },
        counts_per_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn db_from(transactions: &[&[&str]]) -> TransactionDb {
        let sets: Vec<BTreeSet<String>> = transactions
            .iter()
            .map(|t| t.iter().map(|s| s.to_string()).collect())
            .collect();
        let owners = vec![0; sets.len()];
        TransactionDb::from_parts(sets, owners, 1)
    }

    /// Exhaustive Apriori-style enumeration; the independent oracle for
    /// FP-growth on small instances.
    fn brute_force(db: &TransactionDb, minsup: f64) -> Vec<Itemset> {
        let n = db.len();
        let min_count = threshold_count(minsup, n);
        let universe: Vec<String> = db
            .transactions()
            .iter()
            .flat_map(|t| t.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        assert!(universe.len() <= 16, "oracle is exponential in item count");
        let mut out = Vec::new();
        for mask in 1u32..(1 << universe.len()) {
            let items: Vec<String> = universe
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect();
            let support = db
                .transactions()
                .iter()
                .filter(|t| items.iter().all(|i| t.contains(i)))
                .count();
            if support >= min_count {
                out.push(Itemset {
                    items,
                    support,
                    rsup: support as f64 / n as f64,
                });
            }
        }
        out.sort_by(|a, b| a.items.len().cmp(&b.items.len()).then(a.items.cmp(&b.items)));
        out
    }

    #[test]
    fn hand_example_matches() {
        let db = db_from(&[&["a", "b"], &["a", "b"], &["a", "c"], &["b"]]);
        let result = fpgrowth(&db, &MiningConfig::new(0.5)).unwrap();
        let got: Vec<(String, usize)> = result
            .iter()
            .map(|s| (s.items.join(","), s.support))
            .collect();
        assert_eq!(
            got,
            vec![
                ("a".to_string(), 3),
                ("b".to_string(), 3),
                ("a,b".to_string(), 2)
            ]
        );
        assert!((result[0].rsup - 0.75).abs() < 1e-12);
        assert!((result[2].rsup - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_above_max_frequency_is_empty() {
        let db = db_from(&[&["a", "b"], &["a"], &["b"]]);
        // max rsup is 2/3; anything above returns nothing
        let result = fpgrowth(&db, &MiningConfig::new(0.7)).unwrap();
        assert!(result.is_empty());
    }

    #[test]
    fn empty_db_is_error() {
        let db = TransactionDb::from_parts(vec![], vec![], 0);
        assert!(fpgrowth(&db, &MiningConfig::new(0.5)).is_err());
    }

    #[test]
    fn exact_boundary_support_included() {
        // 1 of 20 transactions = rsup 0.05 exactly; must be included at
        // minsup 0.05 despite 0.05 not being representable in binary.
        let mut transactions: Vec<&[&str]> = vec![&["x"]; 19];
        transactions.push(&["y"]);
        let db = db_from(&transactions);
        let result = fpgrowth(&db, &MiningConfig::new(0.05)).unwrap();
        assert!(result.iter().any(|s| s.items == ["y"]));
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        for seed in 0..200u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n_items = rng.gen_range(2..=8usize);
            let n_trans = rng.gen_range(1..=30usize);
            let items: Vec<String> = (0..n_items).map(|i| format!("i{i}")).collect();
            let sets: Vec<BTreeSet<String>> = (0..n_trans)
                .map(|_| {
                    let mut t = BTreeSet::new();
                    while t.is_empty() {
                        for item in &items {
                            if rng.gen_bool(0.4) {
                                t.insert(item.clone());
                            }
                        }
                    }
                    t
                })
                .collect();
            let owners = vec![0; sets.len()];
            let db = TransactionDb::from_parts(sets, owners, 1);
            let minsup = rng.gen_range(0.05..0.9);
            let fast = fpgrowth(&db, &MiningConfig::new(minsup)).unwrap();
            let slow = brute_force(&db, minsup);
            assert_eq!(fast, slow, "divergence at seed {seed} minsup {minsup}");
        }
    }

    #[test]
    fn anti_monotone_supports() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let items = ["a", "b", "c", "d", "e"];
        let sets: Vec<BTreeSet<String>> = (0..40)
            .map(|_| {
                let mut t = BTreeSet::new();
                while t.is_empty() {
                    for item in items {
                        if rng.gen_bool(0.5) {
                            t.insert(item.to_string());
                        }
                    }
                }
                t
            })
            .collect();
        let owners = vec![0; sets.len()];
        let db = TransactionDb::from_parts(sets, owners, 1);
        let result = fpgrowth(&db, &MiningConfig::new(0.1)).unwrap();
        let support_of = |items: &[String]| -> Option<usize> {
            result.iter().find(|s| s.items == items).map(|s| s.support)
        };
        for set in &result {
            if set.items.len() < 2 {
                continue;
            }
            // every proper subset is also reported with support >= superset's
            for skip in 0..set.items.len() {
                let sub: Vec<String> = set
                    .items
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, s)| s.clone())
                    .collect();
                let sub_support = support_of(&sub).expect("subset missing from output");
                assert!(sub_support >= set.support);
            }
        }
    }

    #[test]
    fn max_size_cap_limits_output() {
        let db = db_from(&[&["a", "b", "c"], &["a", "b", "c"]]);
        let mut cfg = MiningConfig::new(0.5);
        cfg.max_itemset_size = Some(2);
        let result = fpgrowth(&db, &cfg).unwrap();
        assert!(result.iter().all(|s| s.items.len() <= 2));
        assert!(result.iter().any(|s| s.items.len() == 2));
    }

    #[test]
    fn determinism_across_runs() {
        let db = db_from(&[&["b", "a"], &["c", "a"], &["a"], &["c", "b"]]);
        let a = fpgrowth(&db, &MiningConfig::new(0.25)).unwrap();
        let b = fpgrowth(&db, &MiningConfig::new(0.25)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lift_singleton_is_one() {
        let db = db_from(&[&["a", "b"], &["a"]]);
        let sets = fpgrowth(&db, &MiningConfig::new(0.4)).unwrap();
        for s in sets.iter().filter(|s| s.items.len() == 1) {
            assert_eq!(lift(s, &db).unwrap(), 1.0);
        }
    }

    #[test]
    fn lift_hand_computation() {
        // rsup(ab)=0.5, rsup(a)=rsup(b)=0.75 -> 0.5/0.5625
        let db = db_from(&[&["a", "b"], &["a", "b"], &["a"], &["b"]]);
        let set = Itemset {
            items: vec!["a".into(), "b".into()],
            support: 2,
            rsup: 0.5,
        };
        let l = lift(&set, &db).unwrap();
        assert!((l - 0.5 / 0.5625).abs() < 1e-9, "{l}");
        assert!((l - 0.8889).abs() < 1e-4);
    }

    #[test]
    fn lift_zero_support_item_is_error() {
        let db = db_from(&[&["a"]]);
        let set = Itemset {
            items: vec!["a".into(), "ghost".into()],
            support: 0,
            rsup: 0.0,
        };
        assert!(lift(&set, &db).is_err());
    }

    #[test]
    fn vocabulary_from_itemsets() {
        let db = db_from(&[&["a", "b"], &["a", "b"], &["a"], &["b"]]);
        let sets = fpgrowth(&db, &MiningConfig::new(0.5)).unwrap();
        let vocab = candidate_tags(&sets, &db).unwrap();
        let names: Vec<&str> = vocab.names().collect();
        assert_eq!(names, vec!["a", "b", "a,b"]);
        assert_eq!(vocab.len(), 3);

        let empty = candidate_tags(&[], &db).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn pattern_stats_hand_values() {
        let stats = pattern_stats(&[3, 3, 3]);
        assert_eq!(stats.mean, 3.0);
        assert_eq!(stats.sd, 0.0);
        assert_eq!(stats.ci_low, stats.ci_high);

        let stats = pattern_stats(&[1, 5]);
        assert_eq!(stats.mean, 3.0);
        assert!((stats.sd - 2.828).abs() < 1e-3, "{}", stats.sd);
    }

    #[test]
    fn lift_report_singletons_only() {
        let db = db_from(&[&["a"], &["b"]]);
        let sets = fpgrowth(&db, &MiningConfig::new(0.5)).unwrap();
        let stats = lift_report(&sets, &db).unwrap();
        assert_eq!(stats.mean_lift_all, 1.0);
        assert!(stats.mean_lift_compound.is_none());
    }

    #[test]
    fn lift_report_mixed() {
        let db = db_from(&[&["a", "b"], &["a", "b"], &["a"], &["b"]]);
        let sets = fpgrowth(&db, &MiningConfig::new(0.5)).unwrap();
        let stats = lift_report(&sets, &db).unwrap();
        let expected_all = (1.0 + 1.0 + 0.5 / 0.5625) / 3.0;
        assert!((stats.mean_lift_all - expected_all).abs() < 1e-9);
        let compound = stats.mean_lift_compound.unwrap();
        assert!((compound - 0.5 / 0.5625).abs() < 1e-9);
        assert_eq!(stats.counts_per_size[&1], 2);
        assert_eq!(stats.counts_per_size[&2], 1);
    }
}
