//! FP-tree construction and recursive frequent-itemset growth.
//!
//! Items are interned to dense ids ranked by descending frequency with
//! lexicographic tie-breaking, so tree layout and mining output are fully
//! deterministic for a given database and threshold.

use std::collections::BTreeMap;

use rayon::prelude::*;

/// One prefix-tree node. `item == u32::MAX` marks the root.
#[derive(Debug, Clone)]
struct Node {
    item: u32,
    count: usize,
    parent: usize,
    children: Vec<(u32, usize)>,
}

#[derive(Debug)]
pub(crate) struct FpTree {
    nodes: Vec<Node>,
    /// item id -> node indices holding that item (the same-item chain).
    header: BTreeMap<u32, Vec<usize>>,
}

impl FpTree {
    fn new() -> Self {
        FpTree {
            nodes: vec![Node {
                item: u32::MAX,
                count: 0,
                parent: usize::MAX,
                children: Vec::new(),
            }],
            header: BTreeMap::new(),
        }
    }

    /// Inserts a transaction whose items are already sorted by rank.
    fn insert(&mut self, ranked_items: &[u32], count: usize) {
        let mut at = 0usize;
        for &item in ranked_items {
            let next = self.nodes[at]
                .children
                .iter()
                .find(|&&(i, _)| i == item)
                .map(|&(_, n)| n);
            at = match next {
                Some(n) => {
                    self.nodes[n].count += count;
                    n
                }
                None => {
                    let n = self.nodes.len();
                    self.nodes.push(Node {
                        item,
                        count,
                        parent: at,
                        children: Vec::new(),
                    });
                    self.nodes[at].children.push((item, n));
                    self.header.entry(item).or_default().push(n);
                    n
                }
            };
        }
    }

    /// Support of `item` as the sum over its header chain.
    fn chain_support(&self, item: u32) -> usize {
        self.header
            .get(&item)
            .map(|chain| chain.iter().map(|&n| self.nodes[n].count).sum())
            .unwrap_or(0)
    }

    /// Verifies that every header chain sums to the support recorded at
    /// build time and that no child outcounts its parent.
    pub(crate) fn audit(&self, expected: &BTreeMap<u32, usize>) -> bool {
        for (&item, &support) in expected {
            if self.chain_support(item) != support {
                return false;
            }
        }
        self.nodes.iter().skip(1).all(|n| {
            let parent = &self.nodes[n.parent];
            parent.item == u32::MAX || n.count <= parent.count
        })
    }

    /// Prefix paths (excluding `item` itself) for every chain node, with the
    /// chain node's count.
    fn prefix_paths(&self, item: u32) -> Vec<(Vec<u32>, usize)> {
        let mut paths = Vec::new();
        if let Some(chain) = self.header.get(&item) {
            for &n in chain {
                let count = self.nodes[n].count;
                let mut path = Vec::new();
                let mut at = self.nodes[n].parent;
                while at != 0 && at != usize::MAX {
                    path.push(self.nodes[at].item);
                    at = self.nodes[at].parent;
                }
                path.reverse();
                if !path.is_empty() {
                    paths.push((path, count));
                }
            }
        }
        paths
    }
}

/// Builds a tree from rank-sorted transactions.
fn build_tree(transactions: &[(Vec<u32>, usize)]) -> FpTree {
    let mut tree = FpTree::new();
    for (items, count) in transactions {
        tree.insert(items, *count);
    }
    tree
}

/// Mines one conditional tree rooted at `suffix`, appending `(items, support)`
/// pairs. Items inside each reported set are rank ids; the caller maps them
/// back to tokens.
fn mine_tree(
    tree: &FpTree,
    min_count: usize,
    max_size: usize,
    suffix: &[u32],
    out: &mut Vec<(Vec<u32>, usize)>,
) {
    // Least frequent first: header is rank-ordered, so iterate in reverse.
    for (&item, _) in tree.header.iter().rev() {
        let support = tree.chain_support(item);
        if support < min_count {
            continue;
        }
        let mut itemset = Vec::with_capacity(suffix.len() + 1);
        itemset.push(item);
        itemset.extend_from_slice(suffix);
        out.push((itemset.clone(), support));
        if itemset.len() >= max_size {
            continue;
        }
        let paths = tree.prefix_paths(item);
        if paths.is_empty() {
            continue;
        }
        // conditional counts, then rebuild the conditional tree over
        // surviving items (paths are already rank-sorted)
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for (path, count) in &paths {
            for &i in path {
                *counts.entry(i).or_default() += count;
            }
        }
        let filtered: Vec<(Vec<u32>, usize)> = paths
            .iter()
            .map(|(path, count)| {
                (
                    path.iter()
                        .copied()
                        .filter(|i| counts[i] >= min_count)
                        .collect::<Vec<_>>(),
                    *count,
                )
            })
            .filter(|(p, _)| !p.is_empty())
            .collect();
        if filtered.is_empty() {
            continue;
        }
        let conditional = build_tree(&filtered);
        mine_tree(&conditional, min_count, max_size, &itemset, out);
    }
}

/// Full FP-growth over interned transactions. Returns `(rank ids, support)`
/// pairs in an unspecified order; `item_order` maps rank id -> token.
///
/// Top-level header items are mined concurrently; each conditional subtree
/// is independent and results are concatenated in header order, so output is
/// identical to a single-threaded run.
pub(crate) fn growth(
    transactions: &[Vec<u32>],
    item_supports: &BTreeMap<u32, usize>,
    min_count: usize,
    max_size: usize,
) -> Vec<(Vec<u32>, usize)> {
    let ranked: Vec<(Vec<u32>, usize)> = transactions.iter().map(|t| (t.clone(), 1)).collect();
    let tree = build_tree(&ranked);
    debug_assert!(tree.audit(item_supports));

    let items: Vec<u32> = tree.header.keys().copied().collect();
    let chunks: Vec<Vec<(Vec<u32>, usize)>> = items
        .par_iter()
        .map(|&item| {
            let support = tree.chain_support(item);
            let mut out = Vec::new();
            if support >= min_count {
                out.push((vec![item], support));
                if max_size > 1 {
                    let paths = tree.prefix_paths(item);
                    if !paths.is_empty() {
                        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                        for (path, count) in &paths {
                            for &i in path {
                                *counts.entry(i).or_default() += count;
                            }
                        }
                        let filtered: Vec<(Vec<u32>, usize)> = paths
                            .iter()
                            .map(|(path, count)| {
                                (
                                    path.iter()
                                        .copied()
                                        .filter(|i| counts[i] >= min_count)
                                        .collect::<Vec<_>>(),
                                    *count,
                                )
                            })
                            .filter(|(p, _)| !p.is_empty())
                            .collect();
                        if !filtered.is_empty() {
                            let conditional = build_tree(&filtered);
                            mine_tree(&conditional, min_count, max_size, &[item], &mut out);
                        }
                    }
                }
            }
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}
