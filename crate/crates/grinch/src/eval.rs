//! Evaluation metrics: dendrogram purity (exact and sampled), flat
//! clustering extraction, and pairwise precision/recall/F1.
//!
//! Dendrogram purity averages, over all same-cluster point pairs, the label
//! purity of the pair's least-common-ancestor leaf set. The exact
//! implementation runs one bottom-up pass over per-node label histograms
//! instead of enumerating pairs: at each internal node, pairs whose lca is
//! that node are exactly the cross pairs between its two children.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linkage::Linkage;
use crate::tree::{ClusterTree, DataPoint, NodeHandle, PointId};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("point {0} has no ground-truth label")]
    MissingLabel(PointId),
    #[error("metric undefined: no same-cluster pairs")]
    UndefinedMetric,
    #[error("tree is empty")]
    EmptyTree,
}

/// Ground-truth cluster assignment: point id to cluster id.
#[derive(Clone, Debug, Default)]
pub struct GroundTruth {
    map: HashMap<PointId, u64>,
}

impl GroundTruth {
    pub fn new(map: HashMap<PointId, u64>) -> Self {
        GroundTruth { map }
    }

    /// Build from labeled points; `None` if any point is unlabeled.
    pub fn from_points(points: &[DataPoint]) -> Option<Self> {
        let mut map = HashMap::with_capacity(points.len());
        for p in points {
            map.insert(p.id, p.label?);
        }
        Some(GroundTruth { map })
    }

    pub fn cluster_of(&self, id: PointId) -> Option<u64> {
        self.map.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, u64)> + '_ {
        self.map.iter().map(|(k, v)| (*k, *v))
    }
}

/// A predicted flat clustering: point id to predicted cluster id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatClustering {
    pub assignment: HashMap<PointId, u64>,
}

/// Exact dendrogram purity in [0, 1].
///
/// Errors if a leaf is unlabeled or if every cluster is a singleton (the
/// pair set is empty and the metric is undefined).
pub fn dendrogram_purity_exact(tree: &ClusterTree, gt: &GroundTruth) -> Result<f64, EvalError> {
    let root = tree.root().ok_or(EvalError::EmptyTree)?;
    // Bottom-up label histograms with smaller-into-larger merging. BTreeMap
    // keeps the per-node accumulation order fixed across runs.
    let mut hists: HashMap<u32, BTreeMap<u64, u64>> = HashMap::new();
    let mut total = 0.0f64;
    let mut stack = vec![(root, false)];
    while let Some((h, expanded)) = stack.pop() {
        match tree.children(h) {
            None => {
                let id = tree.point_id(h).expect("leaf point");
                let label = gt.cluster_of(id).ok_or(EvalError::MissingLabel(id))?;
                let mut m = BTreeMap::new();
                m.insert(label, 1);
                hists.insert(h.index(), m);
            }
            Some((a, b)) => {
                if !expanded {
                    stack.push((h, true));
                    stack.push((a, false));
                    stack.push((b, false));
                    continue;
                }
                let ha = hists.remove(&a.index()).expect("child histogram");
                let hb = hists.remove(&b.index()).expect("child histogram");
                let (mut large, small) = if ha.len() >= hb.len() { (ha, hb) } else { (hb, ha) };
                let node_leaves = tree.leaf_count(h) as f64;
                for (label, count_small) in small {
                    let entry = large.entry(label).or_insert(0);
                    let count_large = *entry;
                    if count_large > 0 {
                        let cross = (count_small * count_large) as f64;
                        let purity = (count_small + count_large) as f64 / node_leaves;
                        total += cross * purity;
                    }
                    *entry = count_large + count_small;
                }
                hists.insert(h.index(), large);
            }
        }
    }
    let root_hist = &hists[&root.index()];
    let num_pairs: u64 = root_hist.values().map(|&c| c * (c - 1) / 2).sum();
    if num_pairs == 0 {
        return Err(EvalError::UndefinedMetric);
    }
    Ok(total / num_pairs as f64)
}

/// Monte Carlo estimate of dendrogram purity over `num_pairs` uniform
/// same-cluster pairs. Unbiased; deterministic given `seed`.
pub fn dendrogram_purity_sampled(
    tree: &ClusterTree,
    gt: &GroundTruth,
    num_pairs: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    assert!(num_pairs >= 1);
    tree.root().ok_or(EvalError::EmptyTree)?;
    // Group tree leaves by label, deterministically ordered.
    let mut by_label: BTreeMap<u64, Vec<NodeHandle>> = BTreeMap::new();
    for leaf in tree.leaves() {
        let id = tree.point_id(leaf).expect("leaf point");
        let label = gt.cluster_of(id).ok_or(EvalError::MissingLabel(id))?;
        by_label.entry(label).or_default().push(leaf);
    }
    let clusters: Vec<(u64, Vec<NodeHandle>)> = by_label
        .into_iter()
        .filter(|(_, leaves)| leaves.len() >= 2)
        .collect();
    if clusters.is_empty() {
        return Err(EvalError::UndefinedMetric);
    }
    // Cumulative pair-count weights for cluster selection.
    let mut cumulative: Vec<u64> = Vec::with_capacity(clusters.len());
    let mut acc = 0u64;
    for (_, leaves) in &clusters {
        let n = leaves.len() as u64;
        acc += n * (n - 1) / 2;
        cumulative.push(acc);
    }
    let total_pairs = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..num_pairs {
        let ticket = rng.gen_range(0..total_pairs);
        let ci = cumulative.partition_point(|&c| c <= ticket);
        let (label, leaves) = &clusters[ci];
        let i = rng.gen_range(0..leaves.len());
        let j = loop {
            let j = rng.gen_range(0..leaves.len());
            if j != i {
                break j;
            }
        };
        let lca = tree.lca(leaves[i], leaves[j]);
        sum += label_fraction(tree, gt, lca, *label);
    }
    Ok(sum / num_pairs as f64)
}

/// Fraction of the leaves under `node` whose ground-truth label is `label`.
fn label_fraction(tree: &ClusterTree, gt: &GroundTruth, node: NodeHandle, label: u64) -> f64 {
    let mut matched = 0usize;
    let mut stack = vec![node];
    while let Some(h) = stack.pop() {
        match tree.children(h) {
            Some((a, b)) => {
                stack.push(a);
                stack.push(b);
            }
            None => {
                let id = tree.point_id(h).expect("leaf point");
                if gt.cluster_of(id) == Some(label) {
                    matched += 1;
                }
            }
        }
    }
    matched as f64 / tree.leaf_count(node) as f64
}

/// Top-down threshold cut: descending from the root, a node becomes a flat
/// cluster when its children score at least `tau` under `f` (or it is a
/// leaf). The result is always a tree-consistent partition.
pub fn flatten_by_threshold(tree: &ClusterTree, f: &Linkage, tau: f64) -> FlatClustering {
    let mut assignment = HashMap::new();
    let root = match tree.root() {
        Some(r) => r,
        None => return FlatClustering { assignment },
    };
    let mut next_cluster = 0u64;
    let mut stack = vec![root];
    while let Some(h) = stack.pop() {
        let emit = match tree.children(h) {
            None => true,
            Some((a, b)) => f.score_nodes(tree, a, b) >= tau,
        };
        if emit {
            let cluster = next_cluster;
            next_cluster += 1;
            for id in tree.leaf_points(h) {
                assignment.insert(id, cluster);
            }
        } else {
            let (a, b) = tree.children(h).expect("non-leaf");
            stack.push(b);
            stack.push(a);
        }
    }
    FlatClustering { assignment }
}

/// True iff every node of the tree whose leaf set induces a connected
/// subgraph of `g` has all of its descendants connected as well.
pub fn strong_connectivity_holds(tree: &ClusterTree, g: &crate::linkage::GraphOracle) -> bool {
    let root = match tree.root() {
        Some(r) => r,
        None => return true,
    };
    // post-order: strongly(v) = connected(v) && strongly(children)
    let mut strongly: HashMap<u32, bool> = HashMap::new();
    let mut stack = vec![(root, false)];
    while let Some((h, expanded)) = stack.pop() {
        match tree.children(h) {
            None => {
                strongly.insert(h.index(), true);
            }
            Some((a, b)) => {
                if !expanded {
                    stack.push((h, true));
                    stack.push((a, false));
                    stack.push((b, false));
                    continue;
                }
                let leaves = tree.leaf_points(h);
                let connected = g.connected(&leaves);
                let children_strong = strongly[&a.index()] && strongly[&b.index()];
                if connected && !children_strong {
                    return false;
                }
                strongly.insert(h.index(), connected && children_strong);
            }
        }
    }
    true
}

/// Handles of all strongly connected nodes: nodes whose every descendant
/// (including themselves) induces a connected subgraph of `g`.
pub fn strongly_connected_nodes(
    tree: &ClusterTree,
    g: &crate::linkage::GraphOracle,
) -> Vec<NodeHandle> {
    let root = match tree.root() {
        Some(r) => r,
        None => return Vec::new(),
    };
    let mut strongly: HashMap<u32, bool> = HashMap::new();
    let mut out = Vec::new();
    let mut stack = vec![(root, false)];
    while let Some((h, expanded)) = stack.pop() {
        match tree.children(h) {
            None => {
                strongly.insert(h.index(), true);
                out.push(h);
            }
            Some((a, b)) => {
                if !expanded {
                    stack.push((h, true));
                    stack.push((a, false));
                    stack.push((b, false));
                    continue;
                }
                let ok = strongly[&a.index()]
                    && strongly[&b.index()]
                    && g.connected(&tree.leaf_points(h));
                strongly.insert(h.index(), ok);
                if ok {
                    out.push(h);
                }
            }
        }
    }
    out
}

/// True iff every connected component of `g`, restricted to the vertices
/// currently in the tree, appears as the exact leaf set of some node.
pub fn completeness_holds(tree: &ClusterTree, g: &crate::linkage::GraphOracle) -> bool {
    let root = match tree.root() {
        Some(r) => r,
        None => return true,
    };
    let present: Vec<PointId> = tree.leaf_points(root);
    let present_set: std::collections::HashSet<PointId> = present.iter().copied().collect();
    // components of the induced subgraph on the present vertices
    let mut seen: std::collections::HashSet<PointId> = std::collections::HashSet::new();
    for &start in &present {
        if seen.contains(&start) {
            continue;
        }
        let mut component = vec![start];
        seen.insert(start);
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            for &w in g.neighbors(v as u32) {
                let next = w as PointId;
                if present_set.contains(&next) && seen.insert(next) {
                    component.push(next);
                    queue.push(next);
                }
            }
        }
        component.sort_unstable();
        // the first ancestor of a member leaf with enough leaves must be
        // exactly this component
        let mut node = tree.leaf_of(component[0]).expect("member is a leaf");
        while tree.leaf_count(node) < component.len() {
            match tree.parent(node) {
                Some(p) => node = p,
                None => return false,
            }
        }
        let mut node_set = tree.leaf_points(node);
        node_set.sort_unstable();
        if node_set != component {
            return false;
        }
    }
    true
}

/// Pairwise precision, recall, and F1 over unordered point pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a score to 0.
    pub degenerate: bool,
}

/// Compare a predicted flat clustering against the ground truth. A pair in
/// the same cluster on both sides is a true positive. Both inputs must
/// cover the same points.
pub fn pairwise_prf(pred: &FlatClustering, gt: &GroundTruth) -> PrfScores {
    assert_eq!(
        pred.assignment.len(),
        gt.len(),
        "prediction and ground truth must cover the same points"
    );
    // Contingency counts via sorted (gt, pred) label pairs.
    let mut cells: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    let mut gt_sizes: BTreeMap<u64, u64> = BTreeMap::new();
    let mut pred_sizes: BTreeMap<u64, u64> = BTreeMap::new();
    for (&id, &p) in pred.assignment.iter() {
        let g = gt
            .cluster_of(id)
            .expect("prediction and ground truth must cover the same points");
        *cells.entry((g, p)).or_insert(0) += 1;
        *gt_sizes.entry(g).or_insert(0) += 1;
        *pred_sizes.entry(p).or_insert(0) += 1;
    }
    let pairs = |n: u64| n * (n - 1) / 2;
    let tp: u64 = cells.values().map(|&c| pairs(c)).sum();
    let pred_pairs: u64 = pred_sizes.values().map(|&c| pairs(c)).sum();
    let gt_pairs: u64 = gt_sizes.values().map(|&c| pairs(c)).sum();
    let mut degenerate = false;
    let precision = if pred_pairs == 0 {
        degenerate = true;
        0.0
    } else {
        tp as f64 / pred_pairs as f64
    };
    let recall = if gt_pairs == 0 {
        degenerate = true;
        0.0
    } else {
        tp as f64 / gt_pairs as f64
    };
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrfScores {
        precision,
        recall,
        f1,
        degenerate,
    }
}
