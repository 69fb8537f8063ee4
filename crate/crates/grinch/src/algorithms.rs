//! Tree construction algorithms.
//!
//! The incremental path attaches each arriving point next to its nearest
//! leaf, then repairs the tree: a rotate loop fixes local placement errors
//! by swapping the new leaf with its aunt while the trigger condition
//! holds, and a graft ladder walks the ancestors of the new leaf looking
//! for a distant subtree that mutually prefers a merge. Every accepted
//! graft detaches the initiating subtree, plants it beside its partner,
//! and runs a restructure pass from the donor site up to the lowest common
//! ancestor so mis-nested subtrees get swapped back together.
//!
//! Baselines share the same machinery: online insertion disables both
//! repair passes, rotate-only disables grafts. Best-first agglomeration
//! and its mini-batch variant live here as well.

use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use thiserror::Error;

use crate::eval::{dendrogram_purity_exact, dendrogram_purity_sampled, EvalError, GroundTruth};
use crate::linkage::{Linkage, QueryRef};
use crate::nn::{exact_knn, exact_knn_from_node, NnError, NswIndex};
use crate::tree::{ClusterTree, DataPoint, NodeHandle, PointId, TreeError};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("input must contain at least one point")]
    EmptyInput,
    #[error("mini-batch buffer must be at least 2")]
    BufferTooSmall,
}

/// Which comparison fires a rotation for a freshly placed leaf `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotateTrigger {
    /// Rotate while `f(x, sib(x)) < f(aunt(x), sib(x))`: the sibling
    /// prefers the aunt over the new arrival. Default; the correctness
    /// argument for separated data relies on this form.
    SiblingPrefersAunt,
    /// Rotate while `f(x, sib(x)) < f(x, aunt(x))`: the new arrival itself
    /// prefers the aunt. Kept for ablation.
    NodePrefersAunt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NnMode {
    Exact,
    Nsw,
}

/// Approximation switches and determinism knobs for a build.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Skip rotations whose grandparent sits above this height.
    pub rotate_cap: Option<u32>,
    /// Skip graft attempts involving nodes above this height.
    pub graft_cap: Option<u32>,
    /// Stop a restructure walk above this height.
    pub restruct_cap: Option<u32>,
    /// Stop the graft ladder after the first mutual rejection.
    pub single_elimination: bool,
    /// One k-NN search per insert; grafts draw candidates from that cache
    /// instead of searching again.
    pub knn_budget: Option<usize>,
    pub nn_mode: NnMode,
    pub rotate_trigger: RotateTrigger,
    pub enable_rotations: bool,
    pub enable_grafts: bool,
    pub enable_restructs: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rotate_cap: None,
            graft_cap: None,
            restruct_cap: None,
            single_elimination: false,
            knn_budget: None,
            nn_mode: NnMode::Exact,
            rotate_trigger: RotateTrigger::SiblingPrefersAunt,
            enable_rotations: true,
            enable_grafts: true,
            enable_restructs: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// The fast preset used by the command line: all caps at height 100
    /// and single elimination on.
    pub fn fast_defaults() -> Self {
        RunConfig {
            rotate_cap: Some(100),
            graft_cap: Some(100),
            restruct_cap: Some(100),
            single_elimination: true,
            ..RunConfig::default()
        }
    }
}

/// Per-insert purity probe recorded when tracing is enabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PuritySample {
    pub insert_index: usize,
    pub dp_before_grafts: f64,
    pub dp_after_grafts: f64,
}

/// Instrumentation counters for one build.
#[derive(Clone, Debug, Default)]
pub struct RunMetrics {
    pub rotations: u64,
    /// Graft invocations, including attempts with an empty candidate pool.
    pub grafts_attempted: u64,
    /// Grafts that performed a merge.
    pub grafts_accepted: u64,
    /// Restructure passes that performed at least one swap.
    pub restructs: u64,
    pub wall_time: f64,
    pub purity_trace: Option<Vec<PuritySample>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Grinch,
    Online,
    Rotate,
    Hac,
    MbHac { buffer: usize },
}

// ----------------------------------------------------------------------
// Rearrangement subroutines
// ----------------------------------------------------------------------

/// Rotate a freshly placed leaf upward while the trigger holds, the aunt
/// exists, and the grandparent sits at or below the rotate cap.
pub fn rotate_loop(
    tree: &mut ClusterTree,
    v: NodeHandle,
    f: &Linkage,
    cfg: &RunConfig,
    metrics: &mut RunMetrics,
) {
    loop {
        let Some(parent) = tree.parent(v) else { break };
        let Some(grandparent) = tree.parent(parent) else {
            break;
        };
        if let Some(cap) = cfg.rotate_cap {
            if tree.height(grandparent) > cap {
                break;
            }
        }
        let sib = tree.sibling(v).expect("node with a parent has a sibling");
        let aunt = tree.sibling(parent).expect("grandparent is internal");
        let triggered = match cfg.rotate_trigger {
            RotateTrigger::SiblingPrefersAunt => {
                f.score_nodes(tree, v, sib) < f.score_nodes(tree, aunt, sib)
            }
            RotateTrigger::NodePrefersAunt => {
                f.score_nodes(tree, v, sib) < f.score_nodes(tree, v, aunt)
            }
        };
        if !triggered {
            break;
        }
        tree.rotate(v).expect("aunt checked above");
        metrics.rotations += 1;
    }
}

/// Outcome of one graft attempt.
#[derive(Clone, Copy, Debug)]
pub struct GraftOutcome {
    /// Node to resume the ladder from: the merged parent after a merge,
    /// the starting node's original lca with its candidate if the start
    /// never climbed, otherwise the node the climb ended on.
    pub node: NodeHandle,
    pub merged: bool,
    /// A test failed with both sides preferring their current siblings.
    pub mutual_rejection: bool,
}

/// One graft attempt initiated from `v0`.
///
/// Finds the nearest non-descendant leaf `l`, then walks the pair toward
/// their lowest common ancestor: merge as soon as `f(v, l)` beats both
/// current-sibling affinities, climb `l` when it prefers its sibling,
/// climb `v` when it prefers its own. A merge detaches `v`, plants it
/// beside `l`, and restructures from `v`'s old sibling up to the new
/// lowest common ancestor.
pub fn graft(
    tree: &mut ClusterTree,
    v0: NodeHandle,
    f: &Linkage,
    cfg: &RunConfig,
    metrics: &mut RunMetrics,
    candidate_cache: Option<&[PointId]>,
    nsw: Option<&NswIndex>,
) -> Result<GraftOutcome, BuildError> {
    metrics.grafts_attempted += 1;
    let no_change = |node| GraftOutcome {
        node,
        merged: false,
        mutual_rejection: false,
    };
    let Some(mut l) = constrained_nn(tree, v0, f, candidate_cache, nsw) else {
        return Ok(no_change(v0));
    };
    let top = tree.lca(v0, l);
    let mut v = v0;
    let mut merged = false;
    let mut mutual_rejection = false;
    while v != top && l != top && tree.sibling(v) != Some(l) {
        if let Some(cap) = cfg.graft_cap {
            if tree.height(v) > cap || tree.height(l) > cap {
                break;
            }
        }
        let score_pair = f.score_nodes(tree, v, l);
        let sib_v = tree.sibling(v).expect("strictly below the lca");
        let sib_l = tree.sibling(l).expect("strictly below the lca");
        let score_v_sib = f.score_nodes(tree, v, sib_v);
        let score_l_sib = f.score_nodes(tree, l, sib_l);
        if score_pair > score_v_sib.max(score_l_sib) {
            let donor_remnant = sib_v;
            tree.detach(v)?;
            let merged_parent = tree.make_sib(l, v)?;
            metrics.grafts_accepted += 1;
            if cfg.enable_restructs {
                let repair_top = tree.lca(donor_remnant, merged_parent);
                restruct(tree, donor_remnant, repair_top, f, cfg, metrics)?;
            }
            v = merged_parent;
            merged = true;
            break;
        }
        if score_pair < score_v_sib && score_pair < score_l_sib {
            mutual_rejection = true;
        }
        let mut climbed = false;
        if score_pair < score_l_sib {
            l = tree.parent(l).expect("strictly below the lca");
            climbed = true;
            if l == top {
                // The candidate side reached the lca: the walk is over.
                break;
            }
        }
        // The second test re-reads the pair score if l just moved.
        let score_now = if climbed {
            f.score_nodes(tree, v, l)
        } else {
            score_pair
        };
        if score_now < score_v_sib {
            v = tree.parent(v).expect("strictly below the lca");
            climbed = true;
        }
        if !climbed {
            // Tied on every comparison; nothing can make progress.
            break;
        }
    }
    let node = if merged {
        v
    } else if v == v0 {
        top
    } else {
        v
    };
    Ok(GraftOutcome {
        node,
        merged,
        mutual_rejection,
    })
}

/// Nearest non-descendant leaf of `v` under the active search policy:
/// the per-insert candidate cache when present, else the approximate
/// index when present, else an exact scan.
fn constrained_nn(
    tree: &ClusterTree,
    v: NodeHandle,
    f: &Linkage,
    candidate_cache: Option<&[PointId]>,
    nsw: Option<&NswIndex>,
) -> Option<NodeHandle> {
    if let Some(ids) = candidate_cache {
        let own = tree.leaf_points(v);
        let exclude: HashSet<PointId> = own.iter().copied().collect();
        let query = match f {
            Linkage::Oracle(_) => QueryRef::Ids(&own),
            _ => QueryRef::Vector {
                aggregate: tree.aggregate(v),
            },
        };
        let mut best: Option<(f64, PointId)> = None;
        for &id in ids {
            if exclude.contains(&id) {
                continue;
            }
            let Some(leaf) = tree.leaf_of(id) else { continue };
            let score = f.score_query_node(tree, &query, leaf);
            let improves = match best {
                None => true,
                Some((bs, bid)) => score > bs || (score == bs && id < bid),
            };
            if improves {
                best = Some((score, id));
            }
        }
        return best.map(|(_, id)| tree.leaf_of(id).expect("cached leaf is live"));
    }
    if let Some(index) = nsw {
        let exclude: HashSet<PointId> = tree.leaf_points(v).into_iter().collect();
        return index
            .search_node(tree, v, 1, &exclude, f)
            .first()
            .map(|(id, _)| tree.leaf_of(*id).expect("index entry is a tree leaf"));
    }
    exact_knn_from_node(tree, v, 1, &HashSet::new(), f)
        .first()
        .map(|(id, _)| tree.leaf_of(*id).expect("scanned leaf is live"))
}

/// Restructure pass: walk `z` up to `r`, and at each level swap `z`'s
/// sibling with the best-scoring sibling of `z`'s ancestors (strictly
/// below `r`) whenever that strictly beats the current sibling.
pub fn restruct(
    tree: &mut ClusterTree,
    z0: NodeHandle,
    r: NodeHandle,
    f: &Linkage,
    cfg: &RunConfig,
    metrics: &mut RunMetrics,
) -> Result<(), BuildError> {
    if z0 != r {
        tree.ancestors(z0, r)?;
    }
    let mut z = z0;
    let mut swaps = 0u64;
    while z != r {
        if let Some(cap) = cfg.restruct_cap {
            if tree.height(z) > cap {
                break;
            }
        }
        let chain = tree.ancestors(z, r).expect("validated above");
        let mut best: Option<(f64, NodeHandle)> = None;
        for a in &chain {
            let candidate = tree.sibling(*a).expect("strictly below r");
            let score = f.score_nodes(tree, z, candidate);
            let improves = match best {
                None => true,
                Some((bs, bh)) => {
                    score > bs || (score == bs && candidate.index() < bh.index())
                }
            };
            if improves {
                best = Some((score, candidate));
            }
        }
        let (best_score, m) = best.expect("chain is nonempty");
        let sib_z = tree.sibling(z).expect("strictly below r");
        if f.score_nodes(tree, z, sib_z) < best_score {
            tree.swap(sib_z, m)?;
            swaps += 1;
        }
        z = tree.parent(z).expect("strictly below r");
    }
    if swaps > 0 {
        metrics.restructs += 1;
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Incremental builder
// ----------------------------------------------------------------------

struct TraceState {
    gt: GroundTruth,
    /// Use the exact purity below this leaf count, the sampled estimator
    /// at or above it.
    exact_below: usize,
    sample_pairs: usize,
}

/// Incremental tree construction: full repair, rotate-only, or plain
/// online insertion depending on the configuration flags.
pub struct IncrementalBuilder<'a> {
    tree: ClusterTree,
    linkage: &'a Linkage,
    cfg: RunConfig,
    metrics: RunMetrics,
    nsw: Option<NswIndex>,
    trace: Option<TraceState>,
}

impl<'a> IncrementalBuilder<'a> {
    pub fn new(dim: usize, linkage: &'a Linkage, cfg: RunConfig) -> Self {
        let nsw = match cfg.nn_mode {
            NnMode::Nsw => Some(NswIndex::with_defaults(cfg.seed)),
            NnMode::Exact => None,
        };
        IncrementalBuilder {
            tree: ClusterTree::new(dim),
            linkage,
            cfg,
            metrics: RunMetrics::default(),
            nsw,
            trace: None,
        }
    }

    /// Online baseline: attach at the nearest leaf, no rearrangement.
    pub fn online(dim: usize, linkage: &'a Linkage, cfg: RunConfig) -> Self {
        let cfg = RunConfig {
            enable_rotations: false,
            enable_grafts: false,
            enable_restructs: false,
            ..cfg
        };
        IncrementalBuilder::new(dim, linkage, cfg)
    }

    /// Rotate-only baseline: online insertion plus the rotate loop.
    pub fn rotate_only(dim: usize, linkage: &'a Linkage, cfg: RunConfig) -> Self {
        let cfg = RunConfig {
            enable_grafts: false,
            enable_restructs: false,
            ..cfg
        };
        IncrementalBuilder::new(dim, linkage, cfg)
    }

    /// Record per-insert purity before and after the graft phase.
    pub fn enable_purity_trace(&mut self, gt: GroundTruth, exact_below: usize, sample_pairs: usize) {
        self.trace = Some(TraceState {
            gt,
            exact_below,
            sample_pairs,
        });
        self.metrics.purity_trace = Some(Vec::new());
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn finish(self) -> (ClusterTree, RunMetrics) {
        (self.tree, self.metrics)
    }

    pub fn insert(&mut self, point: &DataPoint) -> Result<NodeHandle, BuildError> {
        self.insert_observed(point, |_| {})
    }

    /// Insert with a probe invoked after the rotate loop, before any
    /// grafts: used by purity tracing and the structural test sweeps.
    pub fn insert_observed(
        &mut self,
        point: &DataPoint,
        mut after_rotations: impl FnMut(&ClusterTree),
    ) -> Result<NodeHandle, BuildError> {
        if point.vector.len() != self.tree.dim() {
            return Err(TreeError::DimensionMismatch {
                expected: self.tree.dim(),
                got: point.vector.len(),
            }
            .into());
        }
        let (leaf, cache) = self.place(point)?;
        if self.tree.num_leaves() > 1 && self.cfg.enable_rotations {
            rotate_loop(&mut self.tree, leaf, self.linkage, &self.cfg, &mut self.metrics);
        }
        after_rotations(&self.tree);
        let dp_before = self.trace.as_ref().map(|_| self.current_dp());
        if self.tree.num_leaves() > 1 && self.cfg.enable_grafts {
            self.graft_ladder(leaf, cache.as_deref())?;
        }
        if let Some(dp_before) = dp_before {
            let dp_after = self.current_dp();
            let sample = PuritySample {
                insert_index: self.tree.num_leaves() - 1,
                dp_before_grafts: dp_before,
                dp_after_grafts: dp_after,
            };
            self.metrics
                .purity_trace
                .as_mut()
                .expect("trace enabled")
                .push(sample);
        }
        Ok(leaf)
    }

    /// Nearest-leaf placement. Returns the new leaf and, when a search
    /// budget is configured, the ranked candidate ids reused by grafts.
    fn place(&mut self, point: &DataPoint) -> Result<(NodeHandle, Option<Vec<PointId>>), BuildError> {
        if self.tree.is_empty() {
            let leaf = self.tree.add_leaf(point)?;
            if let Some(index) = &mut self.nsw {
                index.insert(point, self.linkage)?;
            }
            return Ok((leaf, None));
        }
        let k = self.cfg.knn_budget.unwrap_or(1);
        let found = match &self.nsw {
            Some(index) => index.search_point(point, k, &HashSet::new(), self.linkage),
            None => exact_knn(&self.tree, point, k, &HashSet::new(), self.linkage),
        };
        let anchor_id = found.first().expect("nonempty tree yields a neighbor").0;
        let anchor = self.tree.leaf_of(anchor_id).expect("neighbor is a leaf");
        let leaf = self.tree.add_leaf(point)?;
        self.tree.make_sib(anchor, leaf)?;
        if let Some(index) = &mut self.nsw {
            index.insert(point, self.linkage)?;
        }
        let cache = self
            .cfg
            .knn_budget
            .map(|_| found.into_iter().map(|(id, _)| id).collect());
        Ok((leaf, cache))
    }

    /// Attempt grafts walking up the ancestors of the new leaf. Every
    /// attempt returns an ancestor with strictly more leaves (its merge
    /// parent, the lca with its candidate, or how far it climbed), and the
    /// ladder resumes from that node so the chain of returned nodes keeps
    /// growing until it reaches the root. Attempts that found no candidate
    /// step to the parent instead.
    fn graft_ladder(
        &mut self,
        leaf: NodeHandle,
        cache: Option<&[PointId]>,
    ) -> Result<(), BuildError> {
        let mut next = self.tree.parent(leaf);
        let mut prev_leaves = 0usize;
        while let Some(v) = next {
            if let Some(cap) = self.cfg.graft_cap {
                if self.tree.height(v) > cap {
                    break;
                }
            }
            debug_assert!(
                self.tree.leaf_count(v) > prev_leaves,
                "graft ladder must strictly ascend"
            );
            prev_leaves = self.tree.leaf_count(v);
            let outcome = graft(
                &mut self.tree,
                v,
                self.linkage,
                &self.cfg,
                &mut self.metrics,
                cache,
                self.nsw.as_ref(),
            )?;
            if Some(outcome.node) == self.tree.root() {
                break;
            }
            if self.cfg.single_elimination && outcome.mutual_rejection {
                break;
            }
            next = if outcome.node == v {
                self.tree.parent(v)
            } else {
                Some(outcome.node)
            };
        }
        Ok(())
    }

    fn current_dp(&self) -> f64 {
        let trace = self.trace.as_ref().expect("tracing enabled");
        let result = if self.tree.num_leaves() < trace.exact_below {
            dendrogram_purity_exact(&self.tree, &trace.gt)
        } else {
            let seed = self.cfg.seed ^ (self.tree.num_leaves() as u64).wrapping_mul(0x9e3779b9);
            dendrogram_purity_sampled(&self.tree, &trace.gt, trace.sample_pairs, seed)
        };
        match result {
            Ok(dp) => dp,
            // No same-cluster pairs yet: the tree is vacuously pure.
            Err(EvalError::UndefinedMetric) => 1.0,
            Err(e) => panic!("purity trace failed: {e}"),
        }
    }
}

// ----------------------------------------------------------------------
// Best-first agglomeration
// ----------------------------------------------------------------------

/// Candidate pair in the merge queue, ordered by score descending with
/// deterministic ties on the smallest representative-id pair.
#[derive(Debug)]
struct MergeCandidate {
    score: f64,
    rep_lo: PointId,
    rep_hi: PointId,
    a: u32,
    b: u32,
}

impl PartialEq for MergeCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for MergeCandidate {}

impl Ord for MergeCandidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.rep_lo.cmp(&self.rep_lo))
            .then_with(|| other.rep_hi.cmp(&self.rep_hi))
    }
}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Forest of merge roots with a stale-entry priority queue: pairs are
/// scored when an item enters, popped entries referring to merged items
/// are discarded.
struct Agglomerator<'a> {
    tree: ClusterTree,
    linkage: &'a Linkage,
    handles: Vec<NodeHandle>,
    reps: Vec<PointId>,
    alive: Vec<bool>,
    queue: BinaryHeap<MergeCandidate>,
    num_alive: usize,
}

impl<'a> Agglomerator<'a> {
    fn new(dim: usize, linkage: &'a Linkage) -> Self {
        Agglomerator {
            tree: ClusterTree::new(dim),
            linkage,
            handles: Vec::new(),
            reps: Vec::new(),
            alive: Vec::new(),
            queue: BinaryHeap::new(),
            num_alive: 0,
        }
    }

    fn add_point(&mut self, point: &DataPoint) -> Result<(), BuildError> {
        let leaf = self.tree.add_leaf(point)?;
        self.add_item(leaf, point.id);
        Ok(())
    }

    fn add_item(&mut self, handle: NodeHandle, rep: PointId) {
        let id = self.handles.len() as u32;
        for other in 0..self.handles.len() as u32 {
            if !self.alive[other as usize] {
                continue;
            }
            let score = self
                .linkage
                .score_nodes(&self.tree, self.handles[other as usize], handle);
            let (rep_lo, rep_hi) = {
                let r = self.reps[other as usize];
                if r <= rep {
                    (r, rep)
                } else {
                    (rep, r)
                }
            };
            self.queue.push(MergeCandidate {
                score,
                rep_lo,
                rep_hi,
                a: other,
                b: id,
            });
        }
        self.handles.push(handle);
        self.reps.push(rep);
        self.alive.push(true);
        self.num_alive += 1;
    }

    /// Merge the best-scoring live pair; false when fewer than two remain.
    fn merge_best(&mut self) -> Result<bool, BuildError> {
        if self.num_alive < 2 {
            return Ok(false);
        }
        let (a, b) = loop {
            let cand = self.queue.pop().expect("live pairs imply queued pairs");
            if self.alive[cand.a as usize] && self.alive[cand.b as usize] {
                break (cand.a as usize, cand.b as usize);
            }
        };
        // keep the smaller representative on the `existing` side
        let (keep, moved) = if self.reps[a] <= self.reps[b] { (a, b) } else { (b, a) };
        let parent = self
            .tree
            .make_sib(self.handles[keep], self.handles[moved])?;
        self.alive[a] = false;
        self.alive[b] = false;
        self.num_alive -= 2;
        let rep = self.reps[keep].min(self.reps[moved]);
        self.add_item(parent, rep);
        Ok(true)
    }

    fn into_tree(self) -> ClusterTree {
        self.tree
    }
}

/// Best-first bottom-up agglomeration: repeatedly merge the highest
/// scoring pair of remaining roots until one remains.
pub fn hac_build(points: &[DataPoint], f: &Linkage) -> Result<(ClusterTree, RunMetrics), BuildError> {
    if points.is_empty() {
        return Err(BuildError::EmptyInput);
    }
    let mut agglomerator = Agglomerator::new(points[0].vector.len(), f);
    for p in points {
        agglomerator.add_point(p)?;
    }
    while agglomerator.merge_best()? {}
    Ok((agglomerator.into_tree(), RunMetrics::default()))
}

/// Mini-batch agglomeration with a bounded buffer: every arrival past the
/// buffer size forces one merge step; the remaining buffer is agglomerated
/// to a single tree once the stream ends.
pub fn mb_hac(
    points: &[DataPoint],
    f: &Linkage,
    buffer: usize,
) -> Result<(ClusterTree, RunMetrics), BuildError> {
    if buffer < 2 {
        return Err(BuildError::BufferTooSmall);
    }
    if points.is_empty() {
        return Err(BuildError::EmptyInput);
    }
    let mut agglomerator = Agglomerator::new(points[0].vector.len(), f);
    for p in points {
        agglomerator.add_point(p)?;
        if agglomerator.num_alive > buffer {
            agglomerator.merge_best()?;
        }
    }
    while agglomerator.merge_best()? {}
    Ok((agglomerator.into_tree(), RunMetrics::default()))
}

// ----------------------------------------------------------------------
// Uniform driver
// ----------------------------------------------------------------------

/// Build a tree with the chosen algorithm. Vector linkages get unit-
/// normalized copies of the input; raw vectors stay with the caller.
/// Deterministic given the configuration seed and the input order.
pub fn build(
    points: &[DataPoint],
    algorithm: Algorithm,
    linkage: &Linkage,
    cfg: &RunConfig,
) -> Result<(ClusterTree, RunMetrics), BuildError> {
    if points.is_empty() {
        return Err(BuildError::EmptyInput);
    }
    let started = Instant::now();
    let prepared: Vec<DataPoint> = if linkage.normalizes_inputs() {
        let mut copy = points.to_vec();
        crate::datagen::normalize_unit(&mut copy);
        copy
    } else {
        points.to_vec()
    };
    let dim = prepared[0].vector.len();
    let (tree, mut metrics) = match algorithm {
        Algorithm::Grinch | Algorithm::Online | Algorithm::Rotate => {
            let mut builder = match algorithm {
                Algorithm::Grinch => IncrementalBuilder::new(dim, linkage, cfg.clone()),
                Algorithm::Online => IncrementalBuilder::online(dim, linkage, cfg.clone()),
                Algorithm::Rotate => IncrementalBuilder::rotate_only(dim, linkage, cfg.clone()),
                _ => unreachable!(),
            };
            for p in &prepared {
                builder.insert(p)?;
            }
            builder.finish()
        }
        Algorithm::Hac => hac_build(&prepared, linkage)?,
        Algorithm::MbHac { buffer } => mb_hac(&prepared, linkage, buffer)?,
    };
    metrics.wall_time = started.elapsed().as_secs_f64();
    Ok((tree, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_planted_graph, oracle_ground_truth, oracle_points, ComponentShape, PlantedGraphSpec};
    use crate::eval::{completeness_holds, strong_connectivity_holds};
    use crate::linkage::GraphOracle;

    fn oracle_linkage(g: &GraphOracle) -> Linkage {
        Linkage::Oracle(g.clone())
    }

    fn grinch_tree(g: &GraphOracle, order: &[PointId], cfg: RunConfig) -> (ClusterTree, RunMetrics) {
        let points = oracle_points(g);
        let f = oracle_linkage(g);
        let mut builder = IncrementalBuilder::new(1, &f, cfg);
        for &id in order {
            builder.insert(&points[id as usize]).unwrap();
        }
        builder.finish()
    }

    #[test]
    fn first_insert_becomes_root() {
        let f = Linkage::Cosine;
        let mut b = IncrementalBuilder::new(2, &f, RunConfig::default());
        let leaf = b.insert(&DataPoint::new(0, vec![1.0, 0.0])).unwrap();
        assert_eq!(b.tree().root(), Some(leaf));
        assert!(matches!(
            b.insert(&DataPoint::new(0, vec![0.0, 1.0])),
            Err(BuildError::Tree(TreeError::DuplicatePoint(0)))
        ));
        assert!(matches!(
            b.insert(&DataPoint::new(1, vec![0.0])),
            Err(BuildError::Tree(TreeError::DimensionMismatch { .. }))
        ));
    }

    /// Two clique members then the odd point: ties land the stray arrival
    /// between them and exactly one rotation repairs the split.
    #[test]
    fn rotation_repairs_clique_misplacement() {
        // clique {0,1}, singleton {2}; arrival 0, 1, 2: the stray point 2
        // ties against both leaves and lands beside leaf 0, splitting the
        // clique until the rotate loop swaps it with its aunt
        let g = GraphOracle::from_edges(3, [(0, 1)]);
        let f = oracle_linkage(&g);
        let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
        let points = oracle_points(&g);
        builder.insert(&points[0]).unwrap();
        builder.insert(&points[1]).unwrap();
        builder.insert(&points[2]).unwrap();
        let (tree, metrics) = builder.finish();
        let leaf0 = tree.leaf_of(0).unwrap();
        let leaf1 = tree.leaf_of(1).unwrap();
        assert_eq!(tree.sibling(leaf0), Some(leaf1));
        assert_eq!(metrics.rotations, 1);
        assert!(strong_connectivity_holds(&tree, &g));
        assert!(completeness_holds(&tree, &g));
    }

    #[test]
    fn favorable_arrival_needs_no_rotation() {
        // same graph, arrival 0, 2, 1: nearest-neighbor placement already
        // puts 1 beside 0, so the rotate loop never fires
        let g = GraphOracle::from_edges(3, [(0, 1)]);
        let f = oracle_linkage(&g);
        let points = oracle_points(&g);
        let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
        builder.insert(&points[0]).unwrap();
        builder.insert(&points[2]).unwrap();
        builder.insert(&points[1]).unwrap();
        let (tree, metrics) = builder.finish();
        let leaf0 = tree.leaf_of(0).unwrap();
        let leaf1 = tree.leaf_of(1).unwrap();
        assert_eq!(tree.sibling(leaf1), Some(leaf0));
        assert_eq!(metrics.rotations, 0);
        assert!(strong_connectivity_holds(&tree, &g));
        assert!(completeness_holds(&tree, &g));
    }

    #[test]
    fn chain_insertion_keeps_neighbor_adjacent() {
        // chain 0-1-2 arriving 0, 2, 1: the middle vertex ends up beside a
        // chain neighbor and the tree stays strongly connected
        let g = GraphOracle::from_edges(3, [(0, 1), (1, 2)]);
        let (tree, _) = grinch_tree(&g, &[0, 2, 1], RunConfig::default());
        let leaf1 = tree.leaf_of(1).unwrap();
        let sib = tree.sibling(leaf1).unwrap();
        let sib_id = tree.point_id(sib);
        assert!(sib_id == Some(0) || sib_id == Some(2));
        assert!(strong_connectivity_holds(&tree, &g));
        assert!(completeness_holds(&tree, &g));
    }

    /// A bridging point joins two previously split pieces of a component
    /// that live in disjoint subtrees; only a graft can merge them.
    #[test]
    fn graft_merges_split_component() {
        // chain component {0..4} (the pieces {0,1} and {3,4} carry their
        // own edges, 2 is the bridge) plus a decoy component {5,6}
        let g = GraphOracle::from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6)]);
        let f = oracle_linkage(&g);
        let points = oracle_points(&g);
        // both pieces anchor before the bridge arrives
        let order = [0u64, 1, 5, 6, 3, 4, 2];
        let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
        for id in order {
            builder.insert(&points[id as usize]).unwrap();
        }
        let (tree, metrics) = builder.finish();
        assert!(
            completeness_holds(&tree, &g),
            "bridge arrival left the component split"
        );
        assert!(strong_connectivity_holds(&tree, &g));
        assert!(
            metrics.grafts_accepted >= 1,
            "uniting disjoint subtrees requires a graft"
        );
    }

    #[test]
    fn graft_on_complete_component_never_merges() {
        let spec = PlantedGraphSpec {
            components: vec![(5, ComponentShape::Chain), (4, ComponentShape::Clique)],
            seed: 3,
        };
        let g = gen_planted_graph(&spec);
        let f = oracle_linkage(&g);
        let order: Vec<PointId> = (0..g.num_vertices() as PointId).collect();
        let (mut tree, _) = grinch_tree(&g, &order, RunConfig::default());
        // find the node whose leaf set is exactly the first component
        let comp = &g.component_sets()[0];
        let target = tree
            .nodes()
            .find(|&h| {
                let mut ids = tree.leaf_points(h);
                ids.sort_unstable();
                ids == *comp
            })
            .expect("completeness puts the component at a node");
        let before = tree.to_json_string();
        let mut metrics = RunMetrics::default();
        let out = graft(
            &mut tree,
            target,
            &f,
            &RunConfig::default(),
            &mut metrics,
            None,
            None,
        )
        .unwrap();
        assert!(!out.merged);
        assert_eq!(metrics.grafts_accepted, 0);
        assert_eq!(tree.to_json_string(), before);
    }

    #[test]
    fn graft_with_no_candidates_returns_start() {
        // single component: from the root there is nothing to graft
        let g = GraphOracle::from_edges(3, [(0, 1), (1, 2)]);
        let (mut tree, _) = grinch_tree(&g, &[0, 1, 2], RunConfig::default());
        let root = tree.root().unwrap();
        let f = oracle_linkage(&g);
        let mut metrics = RunMetrics::default();
        let out = graft(&mut tree, root, &f, &RunConfig::default(), &mut metrics, None, None).unwrap();
        assert_eq!(out.node, root);
        assert!(!out.merged);
    }

    #[test]
    fn restruct_noop_when_already_best() {
        // clique pair: every arrangement scores equally, so no swap fires
        let g = GraphOracle::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let (mut tree, _) = grinch_tree(&g, &[0, 1, 2, 3], RunConfig::default());
        let f = oracle_linkage(&g);
        let leaf = tree.leaf_of(0).unwrap();
        let root = tree.root().unwrap();
        let before = tree.to_json_string();
        let mut metrics = RunMetrics::default();
        restruct(&mut tree, leaf, root, &f, &RunConfig::default(), &mut metrics).unwrap();
        assert_eq!(tree.to_json_string(), before);
        assert_eq!(metrics.restructs, 0);
        // precondition violation is reported
        let err = restruct(&mut tree, root, leaf, &f, &RunConfig::default(), &mut metrics);
        assert!(err.is_err());
    }

    /// Chain graphs force real graft/restruct work; after every insert the
    /// tree must stay strongly connected and complete.
    #[test]
    fn chain_runs_stay_connected_and_complete() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        for seed in 0..6u64 {
            let spec = PlantedGraphSpec {
                components: vec![(9, ComponentShape::Chain), (7, ComponentShape::Chain)],
                seed,
            };
            let g = gen_planted_graph(&spec);
            let f = oracle_linkage(&g);
            let points = oracle_points(&g);
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed * 31 + 1));
            let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
            for &i in &order {
                let g_ref = &g;
                builder
                    .insert_observed(&points[i], |tree| {
                        assert!(
                            strong_connectivity_holds(tree, g_ref),
                            "seed {seed}: rotate phase broke strong connectivity"
                        );
                    })
                    .unwrap();
                assert!(strong_connectivity_holds(builder.tree(), &g));
                assert!(completeness_holds(builder.tree(), &g));
            }
            let gt = oracle_ground_truth(&g);
            let dp = dendrogram_purity_exact(builder.tree(), &gt).unwrap();
            assert_eq!(dp, 1.0, "seed {seed}");
        }
    }

    /// Mixed component shapes, several orders: the separated setting must
    /// always end at purity one.
    #[test]
    fn separated_runs_reach_perfect_purity() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        for seed in 0..5u64 {
            let spec = PlantedGraphSpec {
                components: vec![
                    (6, ComponentShape::Clique),
                    (8, ComponentShape::Chain),
                    (5, ComponentShape::RandomTree),
                    (5, ComponentShape::RandomEdges(0.4)),
                ],
                seed,
            };
            let g = gen_planted_graph(&spec);
            let gt = oracle_ground_truth(&g);
            let points = oracle_points(&g);
            let f = oracle_linkage(&g);
            for order_seed in 0..3u64 {
                let mut order: Vec<usize> = (0..points.len()).collect();
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(
                    seed * 100 + order_seed,
                ));
                let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
                for &i in &order {
                    builder.insert(&points[i]).unwrap();
                }
                let (tree, _) = builder.finish();
                let dp = dendrogram_purity_exact(&tree, &gt).unwrap();
                assert_eq!(dp, 1.0, "seed {seed} order {order_seed}");
                assert!(completeness_holds(&tree, &g));
            }
        }
    }

    #[test]
    fn online_and_rotate_disable_counters() {
        let g = gen_planted_graph(&PlantedGraphSpec {
            components: vec![(8, ComponentShape::Chain), (8, ComponentShape::Chain)],
            seed: 11,
        });
        let f = oracle_linkage(&g);
        let points = oracle_points(&g);
        let run = |mut b: IncrementalBuilder| {
            for p in &points {
                b.insert(p).unwrap();
            }
            b.finish().1
        };
        let online = run(IncrementalBuilder::online(1, &f, RunConfig::default()));
        assert_eq!(online.rotations, 0);
        assert_eq!(online.grafts_attempted, 0);
        let rotate = run(IncrementalBuilder::rotate_only(1, &f, RunConfig::default()));
        assert_eq!(rotate.grafts_attempted, 0);
    }

    #[test]
    fn rotate_cap_limits_height() {
        // chain of orthogonal/parallel vectors: the trigger holds at every
        // level, so the rotate loop climbs until the cap stops it
        let f = Linkage::Cosine;
        let dim = 2;
        let mut tree = ClusterTree::new(dim);
        let base = tree
            .add_leaf(&DataPoint::new(0, vec![1.0, 0.0]))
            .unwrap();
        let mut spine = base;
        for id in 1..=6u64 {
            let leaf = tree
                .add_leaf(&DataPoint::new(id, vec![1.0, 0.0]))
                .unwrap();
            spine = tree.make_sib(spine, leaf).unwrap();
        }
        let odd = tree.add_leaf(&DataPoint::new(99, vec![0.0, 1.0])).unwrap();
        tree.make_sib(base, odd).unwrap();
        let mut uncapped_tree = tree;
        let mut capped_tree = ClusterTree::new(dim);
        {
            // rebuild the same shape for the capped run
            let base = capped_tree
                .add_leaf(&DataPoint::new(0, vec![1.0, 0.0]))
                .unwrap();
            let mut spine = base;
            for id in 1..=6u64 {
                let leaf = capped_tree
                    .add_leaf(&DataPoint::new(id, vec![1.0, 0.0]))
                    .unwrap();
                spine = capped_tree.make_sib(spine, leaf).unwrap();
            }
            let odd2 = capped_tree
                .add_leaf(&DataPoint::new(99, vec![0.0, 1.0]))
                .unwrap();
            capped_tree.make_sib(base, odd2).unwrap();
        }
        let mut m1 = RunMetrics::default();
        rotate_loop(&mut uncapped_tree, odd, &f, &RunConfig::default(), &mut m1);
        assert!(m1.rotations >= 3);
        let odd2 = capped_tree.leaf_of(99).unwrap();
        let capped_cfg = RunConfig {
            rotate_cap: Some(3),
            ..RunConfig::default()
        };
        let mut m2 = RunMetrics::default();
        rotate_loop(&mut capped_tree, odd2, &f, &capped_cfg, &mut m2);
        assert!(m2.rotations < m1.rotations);
        // an effectively infinite cap matches no cap bit for bit
        let huge_cfg = RunConfig {
            rotate_cap: Some(u32::MAX),
            ..RunConfig::default()
        };
        let mut t3 = ClusterTree::new(dim);
        let base = t3.add_leaf(&DataPoint::new(0, vec![1.0, 0.0])).unwrap();
        let mut spine = base;
        for id in 1..=6u64 {
            let leaf = t3.add_leaf(&DataPoint::new(id, vec![1.0, 0.0])).unwrap();
            spine = t3.make_sib(spine, leaf).unwrap();
        }
        let odd3 = t3.add_leaf(&DataPoint::new(99, vec![0.0, 1.0])).unwrap();
        t3.make_sib(base, odd3).unwrap();
        let mut m3 = RunMetrics::default();
        rotate_loop(&mut t3, odd3, &f, &huge_cfg, &mut m3);
        assert_eq!(m3.rotations, m1.rotations);
        assert_eq!(t3.to_json_string(), uncapped_tree.to_json_string());
    }

    #[test]
    fn single_elimination_only_prunes_attempts() {
        for seed in 0..4u64 {
            let spec = PlantedGraphSpec {
                components: vec![(10, ComponentShape::Chain), (9, ComponentShape::Chain)],
                seed,
            };
            let g = gen_planted_graph(&spec);
            let order: Vec<PointId> = (0..g.num_vertices() as PointId).collect();
            let (_, full) = grinch_tree(&g, &order, RunConfig::default());
            let (_, pruned) = grinch_tree(
                &g,
                &order,
                RunConfig {
                    single_elimination: true,
                    ..RunConfig::default()
                },
            );
            assert!(
                pruned.grafts_attempted <= full.grafts_attempted,
                "seed {seed}: {} > {}",
                pruned.grafts_attempted,
                full.grafts_attempted
            );
        }
    }

    #[test]
    fn hac_fact_components_are_tree_consistent() {
        for seed in 0..6u64 {
            let spec = PlantedGraphSpec {
                components: vec![
                    (4, ComponentShape::Clique),
                    (6, ComponentShape::Chain),
                    (5, ComponentShape::RandomTree),
                ],
                seed,
            };
            let g = gen_planted_graph(&spec);
            let f = oracle_linkage(&g);
            let points = oracle_points(&g);
            let (tree, _) = hac_build(&points, &f).unwrap();
            assert!(completeness_holds(&tree, &g), "seed {seed}");
        }
    }

    #[test]
    fn hac_two_points_single_merge() {
        let f = Linkage::Cosine;
        let points = vec![
            DataPoint::new(0, vec![1.0, 0.0]),
            DataPoint::new(1, vec![0.5, 0.5]),
        ];
        let (tree, _) = hac_build(&points, &f).unwrap();
        assert_eq!(tree.num_leaves(), 2);
        assert_eq!(tree.leaf_count(tree.root().unwrap()), 2);
        assert!(matches!(
            hac_build(&[], &f),
            Err(BuildError::EmptyInput)
        ));
    }

    /// Merge sequence equality against a naive quadratic-rescan oracle.
    #[test]
    fn hac_matches_naive_rescan() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..=10);
            let d = 4;
            let points: Vec<DataPoint> = (0..n)
                .map(|i| {
                    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    DataPoint::new(i as PointId, v.iter().map(|x| x / norm).collect())
                })
                .collect();
            let f = Linkage::Average;

            // drive the agglomerator directly to observe the merge order
            let mut agg = Agglomerator::new(d, &f);
            for p in &points {
                agg.add_point(p).unwrap();
            }
            let mut fast_merges: Vec<(PointId, PointId)> = Vec::new();
            loop {
                let before: Vec<(PointId, bool)> = agg
                    .reps
                    .iter()
                    .copied()
                    .zip(agg.alive.iter().copied())
                    .collect();
                if !agg.merge_best().unwrap() {
                    break;
                }
                let merged: Vec<PointId> = before
                    .iter()
                    .enumerate()
                    .filter(|(i, (_, was_alive))| *was_alive && !agg.alive[*i])
                    .map(|(_, (rep, _))| *rep)
                    .collect();
                assert_eq!(merged.len(), 2);
                fast_merges.push((merged[0].min(merged[1]), merged[0].max(merged[1])));
            }

            // naive O(n^3): rescan all pairs each step
            #[derive(Clone)]
            struct Group {
                rep: PointId,
                sum: Vec<f64>,
                count: usize,
            }
            let mut groups: Vec<Group> = points
                .iter()
                .map(|p| Group {
                    rep: p.id,
                    sum: p.vector.clone(),
                    count: 1,
                })
                .collect();
            let mut naive_merges: Vec<(PointId, PointId)> = Vec::new();
            while groups.len() > 1 {
                let mut best: Option<(f64, usize, usize)> = None;
                for i in 0..groups.len() {
                    for j in (i + 1)..groups.len() {
                        let dot: f64 = groups[i]
                            .sum
                            .iter()
                            .zip(&groups[j].sum)
                            .map(|(x, y)| x * y)
                            .sum();
                        let score = dot / (groups[i].count * groups[j].count) as f64;
                        let key = (
                            groups[i].rep.min(groups[j].rep),
                            groups[i].rep.max(groups[j].rep),
                        );
                        let improves = match &best {
                            None => true,
                            Some((bs, bi, bj)) => {
                                let bkey = (
                                    groups[*bi].rep.min(groups[*bj].rep),
                                    groups[*bi].rep.max(groups[*bj].rep),
                                );
                                score > *bs || (score == *bs && key < bkey)
                            }
                        };
                        if improves {
                            best = Some((score, i, j));
                        }
                    }
                }
                let (_, i, j) = best.unwrap();
                let (gi, gj) = (groups[i].clone(), groups[j].clone());
                naive_merges.push((gi.rep.min(gj.rep), gi.rep.max(gj.rep)));
                let merged = Group {
                    rep: gi.rep.min(gj.rep),
                    sum: gi.sum.iter().zip(&gj.sum).map(|(x, y)| x + y).collect(),
                    count: gi.count + gj.count,
                };
                groups.remove(j);
                groups.remove(i);
                groups.push(merged);
            }
            assert_eq!(fast_merges, naive_merges, "seed {seed}");
        }
    }

    #[test]
    fn mb_hac_with_large_buffer_equals_hac() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let points: Vec<DataPoint> = (0..20)
            .map(|i| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
                DataPoint::new(i as PointId, v)
            })
            .collect();
        let f = Linkage::Cosine;
        let (a, _) = hac_build(&points, &f).unwrap();
        let (b, _) = mb_hac(&points, &f, points.len()).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        let (c, _) = mb_hac(&points, &f, points.len() + 10).unwrap();
        assert_eq!(a.to_json_string(), c.to_json_string());
        assert!(matches!(
            mb_hac(&points, &f, 1),
            Err(BuildError::BufferTooSmall)
        ));
    }

    #[test]
    fn mb_hac_buffer_two_greedy_chain() {
        // three colinear-ish points: buffer 2 merges the first two on the
        // spot, then chains the third onto the pair
        let points = vec![
            DataPoint::new(0, vec![1.0, 0.0]),
            DataPoint::new(1, vec![0.9, 0.1]),
            DataPoint::new(2, vec![0.0, 1.0]),
        ];
        let f = Linkage::Cosine;
        let (tree, _) = mb_hac(&points, &f, 2).unwrap();
        let root = tree.root().unwrap();
        let (a, b) = tree.children(root).unwrap();
        let (pair, single) = if tree.is_leaf(a) { (b, a) } else { (a, b) };
        assert!(tree.is_leaf(single));
        assert_eq!(tree.point_id(single), Some(2));
        let ids: std::collections::BTreeSet<_> =
            tree.leaf_points(pair).into_iter().collect();
        assert_eq!(ids, std::collections::BTreeSet::from([0, 1]));
    }

    #[test]
    fn build_driver_is_deterministic() {
        let g = gen_planted_graph(&PlantedGraphSpec {
            components: vec![(7, ComponentShape::Chain), (6, ComponentShape::Clique)],
            seed: 2,
        });
        let points = oracle_points(&g);
        let f = oracle_linkage(&g);
        let cfg = RunConfig::default();
        let (t1, m1) = build(&points, Algorithm::Grinch, &f, &cfg).unwrap();
        let (t2, m2) = build(&points, Algorithm::Grinch, &f, &cfg).unwrap();
        assert_eq!(t1.to_json_string(), t2.to_json_string());
        assert_eq!(m1.rotations, m2.rotations);
        assert_eq!(m1.grafts_accepted, m2.grafts_accepted);
        assert!(matches!(
            build(&[], Algorithm::Grinch, &f, &cfg),
            Err(BuildError::EmptyInput)
        ));
    }

    #[test]
    fn purity_trace_records_deltas() {
        let g = gen_planted_graph(&PlantedGraphSpec {
            components: vec![(6, ComponentShape::Chain), (6, ComponentShape::Chain)],
            seed: 8,
        });
        let f = oracle_linkage(&g);
        let points = oracle_points(&g);
        let gt = oracle_ground_truth(&g);
        let mut builder = IncrementalBuilder::new(1, &f, RunConfig::default());
        builder.enable_purity_trace(gt, 10_000, 1000);
        for p in &points {
            builder.insert(p).unwrap();
        }
        let (_, metrics) = builder.finish();
        let trace = metrics.purity_trace.unwrap();
        assert_eq!(trace.len(), points.len());
        for s in &trace {
            assert!(s.dp_before_grafts <= 1.0 && s.dp_after_grafts <= 1.0);
        }
        // graft deltas are the only purity movement between the two probes
        let cumulative: f64 = trace
            .iter()
            .map(|s| s.dp_after_grafts - s.dp_before_grafts)
            .sum();
        assert!(cumulative.is_finite());
    }
}
