//! Nearest-neighbor search over tree leaves.
//!
//! [`exact_knn`] scans every live leaf and ranks by the active linkage.
//! [`NswIndex`] is an online-built navigable-small-world graph searched by
//! greedy hill-climbing with a best-k frontier; it trades exactness for a
//! large speedup at high recall.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linkage::{Linkage, QueryRef};
use crate::tree::{Aggregate, ClusterTree, DataPoint, NodeHandle, PointId};

pub const DEFAULT_K_BUILD: usize = 25;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("point id {0} already present in the index")]
    DuplicatePoint(PointId),
}

/// A scored candidate; ordered by score descending, then id ascending, so
/// every ranking is a total deterministic order.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Scored {
    score: f64,
    id: PointId,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn better(a: &Scored, b: &Scored) -> bool {
    a.cmp(b) == Ordering::Greater
}

/// Keep the best `k` of a stream, then rank descending.
struct TopK {
    k: usize,
    heap: BinaryHeap<std::cmp::Reverse<Scored>>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, s: Scored) {
        if self.heap.len() < self.k {
            self.heap.push(std::cmp::Reverse(s));
        } else if let Some(worst) = self.heap.peek() {
            if better(&s, &worst.0) {
                self.heap.pop();
                self.heap.push(std::cmp::Reverse(s));
            }
        }
    }

    fn worst(&self) -> Option<Scored> {
        self.heap.peek().map(|r| r.0)
    }

    fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    fn into_ranked(self) -> Vec<(PointId, f64)> {
        let mut items: Vec<Scored> = self.heap.into_iter().map(|r| r.0).collect();
        items.sort_by(|a, b| b.cmp(a));
        items.into_iter().map(|s| (s.id, s.score)).collect()
    }
}

/// Top-k leaves of the tree by `f(query, leaf)`, excluding ids in
/// `exclude`, ranked descending with ties broken by smallest point id.
/// Returns fewer than `k` entries when the candidate pool is small.
pub fn exact_knn(
    tree: &ClusterTree,
    query: &DataPoint,
    k: usize,
    exclude: &HashSet<PointId>,
    f: &Linkage,
) -> Vec<(PointId, f64)> {
    let query_agg = Aggregate::singleton(query);
    let query_ids = [query.id];
    let query_ref = match f {
        Linkage::Oracle(_) => QueryRef::Ids(&query_ids),
        _ => QueryRef::Vector {
            aggregate: &query_agg,
        },
    };
    scan_leaves(tree, &query_ref, k, exclude, f)
}

/// Constrained search used by grafting: top-k leaves by `f(lvs(v), {leaf})`
/// with the leaves of `v` excluded automatically.
pub fn exact_knn_from_node(
    tree: &ClusterTree,
    v: NodeHandle,
    k: usize,
    extra_exclude: &HashSet<PointId>,
    f: &Linkage,
) -> Vec<(PointId, f64)> {
    let own: HashSet<PointId> = tree.leaf_points(v).into_iter().collect();
    let mut exclude = own;
    exclude.extend(extra_exclude.iter().copied());
    let own_ids: Vec<PointId>;
    let query_ref = match f {
        Linkage::Oracle(_) => {
            own_ids = tree.leaf_points(v);
            QueryRef::Ids(&own_ids)
        }
        _ => QueryRef::Vector {
            aggregate: tree.aggregate(v),
        },
    };
    scan_leaves(tree, &query_ref, k, &exclude, f)
}

fn scan_leaves(
    tree: &ClusterTree,
    query: &QueryRef<'_>,
    k: usize,
    exclude: &HashSet<PointId>,
    f: &Linkage,
) -> Vec<(PointId, f64)> {
    let mut top = TopK::new(k);
    for leaf in tree.leaves() {
        let id = tree.point_id(leaf).expect("leaf has a point");
        if exclude.contains(&id) {
            continue;
        }
        let score = f.score_query_node(tree, query, leaf);
        top.offer(Scored { score, id });
    }
    top.into_ranked()
}

/// Online navigable-small-world graph over inserted points.
///
/// Each insertion links the new point to its `k_build` approximate nearest
/// neighbors, found by searching the graph built so far. Searches restart
/// from `restarts` random entry points and share one visited set and one
/// best-k pool across the walks. Per-search randomness is derived from the
/// index seed and the query salt, so identical runs reproduce the same
/// structure and results without mutating the index.
pub struct NswIndex {
    k_build: usize,
    restarts: usize,
    seed: u64,
    entries: Vec<(PointId, Aggregate)>,
    neighbors: Vec<Vec<u32>>,
    by_id: HashMap<PointId, u32>,
}

impl NswIndex {
    pub fn new(k_build: usize, restarts: usize, seed: u64) -> Self {
        assert!(k_build >= 1 && restarts >= 1);
        NswIndex {
            k_build,
            restarts,
            seed,
            entries: Vec::new(),
            neighbors: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        NswIndex::new(DEFAULT_K_BUILD, DEFAULT_RESTARTS, seed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn neighbors_of(&self, id: PointId) -> Option<Vec<PointId>> {
        let &idx = self.by_id.get(&id)?;
        Some(
            self.neighbors[idx as usize]
                .iter()
                .map(|&n| self.entries[n as usize].0)
                .collect(),
        )
    }

    /// Insert a point, linking it to up to `k_build` approximate nearest
    /// neighbors under `f`. The first entry has no edges.
    pub fn insert(&mut self, point: &DataPoint, f: &Linkage) -> Result<(), NnError> {
        if self.by_id.contains_key(&point.id) {
            return Err(NnError::DuplicatePoint(point.id));
        }
        let found = if self.entries.is_empty() {
            Vec::new()
        } else {
            self.search_point(point, self.k_build, &HashSet::new(), f)
        };
        let idx = self.entries.len() as u32;
        self.entries.push((point.id, Aggregate::singleton(point)));
        self.neighbors.push(Vec::new());
        self.by_id.insert(point.id, idx);
        for (id, _) in found {
            let other = self.by_id[&id];
            self.neighbors[idx as usize].push(other);
            self.neighbors[other as usize].push(idx);
        }
        Ok(())
    }

    /// Approximate top-k for a free-standing point.
    pub fn search_point(
        &self,
        query: &DataPoint,
        k: usize,
        exclude: &HashSet<PointId>,
        f: &Linkage,
    ) -> Vec<(PointId, f64)> {
        let query_agg = Aggregate::singleton(query);
        let query_ids = [query.id];
        let query_ref = match f {
            Linkage::Oracle(_) => QueryRef::Ids(&query_ids),
            _ => QueryRef::Vector {
                aggregate: &query_agg,
            },
        };
        self.search(&query_ref, query.id, k, exclude, f)
    }

    /// Approximate top-k for a tree node acting as the query; scores are
    /// `f(lvs(v), {entry})` and the node's own leaves should be excluded by
    /// the caller.
    pub fn search_node(
        &self,
        tree: &ClusterTree,
        v: NodeHandle,
        k: usize,
        exclude: &HashSet<PointId>,
        f: &Linkage,
    ) -> Vec<(PointId, f64)> {
        let own_ids: Vec<PointId>;
        let query_ref = match f {
            Linkage::Oracle(_) => {
                own_ids = tree.leaf_points(v);
                QueryRef::Ids(&own_ids)
            }
            _ => QueryRef::Vector {
                aggregate: tree.aggregate(v),
            },
        };
        let salt = v.index() as u64 ^ 0x9e37_79b9_7f4a_7c15;
        self.search(&query_ref, salt, k, exclude, f)
    }

    fn search(
        &self,
        query: &QueryRef<'_>,
        salt: u64,
        k: usize,
        exclude: &HashSet<PointId>,
        f: &Linkage,
    ) -> Vec<(PointId, f64)> {
        if self.entries.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut rng = self.derive_rng(salt);
        let mut visited: HashSet<u32> = HashSet::new();
        let mut pool = TopK::new(k);
        // candidates ordered best-first
        let mut candidates: BinaryHeap<(Scored, u32)> = BinaryHeap::new();
        for _ in 0..self.restarts {
            let start = rng.gen_range(0..self.entries.len()) as u32;
            if !visited.insert(start) {
                continue;
            }
            let s = self.score_entry(query, start, f);
            candidates.push((s, start));
            while let Some((cand, idx)) = candidates.pop() {
                if pool.is_full() {
                    if let Some(worst) = pool.worst() {
                        if better(&worst, &cand) {
                            break;
                        }
                    }
                }
                let id = self.entries[idx as usize].0;
                if !exclude.contains(&id) {
                    pool.offer(cand);
                }
                for &nb in &self.neighbors[idx as usize] {
                    if visited.insert(nb) {
                        let s = self.score_entry(query, nb, f);
                        let admit = match pool.worst() {
                            Some(worst) if pool.is_full() => better(&s, &worst),
                            _ => true,
                        };
                        if admit {
                            candidates.push((s, nb));
                        }
                    }
                }
            }
        }
        pool.into_ranked()
    }

    fn score_entry(&self, query: &QueryRef<'_>, idx: u32, f: &Linkage) -> Scored {
        let (id, agg) = &self.entries[idx as usize];
        Scored {
            score: f.score_query_aggregate(query, *id, agg),
            id: *id,
        }
    }

    fn derive_rng(&self, salt: u64) -> ChaCha8Rng {
        let mixed = self
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(salt)
            .wrapping_add((self.entries.len() as u64) << 32);
        ChaCha8Rng::seed_from_u64(mixed)
    }
}
