//! Linkage functions: similarity scores over pairs of point sets.
//!
//! Two vector linkages are computed from node aggregates in O(d):
//! [`centroid_cosine`] and [`average_linkage`]. The [`GraphOracle`] realizes
//! a linkage that provably separates a latent graph: any set pair whose
//! union induces a connected subgraph outscores any disconnected pair, with
//! a deterministic tie-break below the separation margin.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::tree::{Aggregate, ClusterTree, DataPoint, NodeHandle, PointId};

/// Cosine similarity of the two aggregated sum vectors, in [-1, 1].
/// A zero-norm sum scores 0 so the function stays total.
pub fn centroid_cosine(a: &Aggregate, b: &Aggregate) -> f64 {
    let na = a.vector_sum.norm();
    let nb = b.vector_sum.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.vector_sum.dot(&b.vector_sum) / (na * nb)
}

/// Mean pairwise dot product between the two leaf sets, computed from sums
/// and counts: `dot(sum_a, sum_b) / (count_a * count_b)`. With unit-length
/// points this equals the mean pairwise cosine.
pub fn average_linkage(a: &Aggregate, b: &Aggregate) -> f64 {
    a.vector_sum.dot(&b.vector_sum) / (a.leaf_count as f64 * b.leaf_count as f64)
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(PointId),
    #[error("leaf sets overlap at vertex {0}")]
    Overlap(PointId),
    #[error("empty leaf set")]
    EmptySet,
    #[error("malformed edge list: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Latent graph whose connected components are the ground-truth clusters.
///
/// `linkage` scores a set pair as `connected(A ∪ B) + tie_break(A, B)` with
/// the tie-break in [0, 0.5), so every connected pair strictly outscores
/// every disconnected pair.
#[derive(Clone, Debug)]
pub struct GraphOracle {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    component: Vec<u32>,
    num_components: usize,
}

impl GraphOracle {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut normalized: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|&(u, v)| u != v)
            .map(|(u, v)| if u <= v { (u, v) } else { (v, u) })
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        for &(u, v) in &normalized {
            assert!((v as usize) < n, "edge ({u},{v}) exceeds vertex count {n}");
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &normalized {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let (component, num_components) = components_of(n, &adjacency);
        GraphOracle {
            n,
            edges: normalized,
            adjacency,
            component,
            num_components,
        }
    }

    /// Load from a text file: first line `n m`, then `m` lines `u v`
    /// (0-indexed vertices).
    pub fn from_edge_list_file(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Malformed("empty file".to_string()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::Malformed("bad header".to_string()))?;
        let m: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::Malformed("bad header".to_string()))?;
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let u: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GraphError::Malformed(format!("edge line {}", i + 2)))?;
            let v: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GraphError::Malformed(format!("edge line {}", i + 2)))?;
            if u as usize >= n || v as usize >= n {
                return Err(GraphError::Malformed(format!(
                    "edge ({u},{v}) out of range on line {}",
                    i + 2
                )));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(GraphError::Malformed(format!(
                "expected {m} edges, found {}",
                edges.len()
            )));
        }
        Ok(GraphOracle::from_edges(n, edges))
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    /// Component id of a vertex; ids are assigned in order of each
    /// component's smallest vertex.
    pub fn component_of(&self, v: PointId) -> u32 {
        self.component[v as usize]
    }

    /// Vertex sets of the connected components, ordered by component id.
    pub fn component_sets(&self) -> Vec<Vec<PointId>> {
        let mut sets = vec![Vec::new(); self.num_components];
        for v in 0..self.n {
            sets[self.component[v] as usize].push(v as PointId);
        }
        sets
    }

    /// True iff the subgraph induced by `s` is connected (breadth-first
    /// traversal restricted to `s`). Singletons are connected.
    pub fn connected(&self, s: &[PointId]) -> bool {
        assert!(!s.is_empty(), "connectivity of an empty set");
        let mut members = Bitset::new(self.n);
        for &v in s {
            assert!((v as usize) < self.n, "vertex {v} out of range");
            members.set(v as usize);
        }
        let mut seen = Bitset::new(self.n);
        let mut queue = vec![s[0] as usize];
        seen.set(s[0] as usize);
        let mut count = 1;
        while let Some(v) = queue.pop() {
            for &w in &self.adjacency[v] {
                let w = w as usize;
                if members.get(w) && !seen.get(w) {
                    seen.set(w);
                    count += 1;
                    queue.push(w);
                }
            }
        }
        count == s.len()
    }

    /// Indicator component of the linkage: 1 iff `a ∪ b` induces a
    /// connected subgraph.
    pub fn phi(&self, a: &[PointId], b: &[PointId]) -> Result<f64, GraphError> {
        if a.is_empty() || b.is_empty() {
            return Err(GraphError::EmptySet);
        }
        let mut members = Bitset::new(self.n);
        for &v in a {
            if v as usize >= self.n {
                return Err(GraphError::VertexOutOfRange(v));
            }
            members.set(v as usize);
        }
        for &v in b {
            if v as usize >= self.n {
                return Err(GraphError::VertexOutOfRange(v));
            }
            if members.get(v as usize) {
                return Err(GraphError::Overlap(v));
            }
            members.set(v as usize);
        }
        let mut union: Vec<PointId> = Vec::with_capacity(a.len() + b.len());
        union.extend_from_slice(a);
        union.extend_from_slice(b);
        Ok(if self.connected(&union) { 1.0 } else { 0.0 })
    }

    /// Deterministic symmetric tie-break in [0, 0.5).
    ///
    /// The leading term decays with the union size, the way any pairwise-
    /// averaging linkage dilutes as sets grow: within one connectivity
    /// class, small coherent pairs strictly outscore large unions. Without
    /// this, grafts climb past mixed siblings instead of merging below
    /// them. A hash of the canonical (component id, vertex id) multiset
    /// pair breaks the remaining equal-size ties so distinct pairs never
    /// score exactly equal (exact ties stall the graft walk: no move is
    /// strictly preferred).
    pub fn tie_break(&self, a: &[PointId], b: &[PointId]) -> f64 {
        let mut ma: Vec<(u32, PointId)> = a
            .iter()
            .map(|&v| (self.component[v as usize], v))
            .collect();
        let mut mb: Vec<(u32, PointId)> = b
            .iter()
            .map(|&v| (self.component[v as usize], v))
            .collect();
        ma.sort_unstable();
        mb.sort_unstable();
        let (lo, hi) = if ma <= mb { (&ma, &mb) } else { (&mb, &ma) };
        let mut h = Fnv::new();
        h.write_u64(lo.len() as u64);
        for &(c, v) in lo.iter() {
            h.write_u64(c as u64);
            h.write_u64(v);
        }
        h.write_u64(u64::MAX); // separator
        h.write_u64(hi.len() as u64);
        for &(c, v) in hi.iter() {
            h.write_u64(c as u64);
            h.write_u64(v);
        }
        let jitter = h.finish() as f64 / u64::MAX as f64;
        0.4 / (a.len() + b.len()) as f64 + jitter * 1e-6
    }

    /// Separating linkage score: `phi(a, b) + tie_break(a, b)` in [0, 1.5).
    pub fn linkage(&self, a: &[PointId], b: &[PointId]) -> Result<f64, GraphError> {
        Ok(self.phi(a, b)? + self.tie_break(a, b))
    }
}

fn components_of(n: usize, adjacency: &[Vec<u32>]) -> (Vec<u32>, usize) {
    let mut component = vec![u32::MAX; n];
    let mut next = 0u32;
    for start in 0..n {
        if component[start] != u32::MAX {
            continue;
        }
        component[start] = next;
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            for &w in &adjacency[v] {
                let w = w as usize;
                if component[w] == u32::MAX {
                    component[w] = next;
                    queue.push(w);
                }
            }
        }
        next += 1;
    }
    (component, next as usize)
}

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(n: usize) -> Self {
        Bitset(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }
}

/// FNV-1a, pinned here so tie-break values never shift under us.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// The pluggable linkage contract used throughout tree construction.
#[derive(Clone, Debug)]
pub enum Linkage {
    /// Cosine similarity of aggregated sum vectors.
    Cosine,
    /// Mean pairwise dot product from sums and counts.
    Average,
    /// Graph-connectivity oracle over leaf sets.
    Oracle(GraphOracle),
}

impl Linkage {
    /// Vector linkages expect unit-length inputs; callers normalize on
    /// ingestion and keep raw vectors for export.
    pub fn normalizes_inputs(&self) -> bool {
        matches!(self, Linkage::Cosine | Linkage::Average)
    }

    /// Score two disjoint tree nodes.
    pub fn score_nodes(&self, tree: &ClusterTree, a: NodeHandle, b: NodeHandle) -> f64 {
        match self {
            Linkage::Cosine => centroid_cosine(tree.aggregate(a), tree.aggregate(b)),
            Linkage::Average => average_linkage(tree.aggregate(a), tree.aggregate(b)),
            Linkage::Oracle(g) => {
                let la = tree.leaf_points(a);
                let lb = tree.leaf_points(b);
                g.linkage(&la, &lb)
                    .expect("tree nodes scored by the oracle must be disjoint")
            }
        }
    }

    /// Score a free-standing point against a tree node.
    pub fn score_point_node(&self, tree: &ClusterTree, p: &DataPoint, v: NodeHandle) -> f64 {
        match self {
            Linkage::Cosine => {
                centroid_cosine(&Aggregate::singleton(p), tree.aggregate(v))
            }
            Linkage::Average => average_linkage(&Aggregate::singleton(p), tree.aggregate(v)),
            Linkage::Oracle(g) => {
                let lv = tree.leaf_points(v);
                g.linkage(&[p.id], &lv)
                    .expect("query point must not be a leaf of the scored node")
            }
        }
    }

    /// Score a query aggregate against a tree node; used by search paths
    /// that prepare the query once.
    pub(crate) fn score_query_node(
        &self,
        tree: &ClusterTree,
        query: &QueryRef<'_>,
        v: NodeHandle,
    ) -> f64 {
        match (self, query) {
            (Linkage::Cosine, QueryRef::Vector { aggregate, .. }) => {
                centroid_cosine(aggregate, tree.aggregate(v))
            }
            (Linkage::Average, QueryRef::Vector { aggregate, .. }) => {
                average_linkage(aggregate, tree.aggregate(v))
            }
            (Linkage::Oracle(g), QueryRef::Ids(ids)) => {
                let lv = tree.leaf_points(v);
                g.linkage(ids, &lv).expect("query ids overlap scored node")
            }
            _ => unreachable!("query prepared for a different linkage"),
        }
    }

    /// Score two free-standing points.
    pub fn score_points(&self, p: &DataPoint, q: &DataPoint) -> f64 {
        match self {
            Linkage::Cosine => {
                centroid_cosine(&Aggregate::singleton(p), &Aggregate::singleton(q))
            }
            Linkage::Average => {
                average_linkage(&Aggregate::singleton(p), &Aggregate::singleton(q))
            }
            Linkage::Oracle(g) => g
                .linkage(&[p.id], &[q.id])
                .expect("distinct points score without overlap"),
        }
    }

    /// Score a query against a stored singleton aggregate (used by the
    /// approximate index, which keeps points outside any tree).
    pub fn score_query_aggregate(
        &self,
        query: &QueryRef<'_>,
        id: PointId,
        agg: &Aggregate,
    ) -> f64 {
        match (self, query) {
            (Linkage::Cosine, QueryRef::Vector { aggregate, .. }) => centroid_cosine(aggregate, agg),
            (Linkage::Average, QueryRef::Vector { aggregate, .. }) => average_linkage(aggregate, agg),
            (Linkage::Oracle(g), QueryRef::Ids(ids)) => g
                .linkage(ids, &[id])
                .expect("query ids overlap stored point"),
            _ => unreachable!("query prepared for a different linkage"),
        }
    }
}

/// A prepared query: either a vector aggregate (for vector linkages) or an
/// explicit id set (for the oracle).
pub enum QueryRef<'a> {
    Vector {
        aggregate: &'a Aggregate,
    },
    Ids(&'a [PointId]),
}
