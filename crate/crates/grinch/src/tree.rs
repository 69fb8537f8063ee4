//! Arena-backed binary cluster tree with structural edit operations.
//!
//! Every node is either a leaf carrying one data point or an internal node
//! with exactly two children. Nodes cache an [`Aggregate`] (vector sum, leaf
//! count, height) that is maintained incrementally along root paths as the
//! tree is edited. Handles into the arena carry a generation counter, so a
//! handle to a freed node panics instead of silently aliasing a reused slot.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::vector::SumVec;

/// Identifier of a data point; unique within a run.
pub type PointId = u64;

/// A feature vector with an identity and an optional ground-truth label.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPoint {
    pub id: PointId,
    pub vector: Vec<f64>,
    pub label: Option<u64>,
}

impl DataPoint {
    pub fn new(id: PointId, vector: Vec<f64>) -> Self {
        DataPoint {
            id,
            vector,
            label: None,
        }
    }

    pub fn labeled(id: PointId, vector: Vec<f64>, label: u64) -> Self {
        DataPoint {
            id,
            vector,
            label: Some(label),
        }
    }
}

/// Opaque index into the tree arena.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct NodeHandle {
    index: u32,
    generation: u32,
}

impl NodeHandle {
    /// Arena slot index; stable for the lifetime of the node and used as
    /// the deterministic tie-break ordering between nodes.
    pub fn index(&self) -> u32 {
        self.index
    }
}

/// Cached summary of a subtree: elementwise vector sum over its leaves,
/// leaf count, and height (edges on the longest downward path to a leaf).
#[derive(Clone, Debug)]
pub struct Aggregate {
    pub vector_sum: SumVec,
    pub leaf_count: usize,
    pub height: u32,
}

impl Aggregate {
    /// Aggregate of a single point: its own vector, one leaf, height zero.
    pub fn singleton(point: &DataPoint) -> Self {
        Aggregate {
            vector_sum: SumVec::from_dense(&point.vector),
            leaf_count: 1,
            height: 0,
        }
    }

    fn combine(a: &Aggregate, b: &Aggregate) -> Self {
        let mut sum = a.vector_sum.clone();
        sum.add_assign(&b.vector_sum);
        Aggregate {
            vector_sum: sum,
            leaf_count: a.leaf_count + b.leaf_count,
            height: 1 + a.height.max(b.height),
        }
    }
}

#[derive(Debug)]
struct TreeNode {
    parent: Option<NodeHandle>,
    children: Option<(NodeHandle, NodeHandle)>,
    aggregate: Aggregate,
    point: Option<PointId>,
}

struct Slot {
    generation: u32,
    node: Option<TreeNode>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("point id {0} already inserted")]
    DuplicatePoint(PointId),
    #[error("vector dimension {got} does not match dataset dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("incoming node is already attached to a parent")]
    AlreadyAttached,
    #[error("node would become a descendant of itself")]
    AncestryOverlap,
    #[error("node has no aunt")]
    NoAunt,
    #[error("cannot detach a root node")]
    DetachRoot,
    #[error("node is not attached to a parent")]
    Detached,
    #[error("stop node is not an ancestor of the start node")]
    NotAncestor,
}

/// Binary tree over inserted points. See the module docs.
pub struct ClusterTree {
    dim: usize,
    slots: Vec<Slot>,
    free: Vec<u32>,
    root: Option<NodeHandle>,
    leaf_index: HashMap<PointId, NodeHandle>,
    validate_edits: bool,
}

impl ClusterTree {
    pub fn new(dim: usize) -> Self {
        ClusterTree {
            dim,
            slots: Vec::new(),
            free: Vec::new(),
            root: None,
            leaf_index: HashMap::new(),
            validate_edits: false,
        }
    }

    /// When enabled, every structural edit recomputes all aggregates from
    /// scratch and compares against the incrementally maintained values
    /// (1e-9 relative tolerance on sums). Debugging aid; very slow.
    pub fn set_edit_validation(&mut self, on: bool) {
        self.validate_edits = on;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> Option<NodeHandle> {
        self.root
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_index.is_empty()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.slots.len() - self.free.len()
    }

    fn node(&self, h: NodeHandle) -> &TreeNode {
        let slot = &self.slots[h.index as usize];
        assert_eq!(
            slot.generation, h.generation,
            "stale node handle: slot {} was freed and reused",
            h.index
        );
        slot.node.as_ref().expect("stale node handle: slot is free")
    }

    fn node_mut(&mut self, h: NodeHandle) -> &mut TreeNode {
        let slot = &mut self.slots[h.index as usize];
        assert_eq!(
            slot.generation, h.generation,
            "stale node handle: slot {} was freed and reused",
            h.index
        );
        slot.node.as_mut().expect("stale node handle: slot is free")
    }

    fn alloc(&mut self, node: TreeNode) -> NodeHandle {
        if let Some(index) = self.free.pop() {
            let slot = &mut self.slots[index as usize];
            slot.node = Some(node);
            NodeHandle {
                index,
                generation: slot.generation,
            }
        } else {
            let index = self.slots.len() as u32;
            self.slots.push(Slot {
                generation: 0,
                node: Some(node),
            });
            NodeHandle {
                index,
                generation: 0,
            }
        }
    }

    fn release(&mut self, h: NodeHandle) {
        let slot = &mut self.slots[h.index as usize];
        assert_eq!(slot.generation, h.generation, "double free of node slot");
        slot.node = None;
        slot.generation = slot.generation.wrapping_add(1);
        self.free.push(h.index);
    }

    // ------------------------------------------------------------------
    // Queries
    // ------------------------------------------------------------------

    pub fn parent(&self, h: NodeHandle) -> Option<NodeHandle> {
        self.node(h).parent
    }

    pub fn children(&self, h: NodeHandle) -> Option<(NodeHandle, NodeHandle)> {
        self.node(h).children
    }

    pub fn is_leaf(&self, h: NodeHandle) -> bool {
        self.node(h).children.is_none()
    }

    pub fn point_id(&self, h: NodeHandle) -> Option<PointId> {
        self.node(h).point
    }

    pub fn aggregate(&self, h: NodeHandle) -> &Aggregate {
        &self.node(h).aggregate
    }

    pub fn height(&self, h: NodeHandle) -> u32 {
        self.node(h).aggregate.height
    }

    pub fn leaf_count(&self, h: NodeHandle) -> usize {
        self.node(h).aggregate.leaf_count
    }

    pub fn sibling(&self, h: NodeHandle) -> Option<NodeHandle> {
        let p = self.node(h).parent?;
        let (a, b) = self.node(p).children.expect("parent must be internal");
        Some(if a == h { b } else { a })
    }

    pub fn aunt(&self, h: NodeHandle) -> Option<NodeHandle> {
        let p = self.node(h).parent?;
        self.sibling(p)
    }

    pub fn leaf_of(&self, id: PointId) -> Option<NodeHandle> {
        self.leaf_index.get(&id).copied()
    }

    /// All live leaves in arena order (insertion order for append-only use).
    pub fn leaves(&self) -> impl Iterator<Item = NodeHandle> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, slot)| {
            let node = slot.node.as_ref()?;
            node.point.map(|_| NodeHandle {
                index: i as u32,
                generation: slot.generation,
            })
        })
    }

    /// All live nodes in arena order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeHandle> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, slot)| {
            slot.node.as_ref().map(|_| NodeHandle {
                index: i as u32,
                generation: slot.generation,
            })
        })
    }

    /// Point ids of the leaves under `h`, in arbitrary deterministic order.
    pub fn leaf_points(&self, h: NodeHandle) -> Vec<PointId> {
        let mut out = Vec::with_capacity(self.leaf_count(h));
        let mut stack = vec![h];
        while let Some(cur) = stack.pop() {
            let node = self.node(cur);
            match node.children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => out.push(node.point.expect("leaf without point")),
            }
        }
        out
    }

    fn depth(&self, h: NodeHandle) -> usize {
        let mut d = 0;
        let mut cur = h;
        while let Some(p) = self.node(cur).parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Deepest node that has both `a` and `b` as descendants. A node is its
    /// own descendant. Panics if the two nodes are not in the same tree.
    pub fn lca(&self, a: NodeHandle, b: NodeHandle) -> NodeHandle {
        let (mut x, mut y) = (a, b);
        let (mut dx, mut dy) = (self.depth(x), self.depth(y));
        while dx > dy {
            x = self.node(x).parent.expect("depth bookkeeping");
            dx -= 1;
        }
        while dy > dx {
            y = self.node(y).parent.expect("depth bookkeeping");
            dy -= 1;
        }
        while x != y {
            x = self.node(x).parent.expect("lca: nodes in different trees");
            y = self.node(y).parent.expect("lca: nodes in different trees");
        }
        x
    }

    /// `v` and its proper ancestors strictly below `stop`, deepest first.
    pub fn ancestors(&self, v: NodeHandle, stop: NodeHandle) -> Result<Vec<NodeHandle>, TreeError> {
        let mut out = Vec::new();
        let mut cur = v;
        while cur != stop {
            out.push(cur);
            cur = self.node(cur).parent.ok_or(TreeError::NotAncestor)?;
        }
        Ok(out)
    }

    /// As [`ancestors`](Self::ancestors) but excluding `v` itself.
    pub fn proper_ancestors(
        &self,
        v: NodeHandle,
        stop: NodeHandle,
    ) -> Result<Vec<NodeHandle>, TreeError> {
        let mut out = self.ancestors(v, stop)?;
        if !out.is_empty() {
            out.remove(0);
        }
        Ok(out)
    }

    fn is_ancestor_of(&self, a: NodeHandle, b: NodeHandle) -> bool {
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.node(cur).parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    // ------------------------------------------------------------------
    // Structural edits
    // ------------------------------------------------------------------

    /// Create a detached leaf for `point`. The first leaf of an empty tree
    /// becomes the root.
    pub fn add_leaf(&mut self, point: &DataPoint) -> Result<NodeHandle, TreeError> {
        if point.vector.len() != self.dim {
            return Err(TreeError::DimensionMismatch {
                expected: self.dim,
                got: point.vector.len(),
            });
        }
        if self.leaf_index.contains_key(&point.id) {
            return Err(TreeError::DuplicatePoint(point.id));
        }
        let h = self.alloc(TreeNode {
            parent: None,
            children: None,
            aggregate: Aggregate::singleton(point),
            point: Some(point.id),
        });
        self.leaf_index.insert(point.id, h);
        if self.root.is_none() {
            self.root = Some(h);
        }
        Ok(h)
    }

    /// Merge `incoming` (which must be detached) next to `existing`: a new
    /// internal node takes `existing`'s place with children
    /// `{existing, incoming}`. Returns the new parent.
    pub fn make_sib(
        &mut self,
        existing: NodeHandle,
        incoming: NodeHandle,
    ) -> Result<NodeHandle, TreeError> {
        if self.node(incoming).parent.is_some() {
            return Err(TreeError::AlreadyAttached);
        }
        if existing == incoming || self.is_ancestor_of(incoming, existing) {
            return Err(TreeError::AncestryOverlap);
        }
        let old_parent = self.node(existing).parent;
        let aggregate = Aggregate::combine(
            &self.node(existing).aggregate,
            &self.node(incoming).aggregate,
        );
        let parent = self.alloc(TreeNode {
            parent: old_parent,
            children: Some((existing, incoming)),
            aggregate,
            point: None,
        });
        self.node_mut(existing).parent = Some(parent);
        self.node_mut(incoming).parent = Some(parent);
        match old_parent {
            Some(gp) => {
                self.replace_child(gp, existing, parent);
                let delta = self.node(incoming).aggregate.vector_sum.clone();
                let count = self.node(incoming).aggregate.leaf_count;
                self.apply_upward(gp, &delta, count as isize);
            }
            None => {
                if self.root == Some(existing) || self.root == Some(incoming) {
                    self.root = Some(parent);
                }
            }
        }
        self.after_edit();
        Ok(parent)
    }

    /// Splice `v` out of the tree: its parent is removed and the sibling
    /// takes the parent's place. Returns `v`, now detached.
    pub fn detach(&mut self, v: NodeHandle) -> Result<NodeHandle, TreeError> {
        let parent = self.node(v).parent.ok_or(TreeError::DetachRoot)?;
        let sib = self.sibling(v).expect("attached node has a sibling");
        let grandparent = self.node(parent).parent;
        self.node_mut(sib).parent = grandparent;
        self.node_mut(v).parent = None;
        match grandparent {
            Some(gp) => {
                self.replace_child(gp, parent, sib);
                let delta = self.node(v).aggregate.vector_sum.clone();
                let count = self.node(v).aggregate.leaf_count;
                self.remove_upward(gp, &delta, count as isize);
            }
            None => {
                if self.root == Some(parent) {
                    self.root = Some(sib);
                }
            }
        }
        self.release(parent);
        self.after_edit();
        Ok(v)
    }

    /// Exchange `v` with its aunt. The grandparent's leaf set is unchanged.
    pub fn rotate(&mut self, v: NodeHandle) -> Result<(), TreeError> {
        let parent = self.node(v).parent.ok_or(TreeError::NoAunt)?;
        let grandparent = self.node(parent).parent.ok_or(TreeError::NoAunt)?;
        let aunt = self.sibling(parent).expect("grandparent is internal");
        self.replace_child(parent, v, aunt);
        self.replace_child(grandparent, aunt, v);
        self.node_mut(v).parent = Some(grandparent);
        self.node_mut(aunt).parent = Some(parent);
        self.refresh_node(parent);
        self.refresh_heights_from(grandparent);
        self.after_edit();
        Ok(())
    }

    /// Exchange the subtrees rooted at `a` and `b`. `swap(x, x)` is a no-op.
    pub fn swap(&mut self, a: NodeHandle, b: NodeHandle) -> Result<(), TreeError> {
        if a == b {
            return Ok(());
        }
        if self.is_ancestor_of(a, b) || self.is_ancestor_of(b, a) {
            return Err(TreeError::AncestryOverlap);
        }
        let pa = self.node(a).parent.ok_or(TreeError::Detached)?;
        let pb = self.node(b).parent.ok_or(TreeError::Detached)?;
        self.replace_child(pa, a, b);
        self.replace_child(pb, b, a);
        self.node_mut(a).parent = Some(pb);
        self.node_mut(b).parent = Some(pa);
        if pa == pb {
            self.after_edit();
            return Ok(());
        }
        // Refresh both edited root paths bottom-up: the segments below the
        // lca first, then the shared segment once.
        let top = self.lca(pa, pb);
        let mut below_a = self.ancestors(pa, top).unwrap_or_default();
        let mut below_b = self.ancestors(pb, top).unwrap_or_default();
        if pa == top {
            below_a.clear();
        }
        if pb == top {
            below_b.clear();
        }
        for h in below_a.into_iter().chain(below_b) {
            self.refresh_node(h);
        }
        let mut cur = Some(top);
        while let Some(h) = cur {
            self.refresh_node(h);
            cur = self.node(h).parent;
        }
        self.after_edit();
        Ok(())
    }

    fn replace_child(&mut self, parent: NodeHandle, old: NodeHandle, new: NodeHandle) {
        let node = self.node_mut(parent);
        let (a, b) = node.children.expect("replace_child on a leaf");
        node.children = Some(match (a == old, b == old) {
            (true, _) => (new, b),
            (_, true) => (a, new),
            _ => panic!("replace_child: old child not found"),
        });
    }

    /// Recompute one node's aggregate from its children.
    fn refresh_node(&mut self, h: NodeHandle) {
        let (a, b) = self.node(h).children.expect("refresh of a leaf");
        let aggregate = Aggregate::combine(&self.node(a).aggregate, &self.node(b).aggregate);
        self.node_mut(h).aggregate = aggregate;
    }

    fn refresh_heights_from(&mut self, start: NodeHandle) {
        let mut cur = Some(start);
        while let Some(h) = cur {
            let (a, b) = match self.node(h).children {
                Some(c) => c,
                None => break,
            };
            let new_height = 1 + self.node(a).aggregate.height.max(self.node(b).aggregate.height);
            if self.node(h).aggregate.height == new_height {
                break;
            }
            self.node_mut(h).aggregate.height = new_height;
            cur = self.node(h).parent;
        }
    }

    fn apply_upward(&mut self, start: NodeHandle, delta: &SumVec, count: isize) {
        let mut cur = Some(start);
        while let Some(h) = cur {
            let (a, b) = self.node(h).children.expect("internal ancestor");
            let new_height = 1 + self.node(a).aggregate.height.max(self.node(b).aggregate.height);
            let node = self.node_mut(h);
            node.aggregate.vector_sum.add_assign(delta);
            node.aggregate.leaf_count = (node.aggregate.leaf_count as isize + count) as usize;
            node.aggregate.height = new_height;
            cur = node.parent;
        }
    }

    fn remove_upward(&mut self, start: NodeHandle, delta: &SumVec, count: isize) {
        let mut cur = Some(start);
        while let Some(h) = cur {
            let (a, b) = self.node(h).children.expect("internal ancestor");
            let new_height = 1 + self.node(a).aggregate.height.max(self.node(b).aggregate.height);
            let node = self.node_mut(h);
            node.aggregate.vector_sum.sub_assign(delta);
            node.aggregate.leaf_count = (node.aggregate.leaf_count as isize - count) as usize;
            node.aggregate.height = new_height;
            cur = node.parent;
        }
    }

    fn after_edit(&mut self) {
        if self.validate_edits {
            if let Err(msg) = self.check_consistency(1e-9) {
                panic!("tree invariant violated after edit: {msg}");
            }
        }
    }

    // ------------------------------------------------------------------
    // Validation
    // ------------------------------------------------------------------

    /// Verify structural invariants and compare every cached aggregate
    /// against a from-scratch recomputation.
    pub fn check_consistency(&self, rel_tol: f64) -> Result<(), String> {
        let handles: Vec<NodeHandle> = self.nodes().collect();
        let mut leaf_seen = 0usize;
        for &h in &handles {
            let node = self.node(h);
            match node.children {
                Some((a, b)) => {
                    if node.point.is_some() {
                        return Err(format!("internal node {} carries a point", h.index));
                    }
                    for c in [a, b] {
                        if self.node(c).parent != Some(h) {
                            return Err(format!(
                                "child {} of {} has inconsistent parent link",
                                c.index, h.index
                            ));
                        }
                    }
                }
                None => {
                    let id = node
                        .point
                        .ok_or_else(|| format!("leaf {} without point", h.index))?;
                    if self.leaf_index.get(&id) != Some(&h) {
                        return Err(format!("leaf index entry for point {id} is wrong"));
                    }
                    leaf_seen += 1;
                }
            }
        }
        if leaf_seen != self.leaf_index.len() {
            return Err("leaf index size does not match live leaves".to_string());
        }
        for &h in &handles {
            let node = self.node(h);
            if let Some((a, b)) = node.children {
                let expect = Aggregate::combine(&self.node(a).aggregate, &self.node(b).aggregate);
                if expect.leaf_count != node.aggregate.leaf_count {
                    return Err(format!(
                        "leaf_count mismatch at {}: cached {} recomputed {}",
                        h.index, node.aggregate.leaf_count, expect.leaf_count
                    ));
                }
                if expect.height != node.aggregate.height {
                    return Err(format!(
                        "height mismatch at {}: cached {} recomputed {}",
                        h.index, node.aggregate.height, expect.height
                    ));
                }
            }
        }
        // Compare cached sums against sums rebuilt from the leaves.
        for &h in &handles {
            if self.node(h).children.is_none() {
                continue;
            }
            let recomputed = self.recompute_sum(h);
            let cached = self.node(h).aggregate.vector_sum.to_dense();
            let fresh = recomputed.to_dense();
            for (i, (c, f)) in cached.iter().zip(fresh.iter()).enumerate() {
                let scale = f.abs().max(1.0);
                if (c - f).abs() > rel_tol * scale {
                    return Err(format!(
                        "vector_sum mismatch at node {} index {i}: cached {c} recomputed {f}",
                        h.index
                    ));
                }
            }
        }
        Ok(())
    }

    fn recompute_sum(&self, h: NodeHandle) -> SumVec {
        let mut sum = SumVec::zeros(self.dim);
        let mut stack = vec![h];
        while let Some(cur) = stack.pop() {
            match self.node(cur).children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => sum.add_assign(&self.node(cur).aggregate.vector_sum),
            }
        }
        sum
    }

    // ------------------------------------------------------------------
    // Serialization
    // ------------------------------------------------------------------

    /// Smallest descendant point id per node; drives deterministic child
    /// ordering in both export formats.
    fn min_point_ids(&self) -> HashMap<u32, PointId> {
        let mut min_ids: HashMap<u32, PointId> = HashMap::new();
        let root = match self.root {
            Some(r) => r,
            None => return min_ids,
        };
        // Post-order over an explicit stack.
        let mut stack = vec![(root, false)];
        while let Some((h, expanded)) = stack.pop() {
            match self.node(h).children {
                None => {
                    min_ids.insert(h.index, self.node(h).point.expect("leaf point"));
                }
                Some((a, b)) => {
                    if expanded {
                        let m = min_ids[&a.index].min(min_ids[&b.index]);
                        min_ids.insert(h.index, m);
                    } else {
                        stack.push((h, true));
                        stack.push((a, false));
                        stack.push((b, false));
                    }
                }
            }
        }
        min_ids
    }

    fn ordered_children(
        &self,
        h: NodeHandle,
        min_ids: &HashMap<u32, PointId>,
    ) -> Option<(NodeHandle, NodeHandle)> {
        let (a, b) = self.node(h).children?;
        if min_ids[&a.index] <= min_ids[&b.index] {
            Some((a, b))
        } else {
            Some((b, a))
        }
    }

    /// Flat JSON export: one record per node in preorder, children visited
    /// smallest-descendant-point-id first.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct NodeRecord {
            node_id: usize,
            parent_id: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            point_id: Option<PointId>,
            leaf_count: usize,
            height: u32,
        }
        let mut records: Vec<NodeRecord> = Vec::new();
        let root = match self.root {
            Some(r) => r,
            None => return serde_json::json!({ "nodes": [] }),
        };
        let min_ids = self.min_point_ids();
        let mut stack: Vec<(NodeHandle, Option<usize>)> = vec![(root, None)];
        while let Some((h, parent_id)) = stack.pop() {
            let node = self.node(h);
            let id = records.len();
            records.push(NodeRecord {
                node_id: id,
                parent_id,
                point_id: node.point,
                leaf_count: node.aggregate.leaf_count,
                height: node.aggregate.height,
            });
            if let Some((a, b)) = self.ordered_children(h, &min_ids) {
                // Push right first so the left child is numbered next.
                stack.push((b, Some(id)));
                stack.push((a, Some(id)));
            }
        }
        serde_json::json!({ "nodes": records })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("tree serialization")
    }

    /// Newick export with leaf names equal to point ids.
    pub fn to_newick(&self) -> String {
        let root = match self.root {
            Some(r) => r,
            None => return ";".to_string(),
        };
        let min_ids = self.min_point_ids();
        let mut out = String::new();
        // Iterative traversal emitting brackets around child visits.
        enum Step {
            Enter(NodeHandle),
            Comma,
            Close,
        }
        let mut stack = vec![Step::Enter(root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(h) => match self.ordered_children(h, &min_ids) {
                    Some((a, b)) => {
                        out.push('(');
                        stack.push(Step::Close);
                        stack.push(Step::Enter(b));
                        stack.push(Step::Comma);
                        stack.push(Step::Enter(a));
                    }
                    None => {
                        out.push_str(&self.node(h).point.expect("leaf point").to_string());
                    }
                },
                Step::Comma => out.push(','),
                Step::Close => out.push(')'),
            }
        }
        out.push(';');
        out
    }
}
