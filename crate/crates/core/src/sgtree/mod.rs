//! SG-tree: a cover-tree variant where only siblings must be separated.
//!
//! Nodes live in an arena. A node at level `l` has children at level `l - 1`
//! that lie within `base^l` of it, siblings are more than `base^(l-1)` apart,
//! and a node with children always lists its own point as one of them (the
//! "self child"). Each node caches `max_dist`, an upper bound on the distance
//! from its point to any descendant, which lets searches skip whole subtrees.
//!
//! Exact duplicate vectors share one storage slot and one chain of nodes; the
//! slot records every id that maps to it.

mod invariants;
mod search;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

pub use invariants::{Violation, ViolationKind};

use crate::error::{check_dim, CoverSummError, Result};
use crate::vectorspace::{check_finite, dist, PointId};

pub(crate) const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) slot: u32,
    pub(crate) level: i32,
    pub(crate) parent: u32,
    pub(crate) max_dist: f64,
    pub(crate) children: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
struct Slot {
    ids: Vec<PointId>,
    top: u32,
}

#[derive(Debug, Clone)]
pub struct SgTree {
    base: f64,
    dim: usize,
    coords: Vec<f64>,
    slots: Vec<Slot>,
    free_slots: Vec<u32>,
    nodes: Vec<Node>,
    free_nodes: Vec<u32>,
    root: u32,
    slot_of: HashMap<PointId, u32>,
    dedup: HashMap<u64, Vec<u32>>,
    len: usize,
    pruning: bool,
}

pub const DEFAULT_BASE: f64 = 2.0;

impl SgTree {
    pub fn new(dim: usize) -> Self {
        Self::with_base(dim, DEFAULT_BASE).expect("default base is valid")
    }

    pub fn with_base(dim: usize, base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(CoverSummError::InvalidInput(format!("tree base must exceed 1, got {base}")));
        }
        if dim == 0 {
            return Err(CoverSummError::InvalidInput("dim must be at least 1".into()));
        }
        Ok(SgTree {
            base,
            dim,
            coords: Vec::new(),
            slots: Vec::new(),
            free_slots: Vec::new(),
            nodes: Vec::new(),
            free_nodes: Vec::new(),
            root: NIL,
            slot_of: HashMap::new(),
            dedup: HashMap::new(),
            len: 0,
            pruning: true,
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of live points, counting every duplicate.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of live nodes, including self-children.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free_nodes.len()
    }

    /// Number of distinct stored vectors.
    pub fn distinct_points(&self) -> usize {
        self.slots.len() - self.free_slots.len()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.slot_of.contains_key(&id)
    }

    pub fn point(&self, id: PointId) -> Option<&[f64]> {
        self.slot_of.get(&id).map(|&s| self.slot_coords(s))
    }

    /// How many ids share the vector stored for `id`.
    pub fn multiplicity(&self, id: PointId) -> Option<usize> {
        self.slot_of.get(&id).map(|&s| self.slots[s as usize].ids.len())
    }

    /// Enables or disables subtree pruning during searches. Results are the
    /// same either way; only the amount of work changes.
    pub fn set_pruning(&mut self, enabled: bool) {
        self.pruning = enabled;
    }

    pub fn root_level(&self) -> Option<i32> {
        (self.root != NIL).then(|| self.nodes[self.root as usize].level)
    }

    #[inline]
    pub(crate) fn cover(&self, level: i32) -> f64 {
        self.base.powi(level)
    }

    #[inline]
    pub(crate) fn slot_coords(&self, slot: u32) -> &[f64] {
        let s = slot as usize * self.dim;
        &self.coords[s..s + self.dim]
    }

    #[inline]
    fn slot_dist(&self, a: u32, b: u32) -> f64 {
        dist(self.slot_coords(a), self.slot_coords(b))
    }

    fn coord_key(v: &[f64]) -> u64 {
        let mut h = DefaultHasher::new();
        for x in v {
            // -0.0 and 0.0 are the same location
            (x + 0.0).to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn find_duplicate(&self, key: u64, v: &[f64]) -> Option<u32> {
        self.dedup
            .get(&key)?
            .iter()
            .copied()
            .find(|&s| self.slot_coords(s) == v)
    }

    fn alloc_slot(&mut self, id: PointId, v: &[f64]) -> u32 {
        let slot = match self.free_slots.pop() {
            Some(s) => {
                let start = s as usize * self.dim;
                self.coords[start..start + self.dim].copy_from_slice(v);
                s
            }
            None => {
                self.coords.extend_from_slice(v);
                self.slots.push(Slot::default());
                (self.slots.len() - 1) as u32
            }
        };
        self.slots[slot as usize] = Slot { ids: vec![id], top: NIL };
        slot
    }

    fn new_node(&mut self, slot: u32, level: i32, parent: u32) -> u32 {
        let node = Node { slot, level, parent, max_dist: 0.0, children: Vec::new() };
        match self.free_nodes.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn free_node(&mut self, n: u32) {
        let node = &mut self.nodes[n as usize];
        node.children = Vec::new();
        node.parent = NIL;
        node.slot = NIL;
        self.free_nodes.push(n);
    }

    /// Smallest level whose covering radius reaches `d`.
    fn level_for(&self, d: f64) -> i32 {
        let mut l = (d.ln() / self.base.ln()).ceil() as i32;
        while self.cover(l) < d {
            l += 1;
        }
        while self.cover(l - 1) >= d {
            l -= 1;
        }
        l
    }

    pub fn insert(&mut self, id: PointId, v: &[f64]) -> Result<()> {
        check_dim(self.dim, v.len())?;
        check_finite(v)?;
        if self.slot_of.contains_key(&id) {
            return Err(CoverSummError::InvalidInput(format!("point {id} already indexed")));
        }
        let key = Self::coord_key(v);
        if let Some(slot) = self.find_duplicate(key, v) {
            self.slots[slot as usize].ids.push(id);
            self.slot_of.insert(id, slot);
            self.len += 1;
            return Ok(());
        }
        let slot = self.alloc_slot(id, v);
        self.dedup.entry(key).or_default().push(slot);
        self.slot_of.insert(id, slot);
        self.insert_slot(slot);
        self.len += 1;
        Ok(())
    }

    fn insert_slot(&mut self, slot: u32) {
        if self.root == NIL {
            self.root = self.new_node(slot, 0, NIL);
            self.slots[slot as usize].top = self.root;
            return;
        }
        let root_slot = self.nodes[self.root as usize].slot;
        let d = self.slot_dist(root_slot, slot);
        if self.nodes[self.root as usize].children.is_empty() {
            // a lone root can take whatever level fits the first pair
            let l = self.level_for(d);
            self.nodes[self.root as usize].level = l;
        }
        while d > self.cover(self.nodes[self.root as usize].level) {
            self.promote_root();
        }

        let mut p = self.root;
        let mut dp = d;
        loop {
            let (p_slot, level) = {
                let node = &mut self.nodes[p as usize];
                node.max_dist = node.max_dist.max(dp);
                (node.slot, node.level)
            };
            let child_cover = self.cover(level - 1);

            if self.nodes[p as usize].children.is_empty() {
                let own = self.new_node(p_slot, level - 1, p);
                self.nodes[p as usize].children.push(own);
                if dp <= child_cover {
                    // still inside the self-child's cover: go one level down
                    p = own;
                    continue;
                }
                let fresh = self.new_node(slot, level - 1, p);
                self.nodes[p as usize].children.push(fresh);
                self.slots[slot as usize].top = fresh;
                return;
            }

            let mut best: Option<(u32, f64)> = None;
            for &c in &self.nodes[p as usize].children {
                let c_slot = self.nodes[c as usize].slot;
                let dc = if c_slot == p_slot { dp } else { self.slot_dist(c_slot, slot) };
                if dc <= child_cover && best.is_none_or(|(_, bd)| dc < bd) {
                    best = Some((c, dc));
                }
            }
            match best {
                Some((c, dc)) => {
                    p = c;
                    dp = dc;
                }
                None => {
                    let fresh = self.new_node(slot, level - 1, p);
                    self.nodes[p as usize].children.push(fresh);
                    self.slots[slot as usize].top = fresh;
                    return;
                }
            }
        }
    }

    fn promote_root(&mut self) {
        let old = self.root;
        let (slot, level, max_dist) = {
            let n = &self.nodes[old as usize];
            (n.slot, n.level, n.max_dist)
        };
        let new_root = self.new_node(slot, level + 1, NIL);
        self.nodes[new_root as usize].children.push(old);
        self.nodes[new_root as usize].max_dist = max_dist;
        self.nodes[old as usize].parent = new_root;
        self.slots[slot as usize].top = new_root;
        self.root = new_root;
    }

    /// Removes one id. When it was the last id sharing its vector, the node
    /// chain for that vector is removed and every point that hung below it
    /// is re-inserted, highest level first.
    pub fn remove(&mut self, id: PointId) -> Result<()> {
        let slot = self.slot_of.remove(&id).ok_or(CoverSummError::NotFound(id))?;
        self.len -= 1;
        {
            let ids = &mut self.slots[slot as usize].ids;
            ids.retain(|&x| x != id);
            if !ids.is_empty() {
                return Ok(());
            }
        }

        let top = self.slots[slot as usize].top;
        let mut chain = vec![top];
        let mut cur = top;
        while let Some(&own) = self.nodes[cur as usize]
            .children
            .iter()
            .find(|&&c| self.nodes[c as usize].slot == slot)
        {
            chain.push(own);
            cur = own;
        }

        let mut orphans: Vec<(i32, u32)> = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        for &n in &chain {
            for &c in &self.nodes[n as usize].children {
                if self.nodes[c as usize].slot != slot {
                    stack.push(c);
                }
            }
        }
        while let Some(n) = stack.pop() {
            let (s, level) = (self.nodes[n as usize].slot, self.nodes[n as usize].level);
            if self.slots[s as usize].top == n {
                orphans.push((level, s));
            }
            stack.extend_from_slice(&self.nodes[n as usize].children);
            self.free_node(n);
        }

        let parent = self.nodes[top as usize].parent;
        if parent == NIL {
            self.root = NIL;
        } else {
            self.nodes[parent as usize].children.retain(|&c| c != top);
        }
        for n in chain {
            self.free_node(n);
        }

        let key = Self::coord_key(self.slot_coords(slot));
        if let Some(v) = self.dedup.get_mut(&key) {
            v.retain(|&s| s != slot);
            if v.is_empty() {
                self.dedup.remove(&key);
            }
        }
        self.slots[slot as usize] = Slot { ids: Vec::new(), top: NIL };
        self.free_slots.push(slot);

        orphans.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, s) in orphans {
            self.insert_slot(s);
        }
        Ok(())
    }

    /// Ids of every live point, in no particular order.
    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.slot_of.keys().copied()
    }
}

impl crate::index::NeighborIndex for SgTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.len
    }

    fn insert(&mut self, id: PointId, vec: &[f64]) -> Result<()> {
        SgTree::insert(self, id, vec)
    }

    fn remove(&mut self, id: PointId) -> Result<()> {
        SgTree::remove(self, id)
    }

    fn knn(&self, query: &[f64], k: usize) -> Vec<crate::index::Neighbor> {
        SgTree::knn(self, query, k)
    }

    fn range(&self, query: &[f64], radius: f64) -> Vec<crate::index::Neighbor> {
        SgTree::range(self, query, radius)
    }

    fn reservoir_search(
        &self,
        query: &[f64],
        lambda: f64,
        k: usize,
    ) -> Result<crate::index::ReservoirResult> {
        SgTree::reservoir_search(self, query, lambda, k)
    }
}
