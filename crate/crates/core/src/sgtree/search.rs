use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{SgTree, NIL};
use crate::error::{check_dim, CoverSummError, Result};
use crate::index::{sort_neighbors, KBest, Neighbor, ReservoirResult, SearchStats};
use crate::vectorspace::dist;

/// A node waiting to be expanded. `fresh` is false for self-children, whose
/// point was already reported by the parent.
struct Frame {
    lower: f64,
    dist: f64,
    node: u32,
    fresh: bool,
}

impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frame {}

impl PartialOrd for Frame {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frame {
    // reversed: BinaryHeap pops the smallest lower bound first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then(other.node.cmp(&self.node))
    }
}

/// What a traversal is looking for.
#[derive(Clone, Copy)]
struct Goal {
    /// Number of nearest neighbours to track; zero for a pure range query.
    k: usize,
    /// Slack added to the running k-th distance.
    lambda: f64,
    /// Fixed search radius, used instead of `d_k + lambda` when set.
    fixed: Option<f64>,
    /// Whether to gather every point inside the search radius.
    collect: bool,
}

// Rounding in `d(q, node) - max_dist` may undershoot the true bound by a few
// ulps; pruning only beyond this margin keeps results exact.
#[inline]
fn widen(r: f64) -> f64 {
    r + 1e-10 * (1.0 + r.abs())
}

impl SgTree {
    fn traverse(&self, query: &[f64], goal: Goal, stats: &mut SearchStats) -> (KBest, Vec<Neighbor>) {
        let mut best = KBest::new(goal.k);
        let mut found = Vec::new();
        if self.root == NIL {
            return (best, found);
        }
        let radius = |best: &KBest| goal.fixed.unwrap_or_else(|| best.bound() + goal.lambda);

        let root = &self.nodes[self.root as usize];
        let d_root = dist(query, self.slot_coords(root.slot));
        stats.distance_evals += 1;
        let mut heap = BinaryHeap::new();
        heap.push(Frame { lower: d_root - root.max_dist, dist: d_root, node: self.root, fresh: true });

        while let Some(f) = heap.pop() {
            stats.nodes_visited += 1;
            let node = &self.nodes[f.node as usize];
            if self.pruning && f.lower > widen(radius(&best)) {
                // the radius never grows, so nothing left in the heap can qualify
                break;
            }
            if f.fresh {
                let ids = &self.slots[node.slot as usize].ids;
                for &id in ids {
                    best.offer(Neighbor::new(id, f.dist));
                }
                if goal.collect && f.dist <= radius(&best) {
                    found.extend(ids.iter().map(|&id| Neighbor::new(id, f.dist)));
                }
            }
            let r = widen(radius(&best));
            if self.pruning && f.dist - node.max_dist > r {
                continue;
            }
            for &c in &node.children {
                let child = &self.nodes[c as usize];
                let (dc, fresh) = if child.slot == node.slot {
                    (f.dist, false)
                } else {
                    stats.distance_evals += 1;
                    (dist(query, self.slot_coords(child.slot)), true)
                };
                if child.children.is_empty() {
                    // leaves need no frame of their own
                    if fresh && (dc <= best.bound() || (goal.collect && dc <= radius(&best))) {
                        let ids = &self.slots[child.slot as usize].ids;
                        for &id in ids {
                            best.offer(Neighbor::new(id, dc));
                        }
                        if goal.collect && dc <= radius(&best) {
                            found.extend(ids.iter().map(|&id| Neighbor::new(id, dc)));
                        }
                    }
                    continue;
                }
                let lower = dc - child.max_dist;
                if !self.pruning || lower <= r {
                    heap.push(Frame { lower, dist: dc, node: c, fresh });
                }
            }
        }
        (best, found)
    }

    /// The `min(k, len)` nearest points to `query`, ascending by `(dist, id)`.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        self.knn_with_stats(query, k, &mut SearchStats::default())
    }

    pub fn knn_with_stats(&self, query: &[f64], k: usize, stats: &mut SearchStats) -> Vec<Neighbor> {
        if k == 0 || query.len() != self.dim {
            return Vec::new();
        }
        let goal = Goal { k, lambda: 0.0, fixed: None, collect: false };
        self.traverse(query, goal, stats).0.into_vec()
    }

    /// Every point within `radius` of `query` (inclusive), ascending.
    pub fn range(&self, query: &[f64], radius: f64) -> Vec<Neighbor> {
        self.range_with_stats(query, radius, &mut SearchStats::default())
    }

    pub fn range_with_stats(&self, query: &[f64], radius: f64, stats: &mut SearchStats) -> Vec<Neighbor> {
        if query.len() != self.dim || radius.is_nan() || radius < 0.0 {
            return Vec::new();
        }
        let goal = Goal { k: 0, lambda: 0.0, fixed: Some(radius), collect: true };
        let mut found = self.traverse(query, goal, stats).1;
        sort_neighbors(&mut found);
        found
    }

    /// Single traversal returning the k nearest neighbours of `query` and
    /// every point within `d_k + lambda` of it.
    ///
    /// Candidates are gathered against the running radius `d_k + lambda`,
    /// which only shrinks as closer neighbours are found, and filtered against
    /// the final radius at the end.
    pub fn reservoir_search(&self, query: &[f64], lambda: f64, k: usize) -> Result<ReservoirResult> {
        self.reservoir_search_with_stats(query, lambda, k, &mut SearchStats::default())
    }

    pub fn reservoir_search_with_stats(
        &self,
        query: &[f64],
        lambda: f64,
        k: usize,
        stats: &mut SearchStats,
    ) -> Result<ReservoirResult> {
        check_dim(self.dim, query.len())?;
        if k == 0 {
            return Err(CoverSummError::InvalidInput("k must be at least 1".into()));
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(CoverSummError::InvalidInput(format!("lambda must be non-negative, got {lambda}")));
        }
        if self.is_empty() {
            return Err(CoverSummError::EmptyIndex);
        }
        let goal = Goal { k, lambda, fixed: None, collect: true };
        let (best, mut members) = self.traverse(query, goal, stats);
        let nearest_k = best.into_vec();
        let d_k = nearest_k.last().map_or(0.0, |n| n.dist);
        let limit = d_k + lambda;
        members.retain(|n| n.dist <= limit);
        sort_neighbors(&mut members);
        Ok(ReservoirResult { members, d_k, nearest_k })
    }
}
