//! Nearest-neighbour index abstraction shared by the SG-tree and the linear
//! scan index, so alternative backends can be slotted under the engine.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CoverSummError, Result};
use crate::vectorspace::{check_finite, dist, PointId};

/// A point id paired with its distance to some query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: PointId,
    pub dist: f64,
}

impl Neighbor {
    pub fn new(id: PointId, dist: f64) -> Self {
        Neighbor { id, dist }
    }

    /// Total order by ascending `(distance, id)`, the tie rule used everywhere.
    #[inline]
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

/// Output of a reservoir search around a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirResult {
    /// Every point within `d_k + λ` of the query, ascending by `(dist, id)`.
    pub members: Vec<Neighbor>,
    /// Distance to the k-th nearest neighbour (the farthest point when the
    /// index holds fewer than k).
    pub d_k: f64,
    /// The k nearest neighbours, ascending.
    pub nearest_k: Vec<Neighbor>,
}

/// Node-visit and distance-evaluation counters for a single query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_visited: u64,
    pub distance_evals: u64,
}

/// Operations the summarization engine needs from a nearest-neighbour index.
pub trait NeighborIndex {
    fn dim(&self) -> usize;

    /// Number of live points, counting duplicates.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&mut self, id: PointId, vec: &[f64]) -> Result<()>;

    fn remove(&mut self, id: PointId) -> Result<()>;

    /// The `min(k, len)` nearest points, ascending by `(dist, id)`.
    fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor>;

    /// All points within `radius` (inclusive), ascending by `(dist, id)`.
    fn range(&self, query: &[f64], radius: f64) -> Vec<Neighbor>;

    /// The k nearest neighbours together with every point within `d_k + λ`.
    fn reservoir_search(&self, query: &[f64], lambda: f64, k: usize) -> Result<ReservoirResult>;
}

/// Keeps the k best neighbours seen so far in ascending `(dist, id)` order.
#[derive(Debug, Clone)]
pub(crate) struct KBest {
    k: usize,
    items: Vec<Neighbor>,
}

impl KBest {
    pub(crate) fn new(k: usize) -> Self {
        KBest { k, items: Vec::with_capacity(k.min(1024) + 1) }
    }

    pub(crate) fn is_full(&self) -> bool {
        self.items.len() >= self.k
    }

    /// Current k-th distance, infinite until k candidates have been seen.
    #[inline]
    pub(crate) fn bound(&self) -> f64 {
        if self.is_full() {
            self.items.last().map_or(f64::INFINITY, |n| n.dist)
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, n: Neighbor) {
        if self.k == 0 {
            return;
        }
        if self.is_full() {
            let last = self.items.last().expect("full list is non-empty");
            if n.cmp_rank(last) != Ordering::Less {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|x| x.cmp_rank(&n) == Ordering::Less);
        self.items.insert(pos, n);
        if self.items.len() > self.k {
            self.items.pop();
        }
    }

    pub(crate) fn into_vec(self) -> Vec<Neighbor> {
        self.items
    }

    pub(crate) fn as_slice(&self) -> &[Neighbor] {
        &self.items
    }
}

pub(crate) fn sort_neighbors(v: &mut [Neighbor]) {
    v.sort_unstable_by(Neighbor::cmp_rank);
}

/// Index that answers every query with a full scan. Useful as a reference
/// backend and for small streams.
#[derive(Debug, Clone)]
pub struct LinearIndex {
    dim: usize,
    ids: Vec<PointId>,
    coords: Vec<f64>,
    position: HashMap<PointId, usize>,
}

impl LinearIndex {
    pub fn new(dim: usize) -> Self {
        LinearIndex { dim, ids: Vec::new(), coords: Vec::new(), position: HashMap::new() }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn scan(&self, query: &[f64]) -> impl Iterator<Item = Neighbor> + '_ {
        let q = query.to_vec();
        (0..self.ids.len()).map(move |i| Neighbor::new(self.ids[i], dist(&q, self.row(i))))
    }
}

impl NeighborIndex for LinearIndex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn insert(&mut self, id: PointId, vec: &[f64]) -> Result<()> {
        check_dim(self.dim, vec.len())?;
        check_finite(vec)?;
        if self.position.contains_key(&id) {
            return Err(CoverSummError::InvalidInput(format!("point {id} already indexed")));
        }
        self.position.insert(id, self.ids.len());
        self.ids.push(id);
        self.coords.extend_from_slice(vec);
        Ok(())
    }

    fn remove(&mut self, id: PointId) -> Result<()> {
        let i = self.position.remove(&id).ok_or(CoverSummError::NotFound(id))?;
        let last = self.ids.len() - 1;
        if i != last {
            let moved = self.ids[last];
            self.ids.swap(i, last);
            let (head, tail) = self.coords.split_at_mut(last * self.dim);
            head[i * self.dim..(i + 1) * self.dim].copy_from_slice(&tail[..self.dim]);
            self.position.insert(moved, i);
        }
        self.ids.pop();
        self.coords.truncate(last * self.dim);
        Ok(())
    }

    fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let mut best = KBest::new(k);
        self.scan(query).for_each(|n| best.offer(n));
        best.into_vec()
    }

    fn range(&self, query: &[f64], radius: f64) -> Vec<Neighbor> {
        let mut out: Vec<Neighbor> = self.scan(query).filter(|n| n.dist <= radius).collect();
        sort_neighbors(&mut out);
        out
    }

    fn reservoir_search(&self, query: &[f64], lambda: f64, k: usize) -> Result<ReservoirResult> {
        if self.is_empty() {
            return Err(CoverSummError::EmptyIndex);
        }
        let nearest_k = self.knn(query, k);
        let d_k = nearest_k.last().map_or(0.0, |n| n.dist);
        let members = self.range(query, d_k + lambda);
        Ok(ReservoirResult { members, d_k, nearest_k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kbest_keeps_smallest_with_id_ties() {
        let mut b = KBest::new(2);
        assert_eq!(b.bound(), f64::INFINITY);
        b.offer(Neighbor::new(5, 1.0));
        b.offer(Neighbor::new(3, 2.0));
        b.offer(Neighbor::new(1, 2.0));
        assert_eq!(b.as_slice(), &[Neighbor::new(5, 1.0), Neighbor::new(1, 2.0)]);
        assert_eq!(b.bound(), 2.0);
        b.offer(Neighbor::new(9, 2.0));
        assert_eq!(b.as_slice()[1].id, 1);
    }

    #[test]
    fn linear_index_basics() {
        let mut idx = LinearIndex::new(1);
        for (id, x) in [(1, 0.0), (2, 1.0), (3, 2.0), (4, 5.0)] {
            idx.insert(id, &[x]).unwrap();
        }
        let r = idx.reservoir_search(&[0.0], 1.0, 2).unwrap();
        assert_eq!(r.d_k, 1.0);
        assert_eq!(r.members.iter().map(|n| n.id).collect::<Vec<_>>(), vec![1, 2, 3]);
        idx.remove(2).unwrap();
        assert_eq!(idx.knn(&[1.1], 1)[0].id, 3);
        assert!(matches!(idx.remove(2), Err(CoverSummError::NotFound(2))));
    }
}
