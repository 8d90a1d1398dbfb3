use serde::{Deserialize, Serialize};

use crate::vectorspace::PointId;

/// A candidate held in the reservoir. `dist` is measured to the centroid of
/// the last index query, at the time the point was admitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirEntry {
    pub id: PointId,
    pub dist: f64,
    pub vec: Vec<f64>,
}

/// Candidate set for the summary between rebuilds.
///
/// Holds every live point within `radius` of the last query centroid. The
/// radius is infinite when the last rebuild saw fewer than k points.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    entries: Vec<ReservoirEntry>,
    radius: f64,
    capacity: usize,
}

impl Reservoir {
    pub fn new(capacity: usize) -> Self {
        Reservoir { entries: Vec::new(), radius: f64::INFINITY, capacity }
    }

    pub fn entries(&self) -> &[ReservoirEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub(crate) fn set_radius(&mut self, r: f64) {
        self.radius = r;
    }

    pub(crate) fn admit(&mut self, e: ReservoirEntry) {
        self.entries.push(e);
    }

    pub(crate) fn clear(&mut self) {
        self.entries.clear();
        self.radius = f64::INFINITY;
    }

    pub(crate) fn retain(&mut self, keep: impl FnMut(&ReservoirEntry) -> bool) {
        self.entries.retain(keep);
    }
}
