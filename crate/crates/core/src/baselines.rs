//! Comparison summarizers: two exact ones that do a full query per step and
//! two approximate reservoir variants.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::engine::{Admission, CoverSumm, EngineConfig, StepRecord, Summarizer, Summary};
use crate::error::{check_dim, CoverSummError, Result};
use crate::index::{KBest, Neighbor};
use crate::sgtree::SgTree;
use crate::vectorspace::{check_finite, dist, Point, PointId, RunningCentroid};

pub const DEFAULT_RANDOM_P: f64 = 0.1;
pub const DEFAULT_DECAY_C1: f64 = 0.1;
pub const DEFAULT_DECAY_C2: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum BaselineKind {
    BruteForce,
    NaiveTree,
    RandomReservoir { p: f64 },
    DecayLambda { c1: f64, c2: f64 },
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineKind::RandomReservoir { p } if !(p > 0.0 && p <= 1.0) => {
                Err(CoverSummError::InvalidInput(format!("p must lie in (0, 1], got {p}")))
            }
            BaselineKind::DecayLambda { c1, c2 } if !(c1 > 0.0 && c2 > 0.0) => Err(
                CoverSummError::InvalidInput(format!("c1 and c2 must be positive, got {c1}, {c2}")),
            ),
            _ => Ok(()),
        }
    }

    /// Builds the summarizer. `seed` only matters for the random variant.
    pub fn build(&self, dim: usize, config: EngineConfig, seed: u64) -> Result<Box<dyn Summarizer + Send>> {
        self.validate()?;
        config.validate()?;
        Ok(match *self {
            BaselineKind::BruteForce => Box::new(BruteForce::new(dim, config.k)?),
            BaselineKind::NaiveTree => Box::new(NaiveTree::new(dim, config.k, config.gamma)?),
            BaselineKind::RandomReservoir { p } => Box::new(RandomReservoir::new(dim, config, p, seed)?),
            BaselineKind::DecayLambda { c1, c2 } => Box::new(decay_lambda(dim, config, c1, c2)?),
        })
    }
}

/// Engine whose reservoir admits arrivals by comparing the drift against
/// `c1 * exp(-c2 * t)` instead of checking their distance.
pub fn decay_lambda(dim: usize, config: EngineConfig, c1: f64, c2: f64) -> Result<CoverSumm> {
    Ok(CoverSumm::new(dim, config)?.with_admission(Admission::Decay { c1, c2 }))
}

fn check_arrival(dim: usize, last: Option<PointId>, p: &Point) -> Result<()> {
    check_dim(dim, p.dim())?;
    check_finite(&p.vec)?;
    match last {
        Some(last) if p.id <= last => Err(CoverSummError::DuplicateId { id: p.id, last }),
        _ => Ok(()),
    }
}

fn record(step: u64, summary: Summary) -> StepRecord {
    StepRecord {
        step,
        elapsed_ns: 0,
        did_reservoir_search: false,
        cumulative_rs: 0,
        reservoir_size: 0,
        drift: 0.0,
        lambda: 0.0,
        summary,
    }
}

/// Full linear scan over every live point at each step.
#[derive(Debug, Clone)]
pub struct BruteForce {
    k: usize,
    ids: Vec<PointId>,
    coords: Vec<f64>,
    centroid: RunningCentroid,
    mean: Vec<f64>,
    arrivals: u64,
    previous: Vec<PointId>,
}

impl BruteForce {
    pub fn new(dim: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(CoverSummError::InvalidInput("k must be at least 1".into()));
        }
        Ok(BruteForce {
            k,
            ids: Vec::new(),
            coords: Vec::new(),
            centroid: RunningCentroid::new(dim),
            mean: vec![0.0; dim],
            arrivals: 0,
            previous: Vec::new(),
        })
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn scan(&mut self) -> Summary {
        self.centroid.mean_into(&mut self.mean);
        let dim = self.dim();
        let mut best = KBest::new(self.k);
        for (i, &id) in self.ids.iter().enumerate() {
            best.offer(Neighbor::new(id, dist(&self.mean, &self.coords[i * dim..(i + 1) * dim])));
        }
        let summary = Summary::from_ranked(self.arrivals, best.as_slice(), &self.previous);
        self.previous = summary.member_ids.clone();
        summary
    }
}

impl Summarizer for BruteForce {
    fn name(&self) -> String {
        "brute".into()
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn step(&mut self, point: &Point) -> Result<StepRecord> {
        check_arrival(self.dim(), self.ids.last().copied(), point)?;
        self.centroid.push(&point.vec)?;
        self.ids.push(point.id);
        self.coords.extend_from_slice(&point.vec);
        self.arrivals += 1;
        let s = self.scan();
        Ok(record(self.arrivals, s))
    }

    fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary> {
        let dim = self.dim();
        let mut positions = Vec::with_capacity(ids.len());
        for &id in ids {
            // ids are stored in arrival order, hence sorted
            let pos = self.ids.binary_search(&id).map_err(|_| CoverSummError::NotFound(id))?;
            positions.push(pos);
        }
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoverSummError::InvalidInput("id listed twice".into()));
        }
        for &pos in positions.iter().rev() {
            let v: Vec<f64> = self.coords.drain(pos * dim..(pos + 1) * dim).collect();
            self.centroid.remove(&v)?;
            self.ids.remove(pos);
        }
        Ok(self.scan())
    }
}

/// Inserts into an SG-tree and runs a kNN query at every step.
#[derive(Debug, Clone)]
pub struct NaiveTree {
    k: usize,
    tree: SgTree,
    centroid: RunningCentroid,
    store: BTreeMap<PointId, Vec<f64>>,
    mean: Vec<f64>,
    last_id: Option<PointId>,
    arrivals: u64,
    queries: u64,
    previous: Vec<PointId>,
}

impl NaiveTree {
    pub fn new(dim: usize, k: usize, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(CoverSummError::InvalidInput("k must be at least 1".into()));
        }
        Ok(NaiveTree {
            k,
            tree: SgTree::with_base(dim, gamma)?,
            centroid: RunningCentroid::new(dim),
            store: BTreeMap::new(),
            mean: vec![0.0; dim],
            last_id: None,
            arrivals: 0,
            queries: 0,
            previous: Vec::new(),
        })
    }

    /// Number of tree queries issued so far (one per step or deletion batch).
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn tree(&self) -> &SgTree {
        &self.tree
    }

    fn query(&mut self) -> Summary {
        self.centroid.mean_into(&mut self.mean);
        self.queries += 1;
        let nn = self.tree.knn(&self.mean, self.k);
        let summary = Summary::from_ranked(self.arrivals, &nn, &self.previous);
        self.previous = summary.member_ids.clone();
        summary
    }
}

impl Summarizer for NaiveTree {
    fn name(&self) -> String {
        "naive-tree".into()
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn step(&mut self, point: &Point) -> Result<StepRecord> {
        check_arrival(self.mean.len(), self.last_id, point)?;
        self.tree.insert(point.id, &point.vec)?;
        self.centroid.push(&point.vec)?;
        self.store.insert(point.id, point.vec.clone());
        self.last_id = Some(point.id);
        self.arrivals += 1;
        let s = self.query();
        Ok(record(self.arrivals, s))
    }

    fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary> {
        if let Some(&id) = ids.iter().find(|id| !self.store.contains_key(id)) {
            return Err(CoverSummError::NotFound(id));
        }
        for &id in ids {
            let v = self
                .store
                .remove(&id)
                .ok_or_else(|| CoverSummError::InvalidInput(format!("point {id} listed twice")))?;
            self.centroid.remove(&v)?;
            self.tree.remove(id)?;
        }
        Ok(self.query())
    }
}

/// Admits each arrival to the reservoir with probability `p`. The tree is
/// consulted only when the reservoir drops below k points or fills up, and
/// then refills it with the k nearest points to the current mean.
#[derive(Debug, Clone)]
pub struct RandomReservoir {
    config: EngineConfig,
    p: f64,
    rng: Xoshiro256PlusPlus,
    tree: SgTree,
    centroid: RunningCentroid,
    store: BTreeMap<PointId, Vec<f64>>,
    reservoir: Vec<PointId>,
    mean: Vec<f64>,
    last_id: Option<PointId>,
    arrivals: u64,
    n_rs: u64,
    previous: Vec<PointId>,
}

impl RandomReservoir {
    pub fn new(dim: usize, config: EngineConfig, p: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        BaselineKind::RandomReservoir { p }.validate()?;
        Ok(RandomReservoir {
            config,
            p,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            tree: SgTree::with_base(dim, config.gamma)?,
            centroid: RunningCentroid::new(dim),
            store: BTreeMap::new(),
            reservoir: Vec::new(),
            mean: vec![0.0; dim],
            last_id: None,
            arrivals: 0,
            n_rs: 0,
            previous: Vec::new(),
        })
    }


    fn refill(&mut self) -> Result<()> {
        self.reservoir.clear();
        if self.tree.is_empty() {
            return Ok(());
        }
        let nearest = self.tree.knn(&self.mean, self.config.k);
        self.reservoir.extend(nearest.iter().map(|n| n.id));
        self.n_rs += 1;
        Ok(())
    }

    fn answer(&mut self) -> Summary {
        let mut best = KBest::new(self.config.k);
        for id in &self.reservoir {
            best.offer(Neighbor::new(*id, dist(&self.mean, &self.store[id])));
        }
        let summary = Summary::from_ranked(self.arrivals, best.as_slice(), &self.previous);
        self.previous = summary.member_ids.clone();
        summary
    }

    fn maybe_refill(&mut self) -> Result<bool> {
        let n = self.reservoir.len();
        if n < self.config.k || n >= self.config.c_max {
            self.refill()?;
            return Ok(true);
        }
        Ok(false)
    }
}

impl Summarizer for RandomReservoir {
    fn name(&self) -> String {
        "random".into()
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn step(&mut self, point: &Point) -> Result<StepRecord> {
        check_arrival(self.mean.len(), self.last_id, point)?;
        self.tree.insert(point.id, &point.vec)?;
        self.centroid.push(&point.vec)?;
        self.store.insert(point.id, point.vec.clone());
        self.last_id = Some(point.id);
        self.arrivals += 1;
        self.centroid.mean_into(&mut self.mean);
        if self.rng.gen_bool(self.p) {
            self.reservoir.push(point.id);
        }
        let rebuilt = self.maybe_refill()?;
        let summary = self.answer();
        Ok(StepRecord {
            did_reservoir_search: rebuilt,
            cumulative_rs: self.n_rs,
            reservoir_size: self.reservoir.len(),
            ..record(self.arrivals, summary)
        })
    }

    fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary> {
        if let Some(&id) = ids.iter().find(|id| !self.store.contains_key(id)) {
            return Err(CoverSummError::NotFound(id));
        }
        for &id in ids {
            let v = self
                .store
                .remove(&id)
                .ok_or_else(|| CoverSummError::InvalidInput(format!("point {id} listed twice")))?;
            self.centroid.remove(&v)?;
            self.tree.remove(id)?;
        }
        self.reservoir.retain(|id| self.store.contains_key(id));
        self.centroid.mean_into(&mut self.mean);
        self.maybe_refill()?;
        Ok(self.answer())
    }

    fn reservoir_searches(&self) -> u64 {
        self.n_rs
    }
}
