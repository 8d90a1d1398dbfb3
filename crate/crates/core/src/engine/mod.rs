//! The incremental summarizer.
//!
//! Every arrival is pushed into the running centroid and the index. The
//! summary (the k points nearest the centroid) is read from a small
//! reservoir of candidates gathered around the centroid of the last index
//! query. The reservoir is rebuilt from the index when the centroid has
//! drifted by at least half the concentration slack λ, when it reaches its
//! capacity, or when it can no longer certify that it holds the true
//! neighbours (which only happens after deletions or in floating-point
//! corner cases).

mod reservoir;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use reservoir::{Reservoir, ReservoirEntry};

use crate::error::{check_dim, CoverSummError, Result};
use crate::index::{KBest, Neighbor, NeighborIndex};
use crate::sgtree::SgTree;
use crate::vectorspace::{check_finite, dist, BoundParams, DeltaSchedule, Point, PointId, RunningCentroid};

/// Default reservoir slack multiplier α, chosen so that on uniform data the
/// reservoir stays well below its capacity while rebuilds remain rare.
pub const DEFAULT_ALPHA: f64 = 0.003;
pub const DEFAULT_K: usize = 20;
/// Reservoir capacity as a multiple of k.
pub const DEFAULT_CAPACITY_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Single-traversal reservoir search on every rebuild.
    Reservoir,
    /// Separate kNN and range queries on every rebuild.
    KnnPlusRange,
    /// Like `Reservoir`, but index insertions are buffered until a rebuild.
    LazyReservoir,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Reservoir => "coversumm-reservoir",
            Variant::KnnPlusRange => "coversumm-knn-range",
            Variant::LazyReservoir => "coversumm-lazy",
        }
    }
}

/// Where the support width `b` of the bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportWidth {
    /// Twice the largest absolute coordinate seen so far.
    Running,
    Fixed(f64),
}

/// Which arrivals join the reservoir between rebuilds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    /// Points within the reservoir radius of the last query centroid (exact).
    Radius,
    /// Every point while the drift is at most `c1 * exp(-c2 * t)`, none
    /// after. The threshold ignores the data, so summaries are approximate.
    Decay { c1: f64, c2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k: usize,
    pub alpha: f64,
    pub c_max: usize,
    pub variant: Variant,
    pub gamma: f64,
    pub support: SupportWidth,
    pub delta: DeltaSchedule,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::with_k(DEFAULT_K)
    }
}

impl EngineConfig {
    /// Defaults for a given summary budget; capacity scales with k.
    pub fn with_k(k: usize) -> Self {
        EngineConfig {
            k,
            alpha: DEFAULT_ALPHA,
            c_max: DEFAULT_CAPACITY_FACTOR * k,
            variant: Variant::LazyReservoir,
            gamma: crate::sgtree::DEFAULT_BASE,
            support: SupportWidth::Running,
            delta: DeltaSchedule::InverseT,
        }
    }

    pub fn variant(mut self, v: Variant) -> Self {
        self.variant = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CoverSummError::InvalidInput("k must be at least 1".into()));
        }
        if self.c_max <= self.k {
            return Err(CoverSummError::InvalidInput(format!(
                "reservoir capacity {} must exceed k = {}",
                self.c_max, self.k
            )));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(CoverSummError::InvalidInput(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if let SupportWidth::Fixed(b) = self.support {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CoverSummError::InvalidInput(format!("support width must be positive, got {b}")));
            }
        }
        // alpha and delta are validated by BoundParams
        BoundParams::with_schedule(self.alpha, 1, 1.0, self.delta)?;
        Ok(())
    }
}

/// The k points nearest the centroid after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub step: u64,
    pub member_ids: Vec<PointId>,
    pub distances: Vec<f64>,
    /// Whether `member_ids` differs (as an ordered list) from the previous step.
    pub changed: bool,
}

impl Summary {
    pub fn empty(step: u64, changed: bool) -> Self {
        Summary { step, member_ids: Vec::new(), distances: Vec::new(), changed }
    }

    pub(crate) fn from_ranked(step: u64, ranked: &[Neighbor], previous: &[PointId]) -> Self {
        let member_ids: Vec<PointId> = ranked.iter().map(|n| n.id).collect();
        let changed = member_ids != previous;
        Summary { step, distances: ranked.iter().map(|n| n.dist).collect(), member_ids, changed }
    }
}

/// Per-step measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Wall time of the step in nanoseconds; filled in by whoever times the call.
    pub elapsed_ns: u64,
    pub did_reservoir_search: bool,
    pub cumulative_rs: u64,
    pub reservoir_size: usize,
    pub drift: f64,
    pub lambda: f64,
    pub summary: Summary,
}

/// Common interface of the engine and the baselines.
pub trait Summarizer {
    fn name(&self) -> String;

    /// Whether every summary is guaranteed to equal the brute-force answer.
    fn is_exact(&self) -> bool;

    fn step(&mut self, point: &Point) -> Result<StepRecord>;

    fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary>;

    fn reservoir_searches(&self) -> u64 {
        0
    }
}

/// Incremental summarizer backed by a nearest-neighbour index.
#[derive(Debug, Clone)]
pub struct CoverSumm<I = SgTree> {
    config: EngineConfig,
    params: BoundParams,
    admission: Admission,
    certify: bool,
    index: I,
    centroid: RunningCentroid,
    store: BTreeMap<PointId, Vec<f64>>,
    pending: Vec<PointId>,
    reservoir: Reservoir,
    lambda: f64,
    last_id: Option<PointId>,
    arrivals: u64,
    n_rs: u64,
    fallback_rs: u64,
    fallback_flag: bool,
    needs_rebuild: bool,
    previous: Vec<PointId>,
    mean: Vec<f64>,
}

impl CoverSumm<SgTree> {
    pub fn new(dim: usize, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let tree = SgTree::with_base(dim, config.gamma)?;
        Self::with_index(config, tree)
    }
}

impl<I: NeighborIndex> CoverSumm<I> {
    /// Builds an engine over a caller-supplied (empty) index.
    pub fn with_index(config: EngineConfig, index: I) -> Result<Self> {
        config.validate()?;
        if !index.is_empty() {
            return Err(CoverSummError::InvalidInput("index must start empty".into()));
        }
        let dim = index.dim();
        let b = match config.support {
            SupportWidth::Fixed(b) => b,
            SupportWidth::Running => 1.0,
        };
        let params = BoundParams::with_schedule(config.alpha, dim, b, config.delta)?;
        Ok(CoverSumm {
            config,
            params,
            admission: Admission::Radius,
            certify: true,
            index,
            centroid: RunningCentroid::new(dim),
            store: BTreeMap::new(),
            pending: Vec::new(),
            reservoir: Reservoir::new(config.c_max),
            lambda: 0.0,
            last_id: None,
            arrivals: 0,
            n_rs: 0,
            fallback_rs: 0,
            fallback_flag: false,
            needs_rebuild: true,
            previous: Vec::new(),
            mean: vec![0.0; dim],
        })
    }

    /// Replaces the admission rule. Anything but [`Admission::Radius`] gives
    /// up exactness, so it also switches off the reservoir certificate.
    pub fn with_admission(mut self, admission: Admission) -> Self {
        self.admission = admission;
        self.certify = matches!(admission, Admission::Radius);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn index(&self) -> &I {
        &self.index
    }

    pub fn centroid(&self) -> &RunningCentroid {
        &self.centroid
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    /// λ from the most recent rebuild.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn live_points(&self) -> usize {
        self.store.len()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Rebuilds forced by a failed reservoir certificate rather than by the
    /// drift or capacity conditions. Included in `reservoir_searches`.
    pub fn fallback_rebuilds(&self) -> u64 {
        self.fallback_rs
    }

    /// The support width the next rebuild would use.
    pub fn support_width(&self) -> f64 {
        match self.config.support {
            SupportWidth::Fixed(b) => b,
            SupportWidth::Running => self.centroid.support_width(),
        }
    }

    /// Processes one arrival.
    pub fn step(&mut self, point: &Point) -> Result<StepRecord> {
        check_dim(self.dim(), point.dim())?;
        check_finite(&point.vec)?;
        if let Some(last) = self.last_id {
            if point.id <= last {
                return Err(CoverSummError::DuplicateId { id: point.id, last });
            }
        }
        match self.config.variant {
            Variant::LazyReservoir => self.pending.push(point.id),
            _ => self.index.insert(point.id, &point.vec)?,
        }
        self.centroid.push(&point.vec)?;
        self.store.insert(point.id, point.vec.clone());
        self.last_id = Some(point.id);
        self.arrivals += 1;
        self.centroid.mean_into(&mut self.mean);

        let drift = self.current_drift();
        let rebuild = self.needs_rebuild
            || self.reservoir.len() >= self.config.c_max
            || drift >= self.lambda / 2.0;

        if rebuild {
            self.rebuild()?;
        } else if let Some(last_query) = self.centroid.last_query() {
            let d = dist(last_query, &point.vec);
            let admit = match self.admission {
                Admission::Radius => d <= self.reservoir.radius(),
                Admission::Decay { c1, c2 } => drift <= c1 * (-c2 * self.arrivals as f64).exp(),
            };
            if admit {
                self.reservoir.admit(ReservoirEntry { id: point.id, dist: d, vec: point.vec.clone() });
            }
        }

        let ranked = self.answer(rebuild, drift)?;
        let summary = Summary::from_ranked(self.arrivals, &ranked, &self.previous);
        self.previous = summary.member_ids.clone();
        Ok(StepRecord {
            step: self.arrivals,
            elapsed_ns: 0,
            did_reservoir_search: rebuild || self.fallback_flag,
            cumulative_rs: self.n_rs,
            reservoir_size: self.reservoir.len(),
            drift,
            lambda: self.lambda,
            summary,
        })
    }

    fn current_drift(&self) -> f64 {
        self.centroid
            .last_query()
            .map_or(f64::INFINITY, |q| dist(&self.mean, q))
    }

    /// Ranks the reservoir against the current centroid, rebuilding first if
    /// the reservoir cannot prove it holds the true neighbours.
    fn answer(&mut self, rebuilt: bool, drift: f64) -> Result<Vec<Neighbor>> {
        self.fallback_flag = false;
        let want = self.config.k.min(self.store.len());
        if rebuilt || self.reservoir.len() >= want {
            let ranked = self.rank_reservoir()?;
            if rebuilt || !self.certify || self.certified(&ranked, drift) {
                return Ok(ranked);
            }
        }
        self.rebuild()?;
        self.fallback_rs += 1;
        self.fallback_flag = true;
        self.rank_reservoir()
    }

    /// True when every live point outside the reservoir is provably farther
    /// from the centroid than the k-th ranked reservoir member.
    fn certified(&self, ranked: &[Neighbor], drift: f64) -> bool {
        let want = self.config.k.min(self.store.len());
        if ranked.len() < want {
            return false;
        }
        let radius = self.reservoir.radius();
        if radius.is_infinite() {
            // the last rebuild saw fewer than k points, so every point since
            // has been admitted
            return true;
        }
        let kth = ranked.last().map_or(0.0, |n| n.dist);
        kth + drift + 1e-9 * (1.0 + radius) <= radius
    }

    fn rank_reservoir(&self) -> Result<Vec<Neighbor>> {
        let want = self.config.k.min(self.store.len());
        if self.reservoir.len() < want {
            return Err(CoverSummError::Internal(format!(
                "reservoir holds {} points but {} are needed",
                self.reservoir.len(),
                want
            )));
        }
        let mut best = KBest::new(self.config.k);
        for e in self.reservoir.entries() {
            best.offer(Neighbor::new(e.id, dist(&self.mean, &e.vec)));
        }
        Ok(best.into_vec())
    }

    /// The current summary computed from the reservoir, without changing state.
    pub fn summary_from_reservoir(&self) -> Result<Summary> {
        let ranked = self.rank_reservoir()?;
        Ok(Summary::from_ranked(self.arrivals, &ranked, &self.previous))
    }

    /// Inserts every buffered arrival into the index.
    pub fn flush_pending(&mut self) -> Result<()> {
        for id in std::mem::take(&mut self.pending) {
            let v = self.store.get(&id).expect("pending ids are live");
            self.index.insert(id, v)?;
        }
        Ok(())
    }

    fn rebuild(&mut self) -> Result<()> {
        self.flush_pending()?;
        self.reservoir.clear();
        self.needs_rebuild = false;
        let n = self.store.len() as u64;
        if n == 0 {
            self.needs_rebuild = true;
            return Ok(());
        }
        let b = self.support_width();
        self.lambda = self.params.with_support_width(b).lambda_threshold(n);
        let k = self.config.k;
        let (members, nearest_len, d_k) = match self.config.variant {
            Variant::KnnPlusRange => {
                let nearest = self.index.knn(&self.mean, k);
                let d_k = nearest.last().map_or(0.0, |x| x.dist);
                (self.index.range(&self.mean, d_k + self.lambda), nearest.len(), d_k)
            }
            Variant::Reservoir | Variant::LazyReservoir => {
                let r = self.index.reservoir_search(&self.mean, self.lambda, k)?;
                (r.members, r.nearest_k.len(), r.d_k)
            }
        };
        for m in members {
            let vec = self.store.get(&m.id).expect("indexed ids are live").clone();
            self.reservoir.admit(ReservoirEntry { id: m.id, dist: m.dist, vec });
        }
        let radius = if nearest_len < k { f64::INFINITY } else { d_k + self.lambda };
        self.reservoir.set_radius(radius);
        self.centroid.set_last_query(self.mean.clone());
        self.n_rs += 1;
        Ok(())
    }

    /// Removes a batch of live points and returns the updated summary.
    pub fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary> {
        let mut seen = HashSet::with_capacity(ids.len());
        for &id in ids {
            if !self.store.contains_key(&id) {
                return Err(CoverSummError::NotFound(id));
            }
            if !seen.insert(id) {
                return Err(CoverSummError::InvalidInput(format!("point {id} listed twice")));
            }
        }
        let bulk = ids.len() * 2 > self.store.len();
        let pending: HashSet<PointId> = self.pending.iter().copied().collect();
        for &id in ids {
            let v = self.store.remove(&id).expect("checked above");
            if !bulk {
                self.centroid.remove(&v)?;
            }
            if !pending.contains(&id) {
                self.index.remove(id)?;
            }
        }
        if bulk {
            // large batches: resum the survivors rather than subtracting
            self.centroid.recompute(self.store.values().map(|v| v.as_slice()))?;
        }
        self.pending.retain(|id| !seen.contains(id));
        self.reservoir.retain(|e| !seen.contains(&e.id));
        self.centroid.mean_into(&mut self.mean);

        if self.store.is_empty() {
            self.reservoir.clear();
            self.needs_rebuild = true;
            let summary = Summary::empty(self.arrivals, !self.previous.is_empty());
            self.previous.clear();
            return Ok(summary);
        }

        let drift = self.current_drift();
        let rebuild = self.needs_rebuild
            || drift > self.lambda / 2.0
            || self.reservoir.len() < self.config.k;
        if rebuild {
            self.rebuild()?;
        }
        let ranked = self.answer(rebuild, drift)?;
        let summary = Summary::from_ranked(self.arrivals, &ranked, &self.previous);
        self.previous = summary.member_ids.clone();
        Ok(summary)
    }
}

impl<I: NeighborIndex> Summarizer for CoverSumm<I> {
    fn name(&self) -> String {
        match self.admission {
            Admission::Radius => self.config.variant.name().to_string(),
            Admission::Decay { .. } => "decay".to_string(),
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self.admission, Admission::Radius)
    }

    fn step(&mut self, point: &Point) -> Result<StepRecord> {
        CoverSumm::step(self, point)
    }

    fn delete_batch(&mut self, ids: &[PointId]) -> Result<Summary> {
        CoverSumm::delete_batch(self, ids)
    }

    fn reservoir_searches(&self) -> u64 {
        self.n_rs
    }
}

#[cfg(test)]
mod tests;
