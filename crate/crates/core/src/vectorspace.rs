//! Dense-vector primitives: points, the Euclidean metric, the exact streaming
//! centroid and the concentration-bound thresholds that drive reservoir
//! rebuilds.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CoverSummError, Result};

/// Arrival-ordered identifier of a point. The first point of a stream is 1.
pub type PointId = u64;

/// A streamed vector, optionally carrying the sentence it was embedded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: PointId,
    pub vec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Point {
    pub fn new(id: PointId, vec: Vec<f64>) -> Self {
        Point { id, vec, text: None }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }
}

/// Squared Euclidean distance without a dimension check.
///
/// Four independent accumulators are summed in a fixed order, so the result
/// is bit-for-bit reproducible for a given pair of inputs.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Euclidean distance without a dimension check. Every distance the crate
/// compares goes through this function so ties resolve identically everywhere.
#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Euclidean distance between two vectors of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(dist(a, b))
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CoverSummError::InvalidInput(
            "vector contains a non-finite coordinate".into(),
        ))
    }
}

/// Exact streaming mean of a point stream.
///
/// Keeps the left-to-right running sum rather than the mean itself, so the
/// mean after `t` pushes is bit-identical to summing the same vectors in
/// arrival order and dividing by `t`.
#[derive(Debug, Clone)]
pub struct RunningCentroid {
    sum: Vec<f64>,
    count: u64,
    last_query: Option<Vec<f64>>,
    max_abs: f64,
}

impl RunningCentroid {
    pub fn new(dim: usize) -> Self {
        RunningCentroid {
            sum: vec![0.0; dim],
            count: 0,
            last_query: None,
            max_abs: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += v;
            self.max_abs = self.max_abs.max(v.abs());
        }
        self.count += 1;
        Ok(())
    }

    /// Removes one previously pushed vector from the running sum.
    pub fn remove(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if self.count == 0 {
            return Err(CoverSummError::InvalidInput(
                "cannot remove from an empty centroid".into(),
            ));
        }
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s -= v;
        }
        self.count -= 1;
        if self.count == 0 {
            self.sum.iter_mut().for_each(|s| *s = 0.0);
        }
        Ok(())
    }

    /// Replaces the running sum with a fresh left-to-right sum of `points`.
    /// The support-width estimate is kept (it only ever grows).
    pub fn recompute<'a>(&mut self, points: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let mut sum = vec![0.0; self.dim()];
        let mut count = 0;
        for p in points {
            check_dim(sum.len(), p.len())?;
            for (s, v) in sum.iter_mut().zip(p) {
                *s += v;
            }
            count += 1;
        }
        self.sum = sum;
        self.count = count;
        Ok(())
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Current mean; the zero vector when no points are held.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mean_into(&mut out);
        out
    }

    pub fn mean_into(&self, out: &mut [f64]) {
        if self.count == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let n = self.count as f64;
        for (o, s) in out.iter_mut().zip(&self.sum) {
            *o = s / n;
        }
    }

    pub fn last_query(&self) -> Option<&[f64]> {
        self.last_query.as_deref()
    }

    /// Records the current mean as the centroid of the latest reservoir search.
    pub fn mark_query(&mut self) {
        self.last_query = Some(self.mean());
    }

    pub fn set_last_query(&mut self, q: Vec<f64>) {
        self.last_query = Some(q);
    }

    /// Distance between the current mean and the last-query centroid, or
    /// `None` before the first query.
    pub fn drift(&self) -> Option<f64> {
        self.last_query.as_ref().map(|q| dist(&self.mean(), q))
    }

    /// Side length `b` of the smallest origin-centred box seen so far.
    pub fn support_width(&self) -> f64 {
        2.0 * self.max_abs
    }
}

/// How the confidence level δ is derived from the number of points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// δ = 1/t.
    #[default]
    InverseT,
    /// A fixed δ in (0, 1].
    Constant(f64),
}


impl DeltaSchedule {
    pub fn delta(&self, t: u64) -> f64 {
        match *self {
            DeltaSchedule::InverseT => 1.0 / t.max(1) as f64,
            DeltaSchedule::Constant(d) => d,
        }
    }
}

/// Parameters of the centroid concentration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub dim: usize,
    pub support_width: f64,
    #[serde(default)]
    pub delta_schedule: DeltaSchedule,
}

impl BoundParams {
    pub fn new(alpha: f64, dim: usize, support_width: f64) -> Result<Self> {
        Self::with_schedule(alpha, dim, support_width, DeltaSchedule::InverseT)
    }

    pub fn with_schedule(
        alpha: f64,
        dim: usize,
        support_width: f64,
        delta_schedule: DeltaSchedule,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CoverSummError::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        if dim == 0 {
            return Err(CoverSummError::InvalidInput("dim must be at least 1".into()));
        }
        if !(support_width > 0.0 && support_width.is_finite()) {
            return Err(CoverSummError::InvalidInput(format!(
                "support width must be positive, got {support_width}"
            )));
        }
        if let DeltaSchedule::Constant(d) = delta_schedule {
            if !(d > 0.0 && d <= 1.0) {
                return Err(CoverSummError::InvalidInput(format!("delta must lie in (0, 1], got {d}")));
            }
        }
        Ok(BoundParams { alpha, dim, support_width, delta_schedule })
    }

    /// Same parameters with a different support width. Non-positive widths
    /// (an all-zero stream) are clamped to the smallest positive float.
    pub fn with_support_width(mut self, b: f64) -> Self {
        self.support_width = if b > 0.0 { b } else { f64::MIN_POSITIVE };
        self
    }

    pub fn delta(&self, t: u64) -> f64 {
        self.delta_schedule.delta(t)
    }

    fn log_term(&self, t: u64) -> f64 {
        (2.0 / self.delta(t)).ln()
    }

    /// Reservoir slack λ = sqrt(2·α·D·b²·ln(2/δ) / t).
    pub fn lambda_threshold(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        let b2 = self.support_width * self.support_width;
        (2.0 * self.alpha * self.dim as f64 * b2 * self.log_term(t as u64) / t).sqrt()
    }

    /// Distance slack between the sample mean and the true mean,
    /// sqrt(D·b²·ln(2/δ) / (2t)).
    pub fn centroid_bound(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        let b2 = self.support_width * self.support_width;
        (self.dim as f64 * b2 * self.log_term(t as u64) / (2.0 * t)).sqrt()
    }
}
