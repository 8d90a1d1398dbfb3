//! Brute-force ground truth and scoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoverSummError, Result};
use crate::index::{Neighbor, KBest};
use crate::vectorspace::{dist, BoundParams, Point, PointId};

/// The `k` nearest points to `q` by full scan, ascending by `(distance, id)`.
pub fn oracle_knn(points: &[Point], q: &[f64], k: usize) -> Vec<PointId> {
    oracle_neighbors(points.iter().map(|p| (p.id, p.vec.as_slice())), q, k)
        .into_iter()
        .map(|n| n.id)
        .collect()
}

/// Like [`oracle_knn`] but over borrowed `(id, vector)` pairs, keeping distances.
pub fn oracle_neighbors<'a>(
    points: impl IntoIterator<Item = (PointId, &'a [f64])>,
    q: &[f64],
    k: usize,
) -> Vec<Neighbor> {
    let mut best = KBest::new(k);
    for (id, v) in points {
        best.offer(Neighbor::new(id, dist(q, v)));
    }
    best.into_vec()
}

/// Mean of a point set, summed left to right in input order.
pub fn mean_of(points: &[Point]) -> Vec<f64> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let mut sum = vec![0.0; first.dim()];
    for p in points {
        for (s, x) in sum.iter_mut().zip(&p.vec) {
            *s += x;
        }
    }
    let n = points.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}

/// Per-step ground-truth summaries for an insert-only stream: at step `t`
/// the `k` nearest of the first `t` points to their mean. Steps are scored
/// in parallel.
pub fn oracle_summaries(points: &[Point], k: usize) -> Vec<Vec<PointId>> {
    if points.is_empty() {
        return Vec::new();
    }
    prefix_means(points)
        .par_iter()
        .enumerate()
        .map(|(t, mean)| oracle_knn(&points[..=t], mean, k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub steps_total: usize,
    pub steps_exact: usize,
    pub accuracy_pct: f64,
    pub first_mismatch_step: Option<u64>,
}

/// Scores candidate summaries against ground truth. A step is exact only if
/// the ordered id lists are identical. Steps are reported 1-based.
pub fn nn_accuracy(candidate: &[Vec<PointId>], truth: &[Vec<PointId>]) -> Result<AccuracyReport> {
    if candidate.len() != truth.len() {
        return Err(CoverSummError::InvalidInput(format!(
            "candidate has {} steps, truth has {}",
            candidate.len(),
            truth.len()
        )));
    }
    let mut exact = 0;
    let mut first = None;
    for (i, (c, t)) in candidate.iter().zip(truth).enumerate() {
        if c == t {
            exact += 1;
        } else if first.is_none() {
            first = Some(i as u64 + 1);
        }
    }
    let total = truth.len();
    let pct = if total == 0 { 100.0 } else { 100.0 * exact as f64 / total as f64 };
    Ok(AccuracyReport { steps_total: total, steps_exact: exact, accuracy_pct: pct, first_mismatch_step: first })
}

/// Fraction of sampled pairs `(t, t + i)` whose centroids are farther apart
/// than `params.lambda_threshold(t)`. Pass `alpha = 1` to test the plain
/// concentration bound.
///
/// `t` runs over powers of two up to `horizon` (and the stream length) with
/// `i ∈ {1, t/2, t}`; pairs running past the stream are skipped.
pub fn bound_violation_rate(stream: &[Point], params: &BoundParams, horizon: usize) -> f64 {
    let n = stream.len();
    if n < 2 {
        return 0.0;
    }
    let prefix = prefix_means(stream);
    let mut pairs = 0usize;
    let mut bad = 0usize;
    let mut t = 1usize;
    while t <= horizon.min(n) {
        let mut offsets = vec![1, t / 2, t];
        offsets.dedup();
        for i in offsets.into_iter().filter(|&i| i >= 1) {
            if t + i > n {
                continue;
            }
            pairs += 1;
            if dist(&prefix[t - 1], &prefix[t + i - 1]) > params.lambda_threshold(t as u64) {
                bad += 1;
            }
        }
        t *= 2;
    }
    if pairs == 0 {
        0.0
    } else {
        bad as f64 / pairs as f64
    }
}

fn prefix_means(stream: &[Point]) -> Vec<Vec<f64>> {
    let dim = stream[0].dim();
    let mut sum = vec![0.0; dim];
    stream
        .iter()
        .enumerate()
        .map(|(t, p)| {
            for (s, x) in sum.iter_mut().zip(&p.vec) {
                *s += x;
            }
            sum.iter().map(|s| s / (t + 1) as f64).collect()
        })
        .collect()
}
