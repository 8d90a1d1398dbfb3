//! Running summarizers over streams, timing them and scoring them against
//! brute force.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, DEFAULT_DECAY_C1, DEFAULT_DECAY_C2, DEFAULT_RANDOM_P};
use crate::engine::{CoverSumm, EngineConfig, StepRecord, Summarizer, Variant};
use crate::error::{CoverSummError, Result};
use crate::oracle::{nn_accuracy, oracle_summaries, AccuracyReport};
use crate::vectorspace::{Point, PointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Brute,
    NaiveTree,
    CoverSumm(Variant),
    Random,
    Decay,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Brute,
        Algorithm::NaiveTree,
        Algorithm::CoverSumm(Variant::LazyReservoir),
        Algorithm::CoverSumm(Variant::Reservoir),
        Algorithm::CoverSumm(Variant::KnnPlusRange),
        Algorithm::Random,
        Algorithm::Decay,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::NaiveTree => "naive-tree",
            Algorithm::CoverSumm(v) => v.name(),
            Algorithm::Random => "random",
            Algorithm::Decay => "decay",
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Algorithm::Random | Algorithm::Decay)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = CoverSummError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coversumm" => Algorithm::CoverSumm(Variant::LazyReservoir),
            _ => *Algorithm::ALL.iter().find(|a| a.name() == s).ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                CoverSummError::InvalidInput(format!("unknown algorithm {s:?}; expected one of {}", names.join(", ")))
            })?,
        })
    }
}

/// Everything needed to build any of the algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub engine: EngineConfig,
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            engine: EngineConfig::default(),
            p: DEFAULT_RANDOM_P,
            c1: DEFAULT_DECAY_C1,
            c2: DEFAULT_DECAY_C2,
            seed: 0,
        }
    }
}

pub fn build(algo: Algorithm, dim: usize, cfg: &AlgoConfig) -> Result<Box<dyn Summarizer + Send>> {
    let engine = cfg.engine;
    match algo {
        Algorithm::CoverSumm(v) => Ok(Box::new(CoverSumm::new(dim, engine.variant(v))?)),
        Algorithm::Brute => BaselineKind::BruteForce.build(dim, engine, cfg.seed),
        Algorithm::NaiveTree => BaselineKind::NaiveTree.build(dim, engine, cfg.seed),
        Algorithm::Random => BaselineKind::RandomReservoir { p: cfg.p }.build(dim, engine, cfg.seed),
        Algorithm::Decay => BaselineKind::DecayLambda { c1: cfg.c1, c2: cfg.c2 }.build(dim, engine, cfg.seed),
    }
}

/// Result of streaming one dataset through one summarizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub algorithm: String,
    pub records: Vec<StepRecord>,
    pub total_ns: u64,
    pub reservoir_searches: u64,
    pub max_reservoir: usize,
}

impl RunResult {
    pub fn summaries(&self) -> Vec<Vec<PointId>> {
        self.records.iter().map(|r| r.summary.member_ids.clone()).collect()
    }

    pub fn total_secs(&self) -> f64 {
        self.total_ns as f64 * 1e-9
    }

    pub fn changed_steps(&self) -> usize {
        self.records.iter().filter(|r| r.summary.changed).count()
    }
}

/// Feeds `points` one at a time, timing only the step calls.
pub fn run_stream(s: &mut dyn Summarizer, points: &[Point]) -> Result<RunResult> {
    let mut records = Vec::with_capacity(points.len());
    let mut total = 0u64;
    let mut max_reservoir = 0;
    for p in points {
        let start = Instant::now();
        let mut r = s.step(p)?;
        let ns = start.elapsed().as_nanos() as u64;
        r.elapsed_ns = ns;
        total += ns;
        max_reservoir = max_reservoir.max(r.reservoir_size);
        records.push(r);
    }
    Ok(RunResult {
        algorithm: s.name(),
        records,
        total_ns: total,
        reservoir_searches: s.reservoir_searches(),
        max_reservoir,
    })
}

pub fn run(algo: Algorithm, points: &[Point], cfg: &AlgoConfig) -> Result<RunResult> {
    let dim = points.first().map_or(1, Point::dim);
    let mut s = build(algo, dim, cfg)?;
    run_stream(s.as_mut(), points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub exact: bool,
    pub repeats: usize,
    pub mean_secs: f64,
    pub sd_secs: f64,
    pub accuracy_pct: f64,
    pub max_reservoir: usize,
    pub reservoir_searches: u64,
}

pub const DEFAULT_REPEATS: usize = 5;

/// Times every algorithm `repeats` times on the same stream and scores the
/// first run of each against brute force.
pub fn bench(points: &[Point], algos: &[Algorithm], cfg: &AlgoConfig, repeats: usize) -> Result<Vec<BenchRow>> {
    if algos.is_empty() {
        return Err(CoverSummError::InvalidInput("no algorithms to benchmark".into()));
    }
    if repeats == 0 {
        return Err(CoverSummError::InvalidInput("repeats must be at least 1".into()));
    }
    let truth = oracle_summaries(points, cfg.engine.k);
    algos
        .iter()
        .map(|&algo| {
            let mut times = Vec::with_capacity(repeats);
            let mut first = None;
            for _ in 0..repeats {
                let r = run(algo, points, cfg)?;
                times.push(r.total_secs());
                first.get_or_insert(r);
            }
            let first = first.expect("repeats >= 1");
            let acc = nn_accuracy(&first.summaries(), &truth)?;
            let (mean, sd) = mean_sd(&times);
            Ok(BenchRow {
                algorithm: algo.name().to_string(),
                exact: algo.is_exact(),
                repeats,
                mean_secs: mean,
                sd_secs: sd,
                accuracy_pct: acc.accuracy_pct,
                max_reservoir: first.max_reservoir,
                reservoir_searches: first.reservoir_searches,
            })
        })
        .collect()
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_bench_csv(w: impl std::io::Write, rows: &[BenchRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "algorithm,exact,repeats,mean_secs,sd_secs,accuracy_pct,max_reservoir,reservoir_searches")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.2},{},{}",
            r.algorithm, r.exact, r.repeats, r.mean_secs, r.sd_secs, r.accuracy_pct, r.max_reservoir, r.reservoir_searches
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub algorithm: String,
    pub exact: bool,
    pub report: AccuracyReport,
}

impl Verdict {
    /// Exact algorithms must match brute force on every step; approximate
    /// ones always pass.
    pub fn passed(&self) -> bool {
        !self.exact || self.report.steps_exact == self.report.steps_total
    }
}

/// Runs `algo` and scores it against brute force.
pub fn verify(algo: Algorithm, points: &[Point], cfg: &AlgoConfig) -> Result<Verdict> {
    let result = run(algo, points, cfg)?;
    let truth = oracle_summaries(points, cfg.engine.k);
    Ok(Verdict {
        algorithm: algo.name().to_string(),
        exact: algo.is_exact(),
        report: nn_accuracy(&result.summaries(), &truth)?,
    })
}

/// Scores previously written summaries against brute force.
pub fn verify_summaries(candidate: &[Vec<PointId>], points: &[Point], k: usize) -> Result<AccuracyReport> {
    nn_accuracy(candidate, &oracle_summaries(points, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenKind, GenSpec};

    fn data() -> Vec<Point> {
        generate(&GenSpec::new(GenKind::Uniform, 300, 4, 1)).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("coversumm".parse::<Algorithm>().unwrap(), Algorithm::CoverSumm(Variant::LazyReservoir));
        assert!("hnsw".parse::<Algorithm>().is_err());
    }

    #[test]
    fn brute_has_no_reservoir_searches() {
        let pts = &data()[..100];
        let r = run(Algorithm::Brute, pts, &AlgoConfig::default()).unwrap();
        assert_eq!(r.records.len(), 100);
        assert!(r.records.iter().all(|x| x.cumulative_rs == 0));
    }

    #[test]
    fn coversumm_bootstraps() {
        let r = run(Algorithm::CoverSumm(Variant::Reservoir), &data(), &AlgoConfig::default()).unwrap();
        assert!(r.records[0].did_reservoir_search);
        assert_eq!(r.reservoir_searches, r.records.last().unwrap().cumulative_rs);
        assert!(r.records.windows(2).all(|w| w[0].cumulative_rs <= w[1].cumulative_rs));
    }

    #[test]
    fn verify_policy() {
        let pts = data();
        let cfg = AlgoConfig::default();
        let v = verify(Algorithm::CoverSumm(Variant::LazyReservoir), &pts, &cfg).unwrap();
        assert!(v.passed());
        assert_eq!(v.report.accuracy_pct, 100.0);
        let v = verify(Algorithm::Random, &pts, &cfg).unwrap();
        assert!(v.passed());
    }

    #[test]
    fn corrupted_summaries_are_located() {
        let pts = data();
        let mut s = run(Algorithm::Brute, &pts, &AlgoConfig::default()).unwrap().summaries();
        s[41].swap(0, 1);
        let r = verify_summaries(&s, &pts, 20).unwrap();
        assert_eq!(r.first_mismatch_step, Some(42));
        assert_eq!(r.steps_exact, 299);
    }

    #[test]
    fn single_row_bench() {
        let rows = bench(&data(), &[Algorithm::NaiveTree], &AlgoConfig::default(), 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].accuracy_pct, 100.0);
        assert_eq!(rows[0].sd_secs, 0.0);
        let mut out = Vec::new();
        write_bench_csv(&mut out, &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 2);
    }

    #[test]
    fn mean_and_sd() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
