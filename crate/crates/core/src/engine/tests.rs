use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::*;
use crate::index::LinearIndex;
use crate::oracle::{oracle_neighbors, oracle_summaries};

fn uniform(n: usize, dim: usize, seed: u64) -> Vec<Point> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n as u64)
        .map(|i| Point::new(i, (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect()))
        .collect()
}

fn run<I: NeighborIndex>(e: &mut CoverSumm<I>, pts: &[Point]) -> Vec<Vec<PointId>> {
    pts.iter().map(|p| e.step(p).unwrap().summary.member_ids).collect()
}

fn engine(dim: usize, k: usize, v: Variant) -> CoverSumm {
    CoverSumm::new(dim, EngineConfig::with_k(k).variant(v)).unwrap()
}

const VARIANTS: [Variant; 3] = [Variant::Reservoir, Variant::KnnPlusRange, Variant::LazyReservoir];

#[test]
fn first_step_rebuilds() {
    let mut e = engine(2, 3, Variant::Reservoir);
    let r = e.step(&Point::new(4, vec![0.5, -0.5])).unwrap();
    assert!(r.did_reservoir_search);
    assert_eq!(r.cumulative_rs, 1);
    assert_eq!(r.summary.member_ids, vec![4]);
    assert!(r.summary.changed);
}

#[test]
fn two_point_tie() {
    for v in VARIANTS {
        let mut e = engine(1, 1, v);
        e.step(&Point::new(0, vec![0.0])).unwrap();
        let r = e.step(&Point::new(1, vec![10.0])).unwrap();
        // both are 5 away from the mean; the smaller id wins
        assert_eq!(r.summary.member_ids, vec![0]);
        assert_eq!(r.summary.distances, vec![5.0]);
    }
}

#[test]
fn matches_oracle_every_step() {
    let pts = uniform(1000, 6, 11);
    let truth = oracle_summaries(&pts, 10);
    for v in VARIANTS {
        let mut e = engine(6, 10, v);
        assert_eq!(run(&mut e, &pts), truth, "{v:?}");
        assert!(e.reservoir_searches() < 200, "{v:?}: {}", e.reservoir_searches());
    }
}

#[test]
fn variants_agree_including_counts() {
    let pts = uniform(2000, 3, 12);
    let records: Vec<Vec<(Vec<PointId>, bool, usize)>> = VARIANTS
        .iter()
        .map(|&v| {
            let mut e = engine(3, 5, v);
            pts.iter()
                .map(|p| {
                    let r = e.step(p).unwrap();
                    (r.summary.member_ids, r.did_reservoir_search, r.reservoir_size)
                })
                .collect()
        })
        .collect();
    assert_eq!(records[0], records[1]);
    assert_eq!(records[0], records[2]);
}

#[test]
fn linear_index_backend() {
    let pts = uniform(400, 4, 13);
    let mut e = CoverSumm::with_index(EngineConfig::with_k(5), LinearIndex::new(4)).unwrap();
    assert_eq!(run(&mut e, &pts), oracle_summaries(&pts, 5));
}

#[test]
fn lazy_buffers_until_rebuild() {
    let pts = uniform(3000, 4, 14);
    let mut e = engine(4, 5, Variant::LazyReservoir);
    let mut saw_lag = false;
    for p in &pts {
        let r = e.step(p).unwrap();
        if r.did_reservoir_search {
            assert_eq!(e.index().len() as u64, r.step);
            assert_eq!(e.pending_len(), 0);
        } else if e.pending_len() >= 10 {
            saw_lag = true;
            assert_eq!(e.index().len() + e.pending_len(), r.step as usize);
        }
    }
    assert!(saw_lag);
}

#[test]
fn step_errors() {
    let mut e = engine(2, 3, Variant::Reservoir);
    assert!(matches!(e.step(&Point::new(0, vec![1.0])), Err(CoverSummError::DimensionMismatch { .. })));
    e.step(&Point::new(5, vec![1.0, 1.0])).unwrap();
    assert!(matches!(e.step(&Point::new(5, vec![1.0, 1.0])), Err(CoverSummError::DuplicateId { .. })));
    assert!(e.step(&Point::new(6, vec![f64::NAN, 1.0])).is_err());
    assert!(CoverSumm::new(2, EngineConfig { c_max: 3, ..EngineConfig::with_k(3) }).is_err());
    assert!(CoverSumm::new(2, EngineConfig { k: 0, ..EngineConfig::default() }).is_err());
}

#[test]
fn reservoir_invariants_hold() {
    let pts = uniform(5000, 8, 15);
    let cfg = EngineConfig::with_k(10);
    let mut e = CoverSumm::new(8, cfg).unwrap();
    for p in &pts {
        let r = e.step(p).unwrap();
        if r.did_reservoir_search {
            assert!(r.reservoir_size >= 10.min(r.step as usize));
        }
        assert!(r.reservoir_size <= cfg.c_max);
        assert_eq!(r.summary.member_ids.len(), 10.min(r.step as usize));
        assert!(r.summary.distances.windows(2).all(|w| w[0] <= w[1]));
    }
    assert_eq!(e.fallback_rebuilds(), 0);
}

#[test]
fn points_outside_reservoir_are_far() {
    // between rebuilds with drift below λ/2, anything not in R lies beyond
    // d_k + λ/2 of µ_t, where d_k was measured at the last rebuild
    let pts = uniform(1500, 3, 16);
    let mut e = engine(3, 4, Variant::Reservoir);
    for (t, p) in pts.iter().enumerate() {
        let r = e.step(p).unwrap();
        if r.did_reservoir_search || r.drift >= e.lambda() / 2.0 || e.reservoir().radius().is_infinite() {
            continue;
        }
        let mean = e.centroid().mean();
        let d_k = e.reservoir().radius() - e.lambda();
        assert!(*r.summary.distances.last().unwrap() < d_k + e.lambda() / 2.0);
        let inside: std::collections::HashSet<PointId> = e.reservoir().ids().collect();
        for q in &pts[..=t] {
            if !inside.contains(&q.id) {
                assert!(dist(&mean, &q.vec) > d_k + e.lambda() / 2.0 - 1e-12);
            }
        }
    }
}

#[test]
fn summary_from_reservoir_rescans() {
    let pts = uniform(300, 3, 17);
    let mut e = engine(3, 6, Variant::Reservoir);
    run(&mut e, &pts);
    let s = e.summary_from_reservoir().unwrap();
    let mean = e.centroid().mean();
    let over_r = oracle_neighbors(e.reservoir().entries().iter().map(|x| (x.id, x.vec.as_slice())), &mean, 6);
    assert_eq!(s.member_ids, over_r.iter().map(|n| n.id).collect::<Vec<_>>());
    assert!(!s.changed);
}

fn survivors_truth(live: &BTreeMap<PointId, Vec<f64>>, mean: &[f64], k: usize) -> Vec<PointId> {
    oracle_neighbors(live.iter().map(|(&id, v)| (id, v.as_slice())), mean, k)
        .into_iter()
        .map(|n| n.id)
        .collect()
}

#[test]
fn deletions_match_oracle() {
    for v in VARIANTS {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(18);
        let pts = uniform(3000, 4, 19);
        let mut e = engine(4, 6, v);
        let mut live = BTreeMap::new();
        for p in &pts {
            e.step(p).unwrap();
            live.insert(p.id, p.vec.clone());
            if rng.gen_bool(0.1) {
                let n = rng.gen_range(1..4).min(live.len());
                let keys: Vec<PointId> = live.keys().copied().collect();
                let mut del = Vec::new();
                while del.len() < n {
                    let id = keys[rng.gen_range(0..keys.len())];
                    if !del.contains(&id) {
                        del.push(id);
                    }
                }
                del.iter().for_each(|id| {
                    live.remove(id);
                });
                let s = e.delete_batch(&del).unwrap();
                let truth = survivors_truth(&live, &e.centroid().mean(), 6);
                assert_eq!(s.member_ids, truth, "{v:?}");
            }
        }
    }
}

#[test]
fn delete_top_one_and_all_but_one() {
    let pts = uniform(200, 2, 20);
    let mut e = engine(2, 3, Variant::LazyReservoir);
    let last = run(&mut e, &pts).pop().unwrap();
    let s = e.delete_batch(&last[..1]).unwrap();
    let live: BTreeMap<PointId, Vec<f64>> =
        pts.iter().filter(|p| p.id != last[0]).map(|p| (p.id, p.vec.clone())).collect();
    assert_eq!(s.member_ids, survivors_truth(&live, &e.centroid().mean(), 3));

    let keep = *live.keys().next().unwrap();
    let rest: Vec<PointId> = live.keys().copied().filter(|&id| id != keep).collect();
    let s = e.delete_batch(&rest).unwrap();
    assert_eq!(s.member_ids, vec![keep]);
    let s = e.delete_batch(&[keep]).unwrap();
    assert!(s.member_ids.is_empty());
    assert!(matches!(e.delete_batch(&[keep]), Err(CoverSummError::NotFound(_))));

    // the engine keeps working once emptied
    let r = e.step(&Point::new(1000, vec![0.1, 0.1])).unwrap();
    assert_eq!(r.summary.member_ids, vec![1000]);
}

#[test]
fn far_deletion_keeps_reservoir() {
    let mut pts = uniform(500, 2, 21);
    pts.push(Point::new(500, vec![0.49, 0.49]));
    let mut e = engine(2, 4, Variant::Reservoir);
    let before = run(&mut e, &pts).pop().unwrap();
    let rs = e.reservoir_searches();
    if !e.reservoir().ids().any(|id| id == 500) {
        let s = e.delete_batch(&[500]).unwrap();
        assert_eq!(e.reservoir_searches(), rs);
        assert_eq!(s.member_ids, before);
        assert!(!s.changed);
    }
}

#[test]
fn deleting_buffered_points() {
    let pts = uniform(2000, 3, 22);
    let mut e = engine(3, 4, Variant::LazyReservoir);
    run(&mut e, &pts);
    assert!(e.pending_len() > 0);
    let buffered = pts.last().unwrap().id;
    let before = e.index().len();
    e.delete_batch(&[buffered]).unwrap();
    assert!(e.index().len() == before || e.pending_len() == 0);
    assert!(!e.index().contains(buffered));
}

#[test]
fn bulk_delete_resums() {
    let pts = uniform(100, 2, 23);
    let mut e = engine(2, 3, Variant::Reservoir);
    run(&mut e, &pts);
    let del: Vec<PointId> = (0..80).collect();
    let s = e.delete_batch(&del).unwrap();
    let live: BTreeMap<PointId, Vec<f64>> = pts[80..].iter().map(|p| (p.id, p.vec.clone())).collect();
    let expect = crate::oracle::mean_of(&pts[80..]);
    assert_eq!(e.centroid().mean(), expect);
    assert_eq!(s.member_ids, survivors_truth(&live, &expect, 3));
}
