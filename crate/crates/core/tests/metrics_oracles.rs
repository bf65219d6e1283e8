mod common;

use common::oracles;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swbce::metrics::{
    correspond, evaluate, optimal_pairs, pr_at_thresholds, EvalConfig, EvalItem, Matching, Tolerance,
};
use swbce::synth::{self, SceneSpec};
use swbce::{BinaryMap, SoftMap};

fn sparse_map(rng: &mut impl Rng, h: usize, w: usize, max_pos: usize) -> BinaryMap {
    let mut v = vec![0u8; h * w];
    let k = rng.random_range(0..=max_pos.min(h * w));
    for _ in 0..k {
        v[rng.random_range(0..h * w)] = 1;
    }
    BinaryMap::new(h, w, v).unwrap()
}

#[test]
fn optimal_counts_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let h = rng.random_range(1..=16);
        let w = rng.random_range(1..=16);
        let a = sparse_map(&mut rng, h, w, 12);
        let b = sparse_map(&mut rng, h, w, 12);
        for tol in [0.0, 1.0, 2.0] {
            let got = correspond(&a, &b, tol, Matching::OptimalAssignment).unwrap();
            let (tp, fp, fn_) = oracles::brute_counts(a.values(), b.values(), w, tol);
            assert_eq!((got.tp, got.fp, got.fn_), (tp, fp, fn_));
        }
    }
}

#[test]
fn optimal_pairs_minimize_total_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..150 {
        let (h, w) = (rng.random_range(2..=10), rng.random_range(2..=10));
        let a = sparse_map(&mut rng, h, w, 10);
        let b = sparse_map(&mut rng, h, w, 10);
        for tol in [1.0, 1.5, 2.5] {
            let pairs = optimal_pairs(&a, &b, tol).unwrap();
            let (n, cost) = oracles::exhaustive_matching(&a.positives(), &b.positives(), tol);
            assert_eq!(pairs.len(), n);
            let total: f64 = pairs
                .iter()
                .map(|((pr, pc), (gr, gc))| {
                    let dr = *pr as f64 - *gr as f64;
                    let dc = *pc as f64 - *gc as f64;
                    (dr * dr + dc * dc).sqrt()
                })
                .sum();
            assert!((total - cost).abs() < 1e-9, "{total} vs {cost}");
            let mut seen_p = std::collections::HashSet::new();
            let mut seen_g = std::collections::HashSet::new();
            for (p, g) in &pairs {
                assert!(seen_p.insert(*p) && seen_g.insert(*g));
            }
        }
    }
}

fn map_pair() -> impl Strategy<Value = (BinaryMap, BinaryMap)> {
    (1usize..14, 1usize..14).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(prop::bool::weighted(0.25), h * w),
            prop::collection::vec(prop::bool::weighted(0.25), h * w),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryMap::new(h, w, a.into_iter().map(u8::from).collect()).unwrap(),
                    BinaryMap::new(h, w, b.into_iter().map(u8::from).collect()).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn match_count_is_symmetric((a, b) in map_pair(), tol in 0.0f64..3.0) {
        let ab = correspond(&a, &b, tol, Matching::OptimalAssignment).unwrap();
        let ba = correspond(&b, &a, tol, Matching::OptimalAssignment).unwrap();
        prop_assert_eq!(ab.tp, ba.tp);
        prop_assert_eq!(ab.fp, ba.fn_);
    }

    #[test]
    fn tp_monotone_in_tolerance((a, b) in map_pair(), t1 in 0.0f64..3.0, dt in 0.0f64..2.0) {
        let lo = correspond(&a, &b, t1, Matching::OptimalAssignment).unwrap();
        let hi = correspond(&a, &b, t1 + dt, Matching::OptimalAssignment).unwrap();
        prop_assert!(lo.tp <= hi.tp);
    }

    #[test]
    fn greedy_never_beats_optimal((a, b) in map_pair(), tol in 0.0f64..3.0) {
        let g = correspond(&a, &b, tol, Matching::GreedyNearest).unwrap();
        let o = correspond(&a, &b, tol, Matching::OptimalAssignment).unwrap();
        prop_assert!(g.tp <= o.tp);
    }

    #[test]
    fn threshold_sweep_is_coherent(
        vals in prop::collection::vec(0.0f64..=1.0, 64),
        gt in prop::collection::vec(prop::bool::weighted(0.2), 64),
    ) {
        let pred = SoftMap::new(8, 8, vals).unwrap();
        let gt = BinaryMap::new(8, 8, gt.into_iter().map(u8::from).collect()).unwrap();
        let counts = pr_at_thresholds(&pred, &gt, &EvalConfig::default()).unwrap();
        for w in counts.windows(2) {
            prop_assert!(w[1].tp + w[1].fp <= w[0].tp + w[0].fp);
            prop_assert!(w[1].fp <= w[0].fp);
        }
    }
}

#[test]
fn perfect_soft_prediction_scores_one_everywhere() {
    let gt = BinaryMap::from_rows(&[&[0, 1, 0, 0], &[0, 1, 1, 0], &[0, 0, 1, 0]]).unwrap();
    let pred = SoftMap::from_binary(&gt);
    for c in pr_at_thresholds(&pred, &gt, &EvalConfig::default()).unwrap() {
        assert_eq!((c.precision(), c.recall()), (1.0, 1.0));
    }
    let cfg = EvalConfig { tolerance: Tolerance::Pixels(1.0), ..Default::default() };
    let big = BinaryMap::zeros(300, 400).unwrap();
    assert_eq!(cfg.tolerance.resolve(big.height(), big.width()), 1.0);
}

fn items(set: &[(Vec<f64>, Vec<u8>, usize)]) -> Vec<EvalItem> {
    set.iter()
        .enumerate()
        .map(|(i, (p, g, w))| EvalItem {
            id: format!("{i}"),
            pred: SoftMap::new(p.len() / w, *w, p.clone()).unwrap(),
            gt: BinaryMap::new(g.len() / w, *w, g.clone()).unwrap(),
        })
        .collect()
}

#[test]
fn evaluation_matches_brute_force_on_fixture() {
    let set = oracles::fixture_set();
    let cfg = EvalConfig::default();
    let report = evaluate(&items(&set), &cfg).unwrap();
    let brute = oracles::brute_evaluate(&set, &cfg.thresholds, 1.0);
    assert!((report.ods - brute.ods).abs() < 1e-12);
    assert!((report.ois - brute.ois).abs() < 1e-12);
    assert!((report.ap - brute.ap).abs() < 1e-12);
    assert!(report.ods > 0.0 && report.ap > 0.0);
    for p in &report.dataset_curve().points {
        assert!(report.ods >= p.f_measure);
    }
}

#[test]
fn ois_is_at_least_ods_on_random_synthetic_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = EvalConfig::default();
    for set in 0..50u64 {
        let items: Vec<EvalItem> = (0..4u64)
            .map(|i| {
                let spec = SceneSpec { seed: set * 16 + i, height: 32, width: 32, ..Default::default() };
                let s = synth::generate(&spec).unwrap();
                let pred = oracles::synthetic_prediction(&mut rng, s.edges.values(), 32, 32);
                EvalItem { id: format!("{i}"), pred: SoftMap::new(32, 32, pred).unwrap(), gt: s.edges }
            })
            .collect();
        let r = evaluate(&items, &cfg).unwrap();
        assert!(r.ois >= r.ods, "set {set}: ois {} < ods {}", r.ois, r.ods);
    }
}
