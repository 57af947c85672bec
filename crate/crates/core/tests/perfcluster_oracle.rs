mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slomo_core::perfcluster::{
    build_observations, kmeanspp, ClusterError, label_clusters, partition_sse, preprocess, Category, Point, RunRow,
};

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()
}

/// Seeding plus Lloyd misses the optimum for all 16 seeds on roughly 0.6 % of
/// such instances, so the instance stream is fixed rather than drawn per run.
#[test]
fn some_seed_reaches_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k..=8);
        let points = random_points(&mut rng, n);
        let optimum = oracles::optimal_partition_sse(&points, k);
        let mut best = f64::INFINITY;
        for seed in 0..16 {
            let c = kmeanspp(&points, k, seed).unwrap();
            assert!(c.sse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!((partition_sse(&points, &c.assignment, k) - c.sse).abs() < 1e-9);
            assert!(c.sse >= optimum - 1e-9);
            best = best.min(c.sse);
        }
        assert!((best - optimum).abs() <= 1e-9, "best {best} vs optimum {optimum}");
    }
}

proptest! {
    #[test]
    fn lloyd_never_increases_sse(seed in any::<u64>(), n in 4usize..60, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Coarse grid to produce duplicate points as well.
        let points: Vec<Point> = (0..n)
            .map(|_| [rng.gen_range(0..6) as f64 / 5.0, rng.gen_range(0..6) as f64 / 5.0])
            .collect();
        match kmeanspp(&points, k, seed) {
            Ok(c) => {
                prop_assert!(c.sse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
                prop_assert!(c.assignment.iter().all(|&a| a < k));
                prop_assert_eq!(kmeanspp(&points, k, seed).unwrap(), c);
            }
            Err(e) => {
                let too_large = matches!(e, ClusterError::KTooLarge { .. });
                prop_assert!(too_large);
            }
        }
    }

    #[test]
    fn preprocess_is_monotone_and_bounded(a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (preprocess(Some(lo), 2.0).unwrap(), preprocess(Some(hi), 2.0).unwrap());
        prop_assert!(x <= y);
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
    }

    #[test]
    fn labelling_is_a_bijection(raw in prop::collection::vec(prop::array::uniform2(0.0..1.0f64), 4)) {
        let labels = label_clusters(&raw, 4).unwrap();
        let mut sorted = labels.clone();
        sorted.sort();
        prop_assert_eq!(sorted, Category::ALL.to_vec());
        let fail = labels.iter().position(|&c| c == Category::Fail).unwrap();
        prop_assert!(raw.iter().all(|c| c[0] <= raw[fail][0]));
    }
}

#[test]
fn table_sized_observation_set() {
    let mut rows = Vec::new();
    for s in 0..12 {
        for a in 0..5 {
            for r in 1..=5 {
                rows.push(RunRow {
                    sequence: format!("seq{s}"),
                    algorithm: format!("alg{a}"),
                    run_id: r,
                    loss_rate: 0.0,
                    raw_err: (r != 5).then_some(0.1 * r as f64),
                });
            }
        }
    }
    let obs = build_observations(&rows, 2.0).unwrap();
    assert_eq!(obs.len(), 300);
    assert!(obs.iter().filter(|o| o.run_id == 5).all(|o| o.err_norm == 1.0));
}
