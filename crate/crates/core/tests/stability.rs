use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tangled_core::forest::ForestParams;
use tangled_core::ingest::{generate_synthetic, SyntheticSpec};
use tangled_core::select::{SelectionConfig, TargetAngle};
use tangled_core::stability::{
    fractional_ranks, kuncheva_curve, kuncheva_pair, run_stability, spearman, StabilityConfig,
};

fn subset(m: usize) -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<usize>)> {
    (3usize..=m).prop_flat_map(|m| {
        (1..m).prop_flat_map(move |k| {
            let perm = Just((0..m).collect::<Vec<_>>()).prop_shuffle();
            (Just(m), Just(k), perm.clone(), perm)
                .prop_map(move |(m, k, a, b)| (m, k, a[..k].to_vec(), b[..k].to_vec()))
        })
    })
}

proptest! {
    #[test]
    fn kuncheva_is_symmetric_and_bounded((m, k, a, b) in subset(30)) {
        let ab = kuncheva_pair(&a, &b, k, m).unwrap();
        prop_assert_eq!(ab, kuncheva_pair(&b, &a, k, m).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(kuncheva_pair(&a, &a, k, m).unwrap(), 1.0);
    }

    #[test]
    fn spearman_ignores_strictly_increasing_transforms(
        x in prop::collection::vec(-50.0f64..50.0, 3..40),
        y in prop::collection::vec(-50.0f64..50.0, 3..40),
    ) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let fx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() + 3.0).collect();
        match (spearman(x, y), spearman(&fx, y)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "definedness changed"),
        }
    }

    #[test]
    fn fractional_ranks_sum_to_the_triangular_number(x in prop::collection::vec(0u8..5, 1..30)) {
        let v: Vec<f64> = x.iter().map(|&b| b as f64).collect();
        let n = v.len() as f64;
        prop_assert!((fractional_ranks(&v).iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }
}

#[test]
fn random_rankings_score_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let rankings: Vec<Vec<usize>> = (0..10)
        .map(|_| {
            let mut p: Vec<usize> = (0..20).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let curve = kuncheva_curve(&rankings, &[5], 20).unwrap();
    assert_eq!(curve[0].pairs.len(), 45);
    assert!(curve[0].mean.abs() < 0.15, "mean {}", curve[0].mean);
}

#[test]
fn identical_rankings_score_one() {
    let r: Vec<usize> = vec![4, 2, 9, 0, 1, 3, 5, 6, 7, 8];
    let curve = kuncheva_curve(&[r.clone(), r.clone(), r], &[1, 3, 9], 10).unwrap();
    assert!(curve.iter().all(|p| p.mean == 1.0 && p.stderr == 0.0));
}

#[test]
fn repeated_seeds_reproduce_the_same_selection() {
    let spec = SyntheticSpec {
        n_clusters: 3,
        cluster_sizes: vec![3; 3],
        n_noise_features: 2,
        n_samples: 250,
        ..SyntheticSpec::reference(21)
    };
    let data = generate_synthetic(&spec).unwrap();
    let cfg = StabilityConfig {
        n_repeats: 3,
        k_grid: Some(vec![1, 2]),
        selection: SelectionConfig {
            runs: 3,
            forest: ForestParams { n_trees: 8, ..ForestParams::default() },
            target_angle: TargetAngle::Phi,
            ..SelectionConfig::default()
        },
        seed: 21,
        repeat_seeds: Some(vec![77; 3]),
        naive_baseline: true,
        ..StabilityConfig::default()
    };
    let reports = run_stability(&data.features, &data.angles, &cfg).unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert!(r.runs.windows(2).all(|w| w[0].selected == w[1].selected));
    assert!(r.kuncheva.iter().all(|p| (p.mean - 1.0).abs() < 1e-12));
    assert_eq!(r.spearman.mean, Some(1.0));
    assert!(r.naive_baseline.as_ref().unwrap().kuncheva.iter().all(|p| (p.mean - 1.0).abs() < 1e-12));
}

#[test]
fn stability_rejects_a_single_repeat() {
    let data = generate_synthetic(&SyntheticSpec { n_samples: 100, ..SyntheticSpec::reference(22) }).unwrap();
    let cfg = StabilityConfig { n_repeats: 1, ..StabilityConfig::default() };
    assert!(run_stability(&data.features, &data.angles, &cfg).is_err());
}
