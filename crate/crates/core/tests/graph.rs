use std::collections::BTreeSet;

use proptest::prelude::*;
use tangled_core::corrgraph::{build_graph, cluster_features, connected_components, pearson_matrix, CorrelationMatrix};
use tangled_core::{FeatureMatrix, Matrix};

fn symmetric(m: usize, upper: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    let mut it = upper.iter();
    for i in 0..m {
        v[i * m + i] = 1.0;
        for j in i + 1..m {
            let x = *it.next().unwrap();
            v[i * m + j] = x;
            v[j * m + i] = x;
        }
    }
    v
}

fn matrix_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..10).prop_flat_map(|m| {
        let pairs = m * (m - 1) / 2;
        (Just(m), prop::collection::vec(-1.0f64..=1.0, pairs)).prop_map(|(m, u)| (m, symmetric(m, &u)))
    })
}

fn closure(m: usize, values: &[f64], tau: f64) -> BTreeSet<Vec<usize>> {
    let mut reach: Vec<Vec<bool>> =
        (0..m).map(|i| (0..m).map(|j| i == j || values[i * m + j].abs() >= tau).collect()).collect();
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    (0..m).map(|i| (0..m).filter(|&j| reach[i][j]).collect()).collect()
}

fn components(m: usize, values: &[f64], tau: f64) -> Vec<Vec<usize>> {
    let s = CorrelationMatrix::from_values((0..m).map(|i| format!("v{i}")).collect(), values.to_vec()).unwrap();
    connected_components(&build_graph(&s, tau).unwrap()).components
}

proptest! {
    #[test]
    fn components_match_transitive_closure((m, values) in matrix_strategy(), tau in 0.05f64..=1.0) {
        let got: BTreeSet<Vec<usize>> = components(m, &values, tau).into_iter().collect();
        prop_assert_eq!(got, closure(m, &values, tau));
    }

    #[test]
    fn raising_tau_refines_the_partition((m, values) in matrix_strategy(), a in 0.05f64..=1.0, b in 0.05f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let coarse = components(m, &values, lo);
        for fine in components(m, &values, hi) {
            prop_assert!(coarse.iter().any(|c| fine.iter().all(|f| c.contains(f))));
        }
    }

    #[test]
    fn components_are_sorted_and_partition_the_vertices((m, values) in matrix_strategy(), tau in 0.05f64..=1.0) {
        let comps = components(m, &values, tau);
        let mut seen: Vec<usize> = comps.iter().flatten().copied().collect();
        for c in &comps {
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
        for w in comps.windows(2) {
            prop_assert!(w[0][0] < w[1][0]);
        }
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn correlation_is_affine_invariant(
        cols in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 12), 2..6),
        scale in prop_oneof![-4.0f64..-0.25, 0.25f64..4.0],
        shift in -10.0f64..10.0,
    ) {
        let d = FeatureMatrix::with_default_names(Matrix::from_columns(&cols).unwrap()).unwrap();
        let mut moved = cols.clone();
        moved[0].iter_mut().for_each(|v| *v = *v * scale + shift);
        let d2 = FeatureMatrix::with_default_names(Matrix::from_columns(&moved).unwrap()).unwrap();
        let (s1, s2) = (pearson_matrix(&d), pearson_matrix(&d2));
        for i in 0..cols.len() {
            for j in 0..cols.len() {
                prop_assert!((s1.get(i, j).abs() - s2.get(i, j).abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(
        cols in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 10), 1..6),
    ) {
        let d = FeatureMatrix::with_default_names(Matrix::from_columns(&cols).unwrap()).unwrap();
        let s = pearson_matrix(&d);
        for i in 0..cols.len() {
            if !s.is_constant(i) {
                prop_assert!((s.get(i, i) - 1.0).abs() < 1e-12);
            }
            for j in 0..cols.len() {
                prop_assert_eq!(s.get(i, j), s.get(j, i));
                prop_assert!(s.get(i, j).abs() <= 1.0);
            }
        }
    }
}

#[test]
fn exact_duplicates_always_share_a_component() {
    let x = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
    let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
    let d = FeatureMatrix::with_default_names(Matrix::from_columns(&[&x[..], &y[..], &x[..]]).unwrap()).unwrap();
    let (_, p) = cluster_features(&d, 0.99).unwrap();
    assert_eq!(p.components, vec![vec![0, 2], vec![1]]);
    assert_eq!(p.assignment, vec![0, 1, 0]);
}
