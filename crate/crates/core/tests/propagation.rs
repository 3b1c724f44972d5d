mod common;

use common::*;
use labelaudit::graph::{normalized_adjacency, Graph, Split};
use labelaudit::matrix::DenseMatrix;
use labelaudit::propagation::{power_diagonal, propagate, propagation_matrix, Propagator};
use proptest::prelude::*;

#[test]
fn propagate_matches_dense_oracle_on_random_graphs() {
    let mut r = rng(17);
    for trial in 0..200 {
        let n = 1 + trial % 12;
        let g = random_graph(&mut r, n, 0.35, 3);
        let a = normalized_adjacency(&g);
        let m = random_dense(&mut r, n, 3);
        for k in 1..=5 {
            let got = rows_of(&propagate(&a, &m, k).unwrap());
            let want = oracle_propagate(&g, &m, k);
            let err = max_abs_diff(&got, &want);
            assert!(err <= 1e-10, "trial {trial}, n={n}, k={k}: error {err}");
        }
    }
}

#[test]
fn materialized_matrix_matches_oracle_and_has_zero_diagonal() {
    let mut r = rng(5);
    for trial in 0..60 {
        let n = 2 + trial % 11;
        let g = random_graph(&mut r, n, 0.4, 2);
        let a = normalized_adjacency(&g);
        let dense_a = dense_normalized(&g);
        for k in 1..=5 {
            let s = propagation_matrix(&a, k).unwrap();
            let mut want = dense_power(&dense_a, k);
            for (i, row) in want.iter_mut().enumerate() {
                row[i] = 0.0;
            }
            assert!(max_abs_diff(&rows_of(&s.to_dense()), &want) <= 1e-10);
            assert!(s.diagonal().iter().all(|&d| d == 0.0));
            let diag = power_diagonal(&a, k);
            let full = dense_power(&dense_a, k);
            for v in 0..n {
                assert!((diag[v] - full[v][v]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn normalized_adjacency_is_exactly_symmetric() {
    let mut r = rng(8);
    for _ in 0..30 {
        let g = random_graph(&mut r, 12, 0.3, 2);
        let a = normalized_adjacency(&g);
        let m = a.matrix();
        assert!(m.is_symmetric());
        assert_eq!(&m.transpose(), m);
        let d = m.to_dense();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
            }
        }
    }
}

#[test]
fn one_hop_of_ones_sums_neighbor_weights() {
    let mut r = rng(2);
    for _ in 0..20 {
        let g = random_graph(&mut r, 10, 0.3, 2);
        let a = normalized_adjacency(&g);
        let ones = DenseMatrix::from_vec(10, 1, vec![1.0; 10]).unwrap();
        let out = propagate(&a, &ones, 1).unwrap();
        for u in 0..10 {
            let want: f64 = g
                .neighbors(u)
                .iter()
                .map(|&v| 1.0 / ((g.degree(u) * g.degree(v)) as f64).sqrt())
                .sum();
            assert!((out.get(u, 0) - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn path_graph_fixture() {
    let (g, _) = Graph::new(1, [(0, 1), (1, 2)], vec![Some(0); 3], vec![Split::Train; 3], None).unwrap();
    let a = normalized_adjacency(&g);
    let h = 0.5f64.sqrt();
    for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
        assert!((a.matrix().get(i, j) - h).abs() < 1e-15);
    }
    let s2 = propagation_matrix(&a, 2).unwrap();
    assert_eq!(s2.nnz(), 2);
    assert_eq!((s2.get(0, 2), s2.get(2, 0)), (0.5, 0.5));
    assert_eq!(power_diagonal(&a, 2), vec![0.5, 1.0, 0.5]);
}

#[test]
fn isolated_nodes_propagate_to_zero() {
    let (g, _) = Graph::new(1, [(0, 1)], vec![Some(0); 4], vec![Split::Train; 4], None).unwrap();
    let a = normalized_adjacency(&g);
    let m = DenseMatrix::from_vec(4, 2, vec![1.0; 8]).unwrap();
    for k in 1..=4 {
        let out = propagate(&a, &m, k).unwrap();
        assert_eq!(out.row(2), &[0.0, 0.0]);
        assert_eq!(out.row(3), &[0.0, 0.0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagate_is_linear(seed in any::<u64>(), k in 1usize..=5, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 12, 0.3, 2);
        let a = normalized_adjacency(&g);
        let m = random_dense(&mut r, 12, 3);
        let n = random_dense(&mut r, 12, 3);
        let combo = DenseMatrix::from_vec(
            12,
            3,
            m.as_slice().iter().zip(n.as_slice()).map(|(x, y)| alpha * x + beta * y).collect(),
        )
        .unwrap();
        let lhs = propagate(&a, &combo, k).unwrap();
        let pm = propagate(&a, &m, k).unwrap();
        let pn = propagate(&a, &n, k).unwrap();
        for i in 0..lhs.as_slice().len() {
            let rhs = alpha * pm.as_slice()[i] + beta * pn.as_slice()[i];
            prop_assert!((lhs.as_slice()[i] - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn all_hops_equal_individual_hops(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 9, 0.35, 2);
        let a = normalized_adjacency(&g);
        let m = random_dense(&mut r, 9, 2);
        let hops = Propagator::new(&a, 5).unwrap().all_hops(&m).unwrap();
        for (i, hop) in hops.iter().enumerate() {
            prop_assert_eq!(hop, &propagate(&a, &m, i + 1).unwrap());
        }
    }
}
