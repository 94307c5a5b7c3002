mod common;

use common::*;

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..10 {
        let p = 3 + (seed as usize % 4);
        let err = gradient_fd_error(seed, p);
        assert!(err < 1e-5, "seed {seed} p {p}: relative error {err:e}");
    }
}

#[test]
fn psi_update_solves_block_system() {
    for seed in 0..25 {
        let p = 3 + (seed as usize % 6);
        let err = psi_stationarity_error(100 + seed, p);
        assert!(err < 1e-10, "seed {seed} p {p}: residual {err:e}");
    }
}

#[test]
fn prox_matches_numeric_minimizer() {
    let err = prox_error(7, 50);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn numeric_prox_sanity() {
    // the oracle itself, on hand-checked cases
    let x = numeric_prox(&[3.0, 4.0], 1.0);
    assert!((x[0] - 2.4).abs() < 1e-10 && (x[1] - 3.2).abs() < 1e-10, "{x:?}");
    assert_eq!(numeric_prox(&[0.3, 0.4], 1.0), vec![0.0, 0.0]);
}

#[test]
fn rand_index_matches_contingency_formula() {
    for p in 2..=5 {
        let (err, count) = rand_index_error(p);
        assert!(err < 1e-15, "p {p}: {err:e}");
        assert_eq!(count, all_partitions(p).len().pow(2));
    }
    // Bell numbers
    let bell: Vec<usize> = (1..=6).map(|p| all_partitions(p).len()).collect();
    assert_eq!(bell, vec![1, 2, 5, 15, 52, 203]);
}

#[test]
fn contingency_formula_hand_case() {
    // {1,2},{3} vs {1},{2,3}: pairs 12 disagree, 13 agree, 23 disagree
    assert!((contingency_rand_index(&[1, 1, 2], &[1, 2, 2]) - 1.0 / 3.0).abs() < 1e-15);
}
