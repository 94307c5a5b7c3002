mod common;

use cggm::baselines::{correlation_dissimilarity, euclidean_dissimilarity, kmeans_cluster, kmeans_fit, ward_cluster};
use cggm::cluster::rand_index;
use cggm::preprocess::{
    ar1_prewhiten, center_columns, empirical_covariance, lag1_autocorrelation, nonparanormal_transform,
    run_pipeline, winsorization_level, Dataset, Step,
};
use cggm::synthetic::{generate_ground_truth, rng_from_seed, sample_gaussian, scenario, simulate, Scenario};
use common::{ar1_series, skewness};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;

#[test]
fn sample_covariance_converges_to_truth() {
    let truth = generate_ground_truth(8, &[2, 3, 3], &mut rng_from_seed(4)).unwrap();
    let data = sample_gaussian(&truth.precision, 40_000, &mut rng_from_seed(5)).unwrap();
    let s = empirical_covariance(&center_columns(&data)).unwrap();
    let cov = truth.precision.inverse().unwrap();
    let rel = (s.as_matrix() - cov.as_matrix()).norm() / cov.frobenius_norm();
    // Monte Carlo error is O(1/sqrt(n)) ~ 0.005
    assert!(rel < 0.03, "{rel}");
}

#[test]
fn precision_has_checkerboard_blocks() {
    let truth = generate_ground_truth(9, &[2, 3, 4], &mut rng_from_seed(1)).unwrap();
    let labels = truth.membership.labels();
    assert_eq!(truth.membership.sizes(), vec![2, 3, 4]);
    for i in 0..9 {
        assert_eq!(truth.precision.get(i, i), 1.0);
        for j in 0..9 {
            if i != j {
                let b = truth.block_matrix[labels[i] - 1][labels[j] - 1];
                assert_eq!(truth.precision.get(i, j), b);
            }
        }
    }
    assert!(truth.precision.is_positive_definite());
}

#[test]
fn scenarios_have_documented_shapes() {
    let (truth, data) = scenario(Scenario::I, &mut rng_from_seed(0)).unwrap();
    assert_eq!((data.n(), data.p()), (110, 50));
    assert_eq!(truth.sizes, vec![5, 15, 30]);
    let (a, _) = simulate(&[2, 2, 2], 10, &mut rng_from_seed(9)).unwrap();
    let (b, _) = simulate(&[2, 2, 2], 10, &mut rng_from_seed(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn prewhitening_removes_ar1_dependence() {
    let x = ar1_series(10_000, 2, 0.8, &mut rng_from_seed(11));
    let raw = lag1_autocorrelation(&x.column(0).iter().copied().collect::<Vec<_>>());
    assert!((raw - 0.8).abs() < 0.03, "{raw}");
    let w = ar1_prewhiten(&Dataset::new(x)).unwrap();
    assert_eq!(w.n(), 9_999);
    for c in 0..2 {
        let r = lag1_autocorrelation(&w.values().column(c).iter().copied().collect::<Vec<_>>());
        assert!(r.abs() <= 0.05, "column {c}: {r}");
    }
}

#[test]
fn nonparanormal_removes_skew() {
    let mut rng = rng_from_seed(12);
    let x = DMatrix::from_fn(10_000, 2, |_, _| rng.sample::<f64, _>(Exp1));
    let before = skewness(&x.column(0).iter().copied().collect::<Vec<_>>());
    assert!(before > 1.5, "{before}");
    let t = nonparanormal_transform(&Dataset::new(x)).unwrap();
    for c in 0..2 {
        let s = skewness(&t.values().column(c).iter().copied().collect::<Vec<_>>());
        assert!(s.abs() <= 0.1, "column {c}: {s}");
    }
}

#[test]
fn nonparanormal_is_rank_based() {
    let mut rng = rng_from_seed(13);
    let x = DMatrix::from_fn(500, 1, |_, _| rng.random_range(-1.0..1.0));
    let y = x.map(|v: f64| v.powi(3) * 10.0 + 4.0);
    let tx = nonparanormal_transform(&Dataset::new(x)).unwrap();
    let ty = nonparanormal_transform(&Dataset::new(y)).unwrap();
    assert!((tx.values() - ty.values()).amax() < 1e-12);
    assert!(winsorization_level(500) > 0.0 && winsorization_level(500) < 0.5);
}

#[test]
fn pipeline_runs_in_fixed_order() {
    let x = ar1_series(300, 3, 0.5, &mut rng_from_seed(14));
    let data = Dataset::new(x);
    let a = run_pipeline(&data, &[Step::Center, Step::Npn, Step::Whiten]).unwrap();
    let b = run_pipeline(&data, &[Step::Whiten, Step::Npn, Step::Center]).unwrap();
    assert_eq!(a, b);
    assert!(a.is_centered());
}

#[test]
fn baselines_recover_separated_groups() {
    // three groups of columns around distinct mean offsets
    let mut rng = rng_from_seed(15);
    let x = DMatrix::from_fn(30, 9, |_, j| (j / 3) as f64 * 10.0 + rng.random_range(-0.5..0.5));
    let data = Dataset::new(x);
    let truth = cggm::cluster::Partition::from_labels(&[0, 0, 0, 1, 1, 1, 2, 2, 2]);
    let ward = ward_cluster(&euclidean_dissimilarity(&data), 3).unwrap();
    assert_eq!(rand_index(&ward, &truth).unwrap(), 1.0);
    let km = kmeans_cluster(&data, 3, &mut rng_from_seed(1), 5).unwrap();
    assert_eq!(rand_index(&km, &truth).unwrap(), 1.0);
}

#[test]
fn kmeans_is_deterministic_and_monotone() {
    let (_, data) = scenario(Scenario::I, &mut rng_from_seed(3)).unwrap();
    let a = kmeans_fit(&data, 3, &mut rng_from_seed(8), 4).unwrap();
    let b = kmeans_fit(&data, 3, &mut rng_from_seed(8), 4).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()));
}

#[test]
fn correlation_dissimilarity_is_sign_blind() {
    let mut rng = rng_from_seed(16);
    let mut x = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
    let flipped: Vec<f64> = x.column(0).iter().map(|v| -2.0 * v + 1.0).collect();
    x.set_column(1, &nalgebra::DVector::from_vec(flipped));
    let d = correlation_dissimilarity(&Dataset::new(x)).unwrap();
    assert!(d.get(0, 1) < 1e-12);
    assert!(d.get(0, 2) > 0.0);
}
