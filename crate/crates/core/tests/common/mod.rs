//! Oracles and instance generators shared by the integration tests and the
//! acceptance harness. Each oracle recomputes its quantity from first
//! principles, independently of the code path under test.
#![allow(dead_code)]

use cggm::admm::{group_prox, initialize, psi_update, theta_gradient, theta_subproblem_objective, AdmmConfig, AdmmState};
use cggm::cluster::{rand_index, Partition};
use cggm::fusion::{CentroidBlock, FusionStructure};
use cggm::SymMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A A^T / p + shift I` with standard-normal-ish `A`.
pub fn random_spd(p: usize, shift: f64, rng: &mut impl Rng) -> SymMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::symmetrize(&a * a.transpose() / p as f64 + DMatrix::identity(p, p) * shift)
}

/// Weights with roughly a third of the pairs switched off (never all).
pub fn random_fusion(p: usize, rng: &mut impl Rng) -> FusionStructure {
    let m = p * (p - 1) / 2;
    let mut w: Vec<f64> = (0..m)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..2.0) })
        .collect();
    w[0] = 1.0;
    FusionStructure::from_weight_vector(p, w).unwrap()
}

/// A state with every ADMM variable filled with random values.
pub fn random_state(p: usize, rng: &mut impl Rng) -> (SymMatrix, FusionStructure, AdmmConfig, AdmmState) {
    let sigma = random_spd(p, 0.5, rng);
    let fusion = random_fusion(p, rng);
    let config = AdmmConfig {
        rho1: rng.random_range(0.05..3.0),
        rho2: rng.random_range(0.05..3.0),
        lambda: rng.random_range(0.0..2.0),
        ..AdmmConfig::default()
    };
    let mut state = initialize(&sigma, &fusion, &config).unwrap();
    state.theta = random_spd(p, 1.0, rng);
    let rows = p - 2;
    let mut noise = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    state.psi = state
        .psi
        .iter()
        .map(|b| CentroidBlock::from_columns(b.pair(), &noise(rows), &noise(rows)).unwrap())
        .collect();
    state.u = state.u.iter().map(|u| noise(u.len())).collect();
    state.delta = state.delta.iter().map(|d| noise(d.len())).collect();
    state.z = state.z.iter().map(|z| noise(z.len())).collect();
    (sigma, fusion, config, state)
}

/// Relative error of `theta_gradient` against symmetric central differences
/// of the subproblem objective along `E_ij + E_ji` (and `E_ii`).
pub fn gradient_fd_error(seed: u64, p: usize) -> f64 {
    let mut r = rng(seed);
    let (sigma, _, config, state) = random_state(p, &mut r);
    let g = theta_gradient(&state, &sigma, &config).unwrap();
    let h = 1e-5;
    let base = state.theta.as_matrix();
    let mut diff_sq = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..p {
        for j in i..p {
            let mut e = DMatrix::zeros(p, p);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let f = |s: f64| {
                let t = SymMatrix::new(base + &e * s).unwrap();
                theta_subproblem_objective(&t, &state, &sigma, &config).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            // <G, E> counts an off-diagonal entry twice
            let analytic = if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) };
            diff_sq += (fd - analytic).powi(2);
            norm_sq += analytic * analytic;
        }
    }
    (diff_sq / norm_sq.max(1e-300)).sqrt()
}

/// Largest residual of the dense block system
/// `(rho1 I + rho2 D^T D) vec(Psi) = rho1 vec(Q Theta R + U) + rho2 D^T (delta - z)`,
/// `D = [I, -I]`, over every pair of a random instance.
pub fn psi_stationarity_error(seed: u64, p: usize) -> f64 {
    let mut r = rng(seed);
    let (_, _, config, state) = random_state(p, &mut r);
    let out = psi_update(&state, &config);
    let theta = state.theta.as_matrix();
    let rows = p - 2;
    let mut d = DMatrix::zeros(rows, 2 * rows);
    for k in 0..rows {
        d[(k, k)] = 1.0;
        d[(k, rows + k)] = -1.0;
    }
    let lhs_op = DMatrix::identity(2 * rows, 2 * rows) * config.rho1 + d.transpose() * &d * config.rho2;
    let mut worst: f64 = 0.0;
    for (l, block) in out.iter().enumerate() {
        let (i, j) = (block.pair().i(), block.pair().j());
        let others: Vec<usize> = (0..p).filter(|&q| q != i && q != j).collect();
        let mut target = DVector::zeros(2 * rows);
        for (k, &q) in others.iter().enumerate() {
            target[k] = theta[(q, i)] + state.u[l][k];
            target[rows + k] = theta[(q, j)] + state.u[l][rows + k];
        }
        let dz = DVector::from_iterator(rows, state.delta[l].iter().zip(&state.z[l]).map(|(a, b)| a - b));
        let rhs = target * config.rho1 + d.transpose() * dz * config.rho2;
        let psi = DVector::from_column_slice(block.as_slice());
        worst = worst.max((&lhs_op * psi - rhs).amax());
    }
    worst
}

fn prox_objective(x: &DVector<f64>, v: &DVector<f64>, t: f64) -> f64 {
    0.5 * (x - v).norm_squared() + t * x.norm()
}

/// Minimizes `0.5 ||x - v||^2 + t ||x||` numerically: damped Newton in the
/// full space from `v`, compared against the kink at the origin.
pub fn numeric_prox(v: &[f64], t: f64) -> Vec<f64> {
    let v = DVector::from_column_slice(v);
    let n = v.len();
    let mut x = v.clone();
    for _ in 0..200 {
        let r = x.norm();
        if r < 1e-300 {
            break;
        }
        let grad = &x - &v + &x * (t / r);
        if grad.norm() < 1e-15 {
            break;
        }
        let hess = DMatrix::identity(n, n) * (1.0 + t / r) - &x * x.transpose() * (t / (r * r * r));
        let step = hess.lu().solve(&grad).unwrap_or(grad.clone());
        let f0 = prox_objective(&x, &v, t);
        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-12 {
            let cand = &x - &step * s;
            if prox_objective(&cand, &v, t) <= f0 {
                x = cand;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let zero = DVector::zeros(n);
    if prox_objective(&zero, &v, t) <= prox_objective(&x, &v, t) {
        x = zero;
    }
    x.iter().copied().collect()
}

/// Largest deviation of `group_prox` from [`numeric_prox`] over `draws`
/// random vectors and thresholds (a share of them below the kink).
pub fn prox_error(seed: u64, draws: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let n = r.random_range(1..=12);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t = norm * r.random_range(0.0..1.5);
        let got = group_prox(&v, t);
        let want = numeric_prox(&v, t);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Every set partition of `0..p` as restricted growth strings.
pub fn all_partitions(p: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, max: usize, p: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == p {
            out.push(prefix.iter().map(|l| l + 1).collect());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            extend(prefix, max.max(l), p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if p > 0 {
        let mut prefix = vec![0];
        extend(&mut prefix, 0, p, &mut out);
    }
    out
}

/// Rand index from the contingency table:
/// `(C(p,2) + 2 sum C(n_ab,2) - sum C(a,2) - sum C(b,2)) / C(p,2)`.
pub fn contingency_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let c2 = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let ka = *a.iter().max().unwrap();
    let kb = *b.iter().max().unwrap();
    let mut table = vec![vec![0usize; kb + 1]; ka + 1];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..=kb).map(|c| c2(table.iter().map(|r| r[c]).sum())).sum();
    let cells: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let total = c2(a.len());
    (total + 2.0 * cells - rows - cols) / total
}

/// Largest gap between `rand_index` and the contingency formula over all
/// pairs of partitions of `p` variables, with the number of pairs checked.
pub fn rand_index_error(p: usize) -> (f64, usize) {
    let parts = all_partitions(p);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for a in &parts {
        let pa = Partition::new(a.clone()).unwrap();
        for b in &parts {
            let pb = Partition::new(b.clone()).unwrap();
            let got = rand_index(&pa, &pb).unwrap();
            worst = worst.max((got - contingency_rand_index(a, b)).abs());
            count += 1;
        }
    }
    (worst, count)
}

/// Sample skewness.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// `n` steps of `x_t = phi x_{t-1} + e_t` per column, started at stationarity.
pub fn ar1_series(n: usize, cols: usize, phi: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let mut m = DMatrix::zeros(n, cols);
    for c in 0..cols {
        let mut x: f64 = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
        for t in 0..n {
            x = phi * x + rng.sample::<f64, _>(StandardNormal);
            m[(t, c)] = x;
        }
    }
    m
}
