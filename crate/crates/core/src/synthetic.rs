//! Ground-truth clustered precision matrices and Gaussian samples.
//!
//! Randomness comes from ChaCha8, a counter-based generator whose streams
//! are stable across platforms for a given seed.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::error::{CggmError, Result};
use crate::matrix::SymMatrix;
use crate::preprocess::Dataset;

pub type SimRng = ChaCha8Rng;

/// Upper bound on redraws of the block matrix when the assembled precision
/// is not positive definite.
pub const MAX_RESAMPLES: usize = 100;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub membership: Partition,
    pub block_matrix: Vec<Vec<f64>>,
    pub precision: SymMatrix,
    pub p: usize,
    pub k: usize,
    pub sizes: Vec<usize>,
}

/// Randomly assigns `p` variables to groups of the given sizes: a uniform
/// permutation is cut into consecutive runs of length `sizes[c]`.
///
/// Cluster `c + 1` of the returned labels has exactly `sizes[c]` members.
pub fn generate_membership<R: Rng + ?Sized>(p: usize, sizes: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    if sizes.is_empty() || sizes.contains(&0) || sizes.iter().sum::<usize>() != p {
        return Err(CggmError::InvalidSizes {
            p,
            sizes: sizes.to_vec(),
        });
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut labels = vec![0; p];
    let mut pos = 0;
    for (c, &size) in sizes.iter().enumerate() {
        for &v in &order[pos..pos + size] {
            labels[v] = c + 1;
        }
        pos += size;
    }
    Ok(labels)
}

/// One-hot form of cluster labels in `1..=k`.
pub fn indicator_matrix(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |r, c| if labels[r] == c + 1 { 1.0 } else { 0.0 })
}

/// Diagonal entries from `U[0.6, 0.95]`, each off-diagonal pair drawn once
/// from `U[0, 0.55]` and mirrored.
pub fn generate_block_matrix<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = rng.random_range(0.6..=0.95);
        for j in (i + 1)..k {
            let v = rng.random_range(0.0..=0.55);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// Off-diagonal of `Z B Z^T` with a unit diagonal.
pub fn generate_precision(z: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SymMatrix> {
    if z.ncols() != b.nrows() || b.nrows() != b.ncols() {
        return Err(CggmError::ShapeMismatch(format!(
            "Z is {}x{} but B is {}x{}",
            z.nrows(),
            z.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut theta = z * b * z.transpose();
    theta.fill_diagonal(1.0);
    let theta = SymMatrix::symmetrize(theta);
    if !theta.is_positive_definite() {
        return Err(CggmError::NotPositiveDefinite);
    }
    Ok(theta)
}

/// Full ground truth for the given sizes, redrawing `B` until the precision
/// is positive definite.
pub fn generate_ground_truth<R: Rng + ?Sized>(p: usize, sizes: &[usize], rng: &mut R) -> Result<GroundTruth> {
    let labels = generate_membership(p, sizes, rng)?;
    let k = sizes.len();
    let z = indicator_matrix(&labels, k);
    for _ in 0..MAX_RESAMPLES {
        let b = generate_block_matrix(k, rng);
        match generate_precision(&z, &b) {
            Ok(precision) => {
                return Ok(GroundTruth {
                    membership: Partition::new(labels.clone())?,
                    block_matrix: (0..k).map(|i| b.row(i).iter().copied().collect()).collect(),
                    precision,
                    p,
                    k,
                    sizes: sizes.to_vec(),
                })
            }
            Err(CggmError::NotPositiveDefinite) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CggmError::ResampleExhausted(MAX_RESAMPLES))
}

/// `n` i.i.d. draws from `N(0, theta^{-1})`: with `theta = L L^T` and
/// `e ~ N(0, I)`, `x = L^{-T} e` has covariance `theta^{-1}`.
pub fn sample_gaussian<R: Rng + ?Sized>(theta: &SymMatrix, n: usize, rng: &mut R) -> Result<Dataset> {
    let p = theta.dim();
    let chol = theta.cholesky()?;
    let e = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&e)
        .ok_or(CggmError::NotPositiveDefinite)?;
    Ok(Dataset::new(x.transpose()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    I,
    II,
}

impl Scenario {
    pub fn n(&self) -> usize {
        match self {
            Scenario::I => 110,
            Scenario::II => 200,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        match self {
            Scenario::I => vec![5, 15, 30],
            Scenario::II => vec![30, 60, 110],
        }
    }

    pub fn p(&self) -> usize {
        self.sizes().iter().sum()
    }
}

impl std::str::FromStr for Scenario {
    type Err = CggmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(Scenario::I),
            "II" | "2" => Ok(Scenario::II),
            other => Err(CggmError::InvalidConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Ground truth and data for arbitrary sizes and sample count.
pub fn simulate<R: Rng + ?Sized>(sizes: &[usize], n: usize, rng: &mut R) -> Result<(GroundTruth, Dataset)> {
    let p = sizes.iter().sum();
    let truth = generate_ground_truth(p, sizes, rng)?;
    let data = sample_gaussian(&truth.precision, n, rng)?;
    Ok((truth, data))
}

pub fn scenario<R: Rng + ?Sized>(which: Scenario, rng: &mut R) -> Result<(GroundTruth, Dataset)> {
    simulate(&which.sizes(), which.n(), rng)
}
