//! Fusion set, pair weights, centroid-block extraction, and the clustered
//! GGM objective.
//!
//! The selection matrices that pick rows `{1..p} \ {i, j}` and columns
//! `{i, j}` out of `Theta`, and the directed difference operator on a
//! centroid block, are never formed. Everything here is index arithmetic.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};
use crate::matrix::SymMatrix;

/// A variable pair `(i, j)` with `i < j`, stored 0-based.
///
/// Files and user-facing output use 1-based indices; convert with
/// [`PairIndex::one_based`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairIndex {
    i: usize,
    j: usize,
}

impl PairIndex {
    pub fn new(i: usize, j: usize, p: usize) -> Result<Self> {
        if i >= j || j >= p {
            return Err(CggmError::InvalidPair { i, j, p });
        }
        Ok(Self { i, j })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn one_based(&self) -> (usize, usize) {
        (self.i + 1, self.j + 1)
    }

    pub fn contains(&self, q: usize) -> bool {
        q == self.i || q == self.j
    }

    /// Position of this pair in the lexicographic enumeration of all
    /// `C(p, 2)` pairs.
    pub fn linear_index(&self, p: usize) -> usize {
        // pairs with first index < i, then offset within row i
        self.i * (2 * p - self.i - 1) / 2 + (self.j - self.i - 1)
    }

    /// The `p - 2` variables outside this pair, in increasing order.
    pub fn others(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (self.i, self.j);
        (0..p).filter(move |&q| q != i && q != j)
    }
}

/// All `C(p, 2)` pairs in lexicographic order.
pub fn all_pairs(p: usize) -> impl Iterator<Item = PairIndex> {
    (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| PairIndex { i, j }))
}

/// How fusion weights are assigned to pairs.
#[derive(Debug, Clone)]
pub enum WeightScheme<'a> {
    /// `w_l = 1` for every pair.
    Uniform,
    /// `w_l = exp(-phi * ||x_i - x_j||^2)` when `j` is among the `neighbors`
    /// nearest columns of `i` or vice versa, else 0.
    GaussianKnn {
        data: &'a DMatrix<f64>,
        neighbors: usize,
        phi: f64,
    },
    /// `GaussianKnn` over the columns of the partial-correlation matrix
    /// implied by `sigma_hat` (see [`partial_correlation_profiles`]), so the
    /// neighbor graph compares the connectivity patterns being fused.
    ProfileKnn {
        sigma_hat: &'a SymMatrix,
        neighbors: usize,
        phi: f64,
    },
    /// User-supplied weights; unlisted pairs get 0.
    Explicit(Vec<(PairIndex, f64)>),
}

/// Fusion weights over all pairs together with the fusion set of pairs
/// carrying a strictly positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionStructure {
    p: usize,
    /// One weight per pair, lexicographic order.
    weights: Vec<f64>,
    fusion_set: Vec<PairIndex>,
    fusion_weights: Vec<f64>,
}

impl FusionStructure {
    /// Builds the structure from a full lexicographic weight vector.
    pub fn from_weight_vector(p: usize, weights: Vec<f64>) -> Result<Self> {
        if p < 3 {
            return Err(CggmError::PenaltyVacuous(p));
        }
        let expected = p * (p - 1) / 2;
        if weights.len() != expected {
            return Err(CggmError::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        let mut fusion_set = Vec::new();
        let mut fusion_weights = Vec::new();
        for (pair, &w) in all_pairs(p).zip(&weights) {
            if !w.is_finite() || w < 0.0 {
                let (i, j) = pair.one_based();
                return Err(CggmError::InvalidWeight { i, j, weight: w });
            }
            if w > 0.0 {
                fusion_set.push(pair);
                fusion_weights.push(w);
            }
        }
        Ok(Self {
            p,
            weights,
            fusion_set,
            fusion_weights,
        })
    }

    pub fn uniform(p: usize) -> Result<Self> {
        if p < 3 {
            return Err(CggmError::PenaltyVacuous(p));
        }
        Self::from_weight_vector(p, vec![1.0; p * (p - 1) / 2])
    }

    pub fn explicit(p: usize, entries: &[(PairIndex, f64)]) -> Result<Self> {
        if p < 3 {
            return Err(CggmError::PenaltyVacuous(p));
        }
        let mut weights = vec![0.0; p * (p - 1) / 2];
        for &(pair, w) in entries {
            if pair.j >= p {
                return Err(CggmError::InvalidPair {
                    i: pair.i,
                    j: pair.j,
                    p,
                });
            }
            if !w.is_finite() || w < 0.0 {
                let (i, j) = pair.one_based();
                return Err(CggmError::InvalidWeight { i, j, weight: w });
            }
            weights[pair.linear_index(p)] = w;
        }
        Self::from_weight_vector(p, weights)
    }

    /// Gaussian-kernel weights restricted to a symmetric k-nearest-neighbor
    /// graph over the columns of `data`.
    pub fn gaussian_knn(data: &DMatrix<f64>, neighbors: usize, phi: f64) -> Result<Self> {
        let p = data.ncols();
        if p < 3 {
            return Err(CggmError::PenaltyVacuous(p));
        }
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(CggmError::InvalidConfig(format!("phi must be >= 0, got {phi}")));
        }
        let mut sq = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in (a + 1)..p {
                let d = (data.column(a) - data.column(b)).norm_squared();
                sq[(a, b)] = d;
                sq[(b, a)] = d;
            }
        }
        let mut is_neighbor = vec![false; p * p];
        for a in 0..p {
            let mut order: Vec<usize> = (0..p).filter(|&b| b != a).collect();
            order.sort_by(|&x, &y| sq[(a, x)].total_cmp(&sq[(a, y)]).then(x.cmp(&y)));
            for &b in order.iter().take(neighbors) {
                is_neighbor[a * p + b] = true;
                is_neighbor[b * p + a] = true;
            }
        }
        let weights = all_pairs(p)
            .map(|l| {
                if is_neighbor[l.i * p + l.j] {
                    (-phi * sq[(l.i, l.j)]).exp()
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_weight_vector(p, weights)
    }

    /// Reads an `i,j,w` CSV with 1-based indices.
    pub fn read_weights_csv<R: Read>(reader: R, p: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            i: usize,
            j: usize,
            w: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "w"] {
            return Err(CggmError::Parse {
                row: 1,
                col: 1,
                msg: format!("expected header `i,j,w`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut entries = Vec::new();
        for (line, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| CggmError::Parse {
                row: line + 2,
                col: 1,
                msg: e.to_string(),
            })?;
            if row.i == 0 || row.j == 0 {
                return Err(CggmError::Parse {
                    row: line + 2,
                    col: 1,
                    msg: "indices are 1-based".into(),
                });
            }
            let pair = PairIndex::new(row.i - 1, row.j - 1, p)?;
            entries.push((pair, row.w));
        }
        Self::explicit(p, &entries)
    }

    pub fn from_weights_file(path: &Path, p: usize) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_weights_csv(f, p)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weight(&self, pair: PairIndex) -> f64 {
        self.weights[pair.linear_index(self.p)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Pairs with strictly positive weight, lexicographic order.
    pub fn fusion_set(&self) -> &[PairIndex] {
        &self.fusion_set
    }

    /// Weights aligned with [`Self::fusion_set`].
    pub fn fusion_weights(&self) -> &[f64] {
        &self.fusion_weights
    }

    pub fn len(&self) -> usize {
        self.fusion_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fusion_set.is_empty()
    }

    /// Returns a copy of `self` with variables relabeled so that variable
    /// `q` becomes `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let p = self.p;
        let mut weights = vec![0.0; self.weights.len()];
        for (pair, &w) in all_pairs(p).zip(&self.weights) {
            let (a, b) = (perm[pair.i], perm[pair.j]);
            let target = PairIndex::new(a.min(b), a.max(b), p)?;
            weights[target.linear_index(p)] = w;
        }
        Self::from_weight_vector(p, weights)
    }
}

/// Dispatches on a [`WeightScheme`].
pub fn build_fusion_structure(p: usize, scheme: &WeightScheme<'_>) -> Result<FusionStructure> {
    match scheme {
        WeightScheme::Uniform => FusionStructure::uniform(p),
        WeightScheme::GaussianKnn {
            data,
            neighbors,
            phi,
        } => {
            if data.ncols() != p {
                return Err(CggmError::DimensionMismatch {
                    expected: p,
                    got: data.ncols(),
                });
            }
            FusionStructure::gaussian_knn(data, *neighbors, *phi)
        }
        WeightScheme::ProfileKnn {
            sigma_hat,
            neighbors,
            phi,
        } => {
            if sigma_hat.dim() != p {
                return Err(CggmError::DimensionMismatch {
                    expected: p,
                    got: sigma_hat.dim(),
                });
            }
            FusionStructure::gaussian_knn(&partial_correlation_profiles(sigma_hat)?, *neighbors, *phi)
        }
        WeightScheme::Explicit(entries) => FusionStructure::explicit(p, entries),
    }
}

/// Partial correlations `-P_ab / sqrt(P_aa P_bb)` of `P = sigma_hat^{-1}`,
/// with a zero diagonal. A singular `sigma_hat` (fewer samples than
/// variables) is first ridged by 1% of its mean variance.
pub fn partial_correlation_profiles(sigma_hat: &SymMatrix) -> Result<DMatrix<f64>> {
    let p = sigma_hat.dim();
    let precision = match sigma_hat.inverse() {
        Ok(inv) => inv.into_matrix(),
        Err(CggmError::NotPositiveDefinite) => {
            let ridge = 1e-2 * sigma_hat.trace() / p as f64;
            let mut m = sigma_hat.as_matrix().clone();
            for d in 0..p {
                m[(d, d)] += ridge;
            }
            SymMatrix::symmetrize(m).inverse()?.into_matrix()
        }
        Err(e) => return Err(e),
    };
    Ok(DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            0.0
        } else {
            -precision[(a, b)] / (precision[(a, a)] * precision[(b, b)]).sqrt()
        }
    }))
}

/// The `(p - 2) x 2` centroid block for one pair, stored column-major so the
/// backing slice is exactly `vec(Psi_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidBlock {
    pair: PairIndex,
    values: Vec<f64>,
}

impl CentroidBlock {
    pub fn zeros(pair: PairIndex, rows: usize) -> Self {
        Self {
            pair,
            values: vec![0.0; 2 * rows],
        }
    }

    /// Builds a block from its two columns.
    pub fn from_columns(pair: PairIndex, first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(CggmError::DimensionMismatch {
                expected: first.len(),
                got: second.len(),
            });
        }
        let mut values = Vec::with_capacity(2 * first.len());
        values.extend_from_slice(first);
        values.extend_from_slice(second);
        Ok(Self { pair, values })
    }

    pub fn pair(&self) -> PairIndex {
        self.pair
    }

    pub fn rows(&self) -> usize {
        self.values.len() / 2
    }

    pub fn first(&self) -> &[f64] {
        &self.values[..self.rows()]
    }

    pub fn second(&self) -> &[f64] {
        &self.values[self.rows()..]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows() + row]
    }

    /// `vec` of the block.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Columns `i` and `j` of `theta`, restricted to the rows outside the pair.
pub fn extract_pair_columns(theta: &SymMatrix, pair: PairIndex) -> CentroidBlock {
    let p = theta.dim();
    let m = theta.as_matrix();
    let rows = p - 2;
    let mut values = vec![0.0; 2 * rows];
    for (r, q) in pair.others(p).enumerate() {
        values[r] = m[(q, pair.i)];
        values[rows + r] = m[(q, pair.j)];
    }
    CentroidBlock { pair, values }
}

/// First column minus second column of a centroid block.
pub fn column_difference(block: &CentroidBlock) -> Vec<f64> {
    block
        .first()
        .iter()
        .zip(block.second())
        .map(|(a, b)| a - b)
        .collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm of the column difference without allocating.
pub(crate) fn column_difference_norm(values: &[f64]) -> f64 {
    let rows = values.len() / 2;
    values[..rows]
        .iter()
        .zip(&values[rows..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `lambda * sum_l w_l ||Psi_l1 - Psi_l2||_2` with `Psi_l` taken straight
/// from `theta`.
pub fn penalty_value(theta: &SymMatrix, fusion: &FusionStructure, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let p = theta.dim();
    let m = theta.as_matrix();
    let sum: f64 = fusion
        .fusion_set()
        .iter()
        .zip(fusion.fusion_weights())
        .map(|(pair, &w)| {
            let sq: f64 = pair
                .others(p)
                .map(|q| {
                    let d = m[(q, pair.i)] - m[(q, pair.j)];
                    d * d
                })
                .sum();
            w * sq.sqrt()
        })
        .sum();
    lambda * sum
}

/// `-log det theta + trace(sigma_hat * theta) + penalty_value(theta)`.
pub fn objective_value(
    theta: &SymMatrix,
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    lambda: f64,
) -> Result<f64> {
    if theta.dim() != sigma_hat.dim() {
        return Err(CggmError::DimensionMismatch {
            expected: theta.dim(),
            got: sigma_hat.dim(),
        });
    }
    let log_det = theta.log_det()?;
    Ok(-log_det + sigma_hat.trace_product(theta) + penalty_value(theta, fusion, lambda))
}
