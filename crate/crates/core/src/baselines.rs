//! Reference clusterers over variables: k-means on column profiles and
//! Ward hierarchical clustering on a dissimilarity matrix.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::error::{CggmError, Result};
use crate::preprocess::Dataset;

const KMEANS_MAX_ITERS: usize = 300;

/// Symmetric, nonnegative, zero-diagonal dissimilarities between variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    entries: DMatrix<f64>,
}

impl DissimilarityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let p = entries.nrows();
        if entries.ncols() != p {
            return Err(CggmError::ShapeMismatch("dissimilarity matrix must be square".into()));
        }
        for i in 0..p {
            if entries[(i, i)] != 0.0 {
                return Err(CggmError::InvalidConfig(format!("nonzero diagonal at {}", i + 1)));
            }
            for j in 0..i {
                let v = entries[(i, j)];
                if v != entries[(j, i)] || !(v >= 0.0) {
                    return Err(CggmError::InvalidConfig(format!(
                        "entry ({}, {}) must be symmetric and nonnegative",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.entries * c)
    }
}

/// Euclidean distance between data columns.
pub fn euclidean_dissimilarity(data: &Dataset) -> DissimilarityMatrix {
    let x = data.values();
    let p = x.ncols();
    let mut d = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let v = (x.column(a) - x.column(b)).norm();
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    DissimilarityMatrix { entries: d }
}

/// `1 - |r|` with `r` the Pearson correlation of two columns.
pub fn correlation_dissimilarity(data: &Dataset) -> Result<DissimilarityMatrix> {
    let x = data.values();
    let (n, p) = x.shape();
    let mut centered = x.clone();
    for (c, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm == 0.0 {
            return Err(CggmError::DegenerateColumn(c + 1));
        }
        col /= norm;
    }
    let mut d = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let r = centered.column(a).dot(&centered.column(b)).clamp(-1.0, 1.0);
            let v = (1.0 - r.abs()).max(0.0);
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    Ok(DissimilarityMatrix { entries: d })
}

/// Agglomerative clustering with Ward linkage, cut at `k` clusters.
///
/// Merge costs are tracked on squared dissimilarities through the
/// Lance-Williams recurrence. Ties go to the lexicographically smallest pair
/// of cluster representatives (the smallest member index of each cluster).
pub fn ward_cluster(d: &DissimilarityMatrix, k: usize) -> Result<Partition> {
    let p = d.dim();
    if k == 0 || k > p {
        return Err(CggmError::InvalidK { k, p });
    }
    let mut cost = d.entries.map(|v| v * v);
    let mut size = vec![1usize; p];
    let mut active = vec![true; p];
    let mut owner: Vec<usize> = (0..p).collect();
    let mut clusters = p;

    while clusters > k {
        let mut best: Option<(usize, usize)> = None;
        let mut best_cost = f64::INFINITY;
        for a in (0..p).filter(|&a| active[a]) {
            for b in ((a + 1)..p).filter(|&b| active[b]) {
                if cost[(a, b)] < best_cost {
                    best_cost = cost[(a, b)];
                    best = Some((a, b));
                }
            }
        }
        let (a, b) = best.expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for c in (0..p).filter(|&c| active[c] && c != a && c != b) {
            let nc = size[c] as f64;
            let updated = ((na + nc) * cost[(a, c)] + (nb + nc) * cost[(b, c)] - nc * cost[(a, b)])
                / (na + nb + nc);
            cost[(a, c)] = updated;
            cost[(c, a)] = updated;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
        clusters -= 1;
    }
    Ok(Partition::from_labels(&owner))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub partition: Partition,
    /// Within-cluster sum of squares of the winning restart.
    pub wcss: f64,
    /// WCSS after every Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

/// k-means over the `p` column profiles of `data`, best of `restarts`
/// k-means++ initializations.
pub fn kmeans_cluster<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    rng: &mut R,
    restarts: usize,
) -> Result<Partition> {
    Ok(kmeans_fit(data, k, rng, restarts)?.partition)
}

pub fn kmeans_fit<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    rng: &mut R,
    restarts: usize,
) -> Result<KMeansFit> {
    let x = data.values();
    let p = x.ncols();
    if k == 0 || k > p {
        return Err(CggmError::InvalidK { k, p });
    }
    let points: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = lloyd(&points, k, rng);
        if best.as_ref().is_none_or(|b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|pt| sq_dist(pt, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[idx].clone());
        for (n, pt) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(pt, centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> KMeansFit {
    let dim = points[0].len();
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut assign = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (a, pt) in assign.iter_mut().zip(points) {
            let nearest = (0..k)
                .min_by(|&x, &y| sq_dist(pt, &centers[x]).total_cmp(&sq_dist(pt, &centers[y])))
                .unwrap();
            if *a != nearest {
                *a = nearest;
                changed = true;
            }
        }
        // refill any empty cluster with the point farthest from its center
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&x, &y| {
                        sq_dist(&points[x], &centers[assign[x]])
                            .total_cmp(&sq_dist(&points[y], &centers[assign[y]]))
                    })
                    .unwrap();
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (pt, &a) in points.iter().zip(&assign) {
            for (s, v) in sums[a].iter_mut().zip(pt) {
                *s += v;
            }
        }
        for (c, s) in sums.into_iter().enumerate() {
            centers[c] = s.into_iter().map(|v| v / counts[c] as f64).collect();
        }
        let wcss: f64 = points
            .iter()
            .zip(&assign)
            .map(|(pt, &a)| sq_dist(pt, &centers[a]))
            .sum();
        trace.push(wcss);
        if !changed {
            break;
        }
    }
    KMeansFit {
        partition: Partition::from_labels(&assign),
        wcss: *trace.last().unwrap(),
        trace,
    }
}
