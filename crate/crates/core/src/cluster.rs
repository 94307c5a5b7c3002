//! Partitions, cluster extraction from fitted centroid blocks, the Rand
//! Index, and regularization paths over the fusion parameter.

use serde::{Deserialize, Serialize};

use crate::admm::{fit, AdmmConfig, AdmmState};
use crate::error::{CggmError, Result};
use crate::fusion::{column_difference_norm, CentroidBlock, FusionStructure};
use crate::matrix::SymMatrix;

/// Cluster labels `1..=k` for `p` variables, every label in use.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Validates labels that already form the contiguous range `1..=k`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; k + 1];
        for &l in &labels {
            if l == 0 {
                return Err(CggmError::InvalidConfig("cluster labels start at 1".into()));
            }
            used[l] = true;
        }
        if used[1..].iter().any(|u| !u) {
            return Err(CggmError::InvalidConfig(format!(
                "cluster labels must cover 1..={k} without gaps"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Relabels arbitrary ids into `1..=k`, numbered by first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|id| {
                let next = seen.len() + 1;
                *seen.entry(id.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: seen.len(),
        }
    }

    pub fn singletons(p: usize) -> Self {
        Self {
            labels: (1..=p).collect(),
            k: p,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }

    /// One-hot `p x k` membership matrix.
    pub fn indicator(&self) -> Vec<Vec<u8>> {
        self.labels
            .iter()
            .map(|&l| (1..=self.k).map(|c| u8::from(c == l)).collect())
            .collect()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = CggmError;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Canonical partition of the components.
    pub fn partition(&mut self) -> Partition {
        let roots: Vec<usize> = (0..self.parent.len()).map(|x| self.find(x)).collect();
        Partition::from_labels(&roots)
    }
}

/// Default relative tolerance for declaring a pair fused.
pub const DEFAULT_FUSION_TOL: f64 = 1e-3;

/// Whether a fitted block counts as fused at relative tolerance `rel_tol`.
pub fn is_fused(block: &CentroidBlock, rel_tol: f64) -> bool {
    column_difference_norm(block.as_slice()) <= rel_tol * block.frobenius_norm().max(1.0)
}

/// Connected components of the graph whose edges are the fused pairs.
pub fn extract_clusters(
    psi_hat: &[CentroidBlock],
    p: usize,
    fusion: &FusionStructure,
    rel_tol: f64,
) -> Result<Partition> {
    if psi_hat.len() != fusion.len() || fusion.p() != p {
        return Err(CggmError::ShapeMismatch(
            "centroid blocks are not keyed by the fusion set".into(),
        ));
    }
    let mut uf = UnionFind::new(p);
    for block in psi_hat {
        if is_fused(block, rel_tol) {
            uf.union(block.pair().i(), block.pair().j());
        }
    }
    Ok(uf.partition())
}

/// Fraction of variable pairs on which `a` and `b` agree about
/// co-membership.
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.p() != b.p() {
        return Err(CggmError::ShapeMismatch(format!(
            "partitions cover {} and {} variables",
            a.p(),
            b.p()
        )));
    }
    let p = a.p();
    if p < 2 {
        return Err(CggmError::Undefined);
    }
    let mut agree = 0usize;
    for x in 0..p {
        for y in (x + 1)..p {
            if a.same_cluster(x, y) == b.same_cluster(x, y) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (p * (p - 1) / 2) as f64)
}

/// One fitted point on a regularization path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub partition: Partition,
    pub num_clusters: usize,
    pub converged: bool,
    pub objective: f64,
    pub iterations: usize,
}

/// Path export record, labels 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub lambda: f64,
    pub num_clusters: usize,
    pub labels: Vec<usize>,
    pub objective: f64,
    pub converged: bool,
}

impl From<&PathPoint> for PathRecord {
    fn from(pt: &PathPoint) -> Self {
        Self {
            lambda: pt.lambda,
            num_clusters: pt.num_clusters,
            labels: pt.partition.labels().to_vec(),
            objective: pt.objective,
            converged: pt.converged,
        }
    }
}

/// Spacing of a penalty grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// Ascending grid of `count` values from `min` to `max`.
pub fn lambda_grid(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(CggmError::InvalidConfig("grid must have at least one point".into()));
    }
    if !(min.is_finite() && max.is_finite()) || min < 0.0 || max < min {
        return Err(CggmError::InvalidConfig(format!(
            "grid bounds must satisfy 0 <= min <= max, got {min}:{max}"
        )));
    }
    if spacing == Spacing::Log && min <= 0.0 {
        return Err(CggmError::InvalidConfig("log grids need min > 0".into()));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let step = (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / step;
            match spacing {
                Spacing::Linear => min + t * (max - min),
                Spacing::Log => (min.ln() + t * (max.ln() - min.ln())).exp(),
            }
        })
        .collect())
}

/// Fits every `lambda` in `grid` in order, warm-starting each fit from the
/// previous solution.
pub fn lambda_path(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    grid: &[f64],
    base_config: &AdmmConfig,
    rel_tol: f64,
) -> Result<Vec<PathPoint>> {
    lambda_path_with(sigma_hat, fusion, grid, base_config, rel_tol, |_| {})
}

/// [`lambda_path`] with a callback after each point.
pub fn lambda_path_with(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    grid: &[f64],
    base_config: &AdmmConfig,
    rel_tol: f64,
    on_point: impl FnMut(&PathPoint),
) -> Result<Vec<PathPoint>> {
    run_path(sigma_hat, fusion, grid, base_config, rel_tol, None, on_point)
}

/// Extra fits spent per bracket when refining toward a target cluster count.
pub const MAX_REFINEMENTS: usize = 8;

/// [`lambda_path_with`] that also aims for a point with exactly `k_target`
/// clusters. When two consecutive grid points bracket `k_target` without
/// hitting it, up to [`MAX_REFINEMENTS`] warm-started fits bisect the gap
/// (geometrically when both ends are positive). Refined points are inserted
/// into the returned path in `lambda` order.
pub fn lambda_path_targeting(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    grid: &[f64],
    base_config: &AdmmConfig,
    rel_tol: f64,
    k_target: usize,
    on_point: impl FnMut(&PathPoint),
) -> Result<Vec<PathPoint>> {
    run_path(sigma_hat, fusion, grid, base_config, rel_tol, Some(k_target), on_point)
}

fn fit_point(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    config: &AdmmConfig,
    rel_tol: f64,
    warm: Option<AdmmState>,
) -> Result<(PathPoint, AdmmState)> {
    let res = fit(sigma_hat, fusion, config, warm)?;
    let partition = extract_clusters(&res.psi_hat, fusion.p(), fusion, rel_tol)?;
    let point = PathPoint {
        lambda: config.lambda,
        num_clusters: partition.k(),
        partition,
        converged: res.converged,
        objective: res.final_objective().unwrap_or(f64::NAN),
        iterations: res.iterations,
    };
    Ok((point, res.state))
}

fn run_path(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    grid: &[f64],
    base_config: &AdmmConfig,
    rel_tol: f64,
    k_target: Option<usize>,
    mut on_point: impl FnMut(&PathPoint),
) -> Result<Vec<PathPoint>> {
    if grid.is_empty() {
        return Err(CggmError::InvalidConfig("empty lambda grid".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid[0] < 0.0 {
        return Err(CggmError::InvalidConfig(
            "lambda grid must be nonnegative and ascending".into(),
        ));
    }
    let mut warm: Option<AdmmState> = None;
    let mut out: Vec<PathPoint> = Vec::with_capacity(grid.len());
    let mut hit = false;
    for &lambda in grid {
        let prev = warm.clone();
        let (point, state) = fit_point(sigma_hat, fusion, &base_config.with_lambda(lambda), rel_tol, warm.take())?;
        if let (Some(k), Some(last), Some(lo_state)) = (k_target, out.last(), prev) {
            hit |= last.num_clusters == k;
            if !hit && last.num_clusters > k && point.num_clusters < k {
                let (lo, hi) = (last.lambda, point.lambda);
                let refined = bisect_for_k(sigma_hat, fusion, base_config, rel_tol, k, lo, hi, lo_state, &mut on_point)?;
                hit = refined.iter().any(|pt| pt.num_clusters == k);
                out.extend(refined);
            }
        }
        on_point(&point);
        out.push(point);
        warm = Some(state);
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn bisect_for_k(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    base_config: &AdmmConfig,
    rel_tol: f64,
    k: usize,
    mut lo: f64,
    mut hi: f64,
    mut lo_state: AdmmState,
    on_point: &mut impl FnMut(&PathPoint),
) -> Result<Vec<PathPoint>> {
    let mut refined = Vec::new();
    for _ in 0..MAX_REFINEMENTS {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let (point, state) = fit_point(sigma_hat, fusion, &base_config.with_lambda(mid), rel_tol, Some(lo_state.clone()))?;
        on_point(&point);
        let found = point.num_clusters;
        refined.push(point);
        if found == k {
            break;
        } else if found > k {
            lo = mid;
            lo_state = state;
        } else {
            hi = mid;
        }
    }
    Ok(refined)
}

/// Largest-lambda point with exactly `k_target` clusters; failing that, the
/// point closest in cluster count, ties toward larger lambda.
pub fn select_by_k(path: &[PathPoint], k_target: usize) -> Option<&PathPoint> {
    path.iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            let da = a.num_clusters.abs_diff(k_target);
            let db = b.num_clusters.abs_diff(k_target);
            da.cmp(&db)
                .then(b.lambda.total_cmp(&a.lambda))
                .then(ib.cmp(ia))
        })
        .map(|(_, pt)| pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::PairIndex;

    fn block(pair: PairIndex, a: &[f64], b: &[f64]) -> CentroidBlock {
        CentroidBlock::from_columns(pair, a, b).unwrap()
    }

    #[test]
    fn canonical_labels() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.labels(), &[1, 2, 1, 3]);
        assert_eq!(p.k(), 3);
        assert_eq!(p.sizes(), vec![2, 1, 1]);
    }

    #[test]
    fn new_validates_labels() {
        assert!(Partition::new(vec![2, 1, 2]).is_ok());
        assert!(Partition::new(vec![1, 3]).is_err());
        assert!(Partition::new(vec![0, 1]).is_err());
        let json: std::result::Result<Partition, _> = serde_json::from_str("[1, 3]");
        assert!(json.is_err());
    }

    #[test]
    fn extract_all_and_none() {
        let p = 4;
        let f = FusionStructure::uniform(p).unwrap();
        let fused: Vec<_> = f.fusion_set().iter().map(|&l| block(l, &[0.5, 0.2], &[0.5, 0.2])).collect();
        assert_eq!(extract_clusters(&fused, p, &f, 1e-3).unwrap().k(), 1);
        let apart: Vec<_> = f.fusion_set().iter().map(|&l| block(l, &[1.0, 0.0], &[0.0, 1.0])).collect();
        assert_eq!(extract_clusters(&apart, p, &f, 1e-3).unwrap(), Partition::singletons(4));
    }

    #[test]
    fn extract_uses_transitivity() {
        let p = 4;
        let f = FusionStructure::uniform(p).unwrap();
        let fused_pairs = [(0, 1), (1, 2)];
        let blocks: Vec<_> = f
            .fusion_set()
            .iter()
            .map(|&l| {
                if fused_pairs.contains(&(l.i(), l.j())) {
                    block(l, &[0.3, 0.3], &[0.3, 0.3])
                } else {
                    block(l, &[0.9, 0.0], &[0.0, 0.9])
                }
            })
            .collect();
        let part = extract_clusters(&blocks, p, &f, 1e-3).unwrap();
        assert_eq!(part.labels(), &[1, 1, 1, 2]);
    }

    #[test]
    fn rand_index_examples() {
        let a = Partition::new(vec![1, 1, 2]).unwrap();
        let b = Partition::new(vec![1, 2, 2]).unwrap();
        assert!((rand_index(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        let relabeled = Partition::from_labels(&["x", "x", "y"]);
        assert_eq!(rand_index(&relabeled, &b).unwrap(), rand_index(&a, &b).unwrap());
        let one = Partition::new(vec![1]).unwrap();
        assert!(matches!(rand_index(&one, &one), Err(CggmError::Undefined)));
    }

    fn pt(lambda: f64, k: usize) -> PathPoint {
        PathPoint {
            lambda,
            partition: Partition::singletons(k),
            num_clusters: k,
            converged: true,
            objective: 0.0,
            iterations: 1,
        }
    }

    #[test]
    fn select_by_k_rules() {
        let path = vec![pt(0.1, 50), pt(0.2, 3), pt(0.3, 3), pt(0.4, 1)];
        assert_eq!(select_by_k(&path, 3).unwrap().lambda, 0.3);
        let path = vec![pt(0.1, 50), pt(0.2, 4), pt(0.3, 2), pt(0.4, 1)];
        assert_eq!(select_by_k(&path, 3).unwrap().lambda, 0.3);
        let path = vec![pt(0.1, 7)];
        assert_eq!(select_by_k(&path, 3).unwrap().lambda, 0.1);
        assert!(select_by_k(&[], 3).is_none());
    }

    #[test]
    fn grids() {
        let g = lambda_grid(0.0, 1.0, 5, Spacing::Linear).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = lambda_grid(0.01, 1.0, 3, Spacing::Log).unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!((g[2] - 1.0).abs() < 1e-15);
        assert!(lambda_grid(0.0, 1.0, 3, Spacing::Log).is_err());
        assert!(lambda_grid(1.0, 0.5, 3, Spacing::Linear).is_err());
        assert!(lambda_grid(0.0, 1.0, 0, Spacing::Linear).is_err());
    }

    #[test]
    fn path_rejects_bad_grids() {
        let f = FusionStructure::uniform(3).unwrap();
        let s = SymMatrix::identity(3);
        let cfg = AdmmConfig::default();
        assert!(lambda_path(&s, &f, &[], &cfg, 1e-3).is_err());
        assert!(lambda_path(&s, &f, &[0.5, 0.1], &cfg, 1e-3).is_err());
    }
}
