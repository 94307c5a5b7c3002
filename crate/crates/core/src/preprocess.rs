//! Observation matrices and the real-data preprocessing chain: AR(1)
//! prewhitening, nonparanormal transform, centering, empirical covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CggmError, Result};
use crate::matrix::SymMatrix;

/// An `n x p` observation matrix (rows are samples, columns are variables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: DMatrix<f64>,
    centered: bool,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>) -> Self {
        Self {
            values,
            centered: false,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(CggmError::DimensionMismatch {
                expected: p,
                got: bad.len(),
            });
        }
        Ok(Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j])))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

/// Subtracts each column's mean.
pub fn center_columns(data: &Dataset) -> Dataset {
    let mut values = data.values.clone();
    let n = values.nrows() as f64;
    for mut col in values.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    Dataset {
        values,
        centered: true,
    }
}

/// `(1/n) X^T X`, one triangle computed and mirrored.
pub fn empirical_covariance(data: &Dataset) -> Result<SymMatrix> {
    if !data.centered {
        return Err(CggmError::NotCentered);
    }
    let x = &data.values;
    let (n, p) = x.shape();
    let mut s = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = x.column(a).dot(&x.column(b)) / n as f64;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    SymMatrix::new(s)
}

/// Lag-1 Yule-Walker coefficient of one series.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = x
        .windows(2)
        .map(|w| (w[1] - mean) * (w[0] - mean))
        .sum();
    num / denom
}

/// Replaces each column with its AR(1) residuals `x_t - phi * x_{t-1}`,
/// dropping the first row.
pub fn ar1_prewhiten(data: &Dataset) -> Result<Dataset> {
    let (n, p) = data.values.shape();
    if n < 3 {
        return Err(CggmError::ShapeMismatch(format!(
            "prewhitening needs at least 3 rows, got {n}"
        )));
    }
    let mut out = DMatrix::zeros(n - 1, p);
    for c in 0..p {
        let col: Vec<f64> = data.values.column(c).iter().copied().collect();
        if col.iter().all(|&v| v == col[0]) {
            return Err(CggmError::DegenerateColumn(c + 1));
        }
        let phi = lag1_autocorrelation(&col);
        for t in 1..n {
            out[(t - 1, c)] = col[t] - phi * col[t - 1];
        }
    }
    Ok(Dataset::new(out))
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Truncation level `1 / (4 n^{1/4} sqrt(pi log n))` of the winsorized
/// nonparanormal estimator.
pub fn winsorization_level(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * n.powf(0.25) * (std::f64::consts::PI * n.ln()).sqrt())
}

/// Rank-based Gaussianization of every column, rescaled to unit sample
/// variance.
pub fn nonparanormal_transform(data: &Dataset) -> Result<Dataset> {
    let (n, p) = data.values.shape();
    if n < 2 {
        return Err(CggmError::ShapeMismatch(format!(
            "nonparanormal transform needs at least 2 rows, got {n}"
        )));
    }
    let normal = Normal::standard();
    let delta = winsorization_level(n);
    let mut out = DMatrix::zeros(n, p);
    for c in 0..p {
        let col: Vec<f64> = data.values.column(c).iter().copied().collect();
        let ranks = average_ranks(&col);
        let z: Vec<f64> = ranks
            .iter()
            .map(|r| {
                let u = (r / (n as f64 + 1.0)).clamp(delta, 1.0 - delta);
                normal.inverse_cdf(u)
            })
            .collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        // a column of all ties maps to a constant; leave it unscaled
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for (t, v) in z.into_iter().enumerate() {
            out[(t, c)] = v * scale;
        }
    }
    Ok(Dataset::new(out))
}

/// A preprocessing step selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Whiten,
    Npn,
    Center,
}

impl std::str::FromStr for Step {
    type Err = CggmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "whiten" => Ok(Step::Whiten),
            "npn" => Ok(Step::Npn),
            "center" => Ok(Step::Center),
            other => Err(CggmError::InvalidConfig(format!("unknown preprocessing step `{other}`"))),
        }
    }
}

/// Runs the selected steps in the fixed order whiten, npn, center.
/// Duplicates are ignored.
pub fn run_pipeline(data: &Dataset, steps: &[Step]) -> Result<Dataset> {
    let mut out = data.clone();
    if steps.contains(&Step::Whiten) {
        out = ar1_prewhiten(&out)?;
    }
    if steps.contains(&Step::Npn) {
        out = nonparanormal_transform(&out)?;
    }
    if steps.contains(&Step::Center) {
        out = center_columns(&out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_simple_column() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let c = center_columns(&d);
        assert_eq!(c.values().column(0).as_slice(), &[-1.0, 0.0, 1.0]);
        assert!(c.is_centered());
        let again = center_columns(&c);
        assert_eq!(again.values(), c.values());
    }

    #[test]
    fn covariance_requires_centering() {
        let d = Dataset::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(matches!(empirical_covariance(&d), Err(CggmError::NotCentered)));
        let s = empirical_covariance(&center_columns(&d)).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn orthogonal_columns_give_diagonal_covariance() {
        let d = Dataset::from_rows(&[
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        let s = empirical_covariance(&center_columns(&d)).unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 0), 1.0);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 2.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(ar1_prewhiten(&d), Err(CggmError::DegenerateColumn(2))));
    }

    #[test]
    fn prewhiten_drops_a_row() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![4.0], vec![3.0]]).unwrap();
        let w = ar1_prewhiten(&d).unwrap();
        assert_eq!(w.n(), 3);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 0.0, 0.0, 5.0]), vec![3.0, 1.5, 1.5, 4.0]);
    }

    #[test]
    fn monotone_map_leaves_npn_unchanged() {
        let col: Vec<f64> = (0..40).map(|k| ((k * 17) % 40) as f64 - 7.5).collect();
        let a = Dataset::new(DMatrix::from_column_slice(40, 1, &col));
        let mapped: Vec<f64> = col.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        let b = Dataset::new(DMatrix::from_column_slice(40, 1, &mapped));
        let ta = nonparanormal_transform(&a).unwrap();
        let tb = nonparanormal_transform(&b).unwrap();
        assert_eq!(ta.values(), tb.values());
    }

    #[test]
    fn step_parsing() {
        let steps: Vec<Step> = "whiten,npn,center"
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(steps, vec![Step::Whiten, Step::Npn, Step::Center]);
        assert!("sort".parse::<Step>().is_err());
    }

    #[test]
    fn pipeline_order_is_fixed() {
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![(t * t) as f64, (t % 3) as f64 + 0.1 * t as f64]).collect();
        let d = Dataset::from_rows(&rows).unwrap();
        let forward = run_pipeline(&d, &[Step::Whiten, Step::Npn, Step::Center]).unwrap();
        let reversed = run_pipeline(&d, &[Step::Center, Step::Npn, Step::Whiten]).unwrap();
        assert_eq!(forward.values(), reversed.values());
        assert!(forward.is_centered());
    }
}
