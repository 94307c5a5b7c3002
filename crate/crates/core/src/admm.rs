//! Three-block ADMM for the clustered GGM.
//!
//! The splitting introduces a copy `Psi_l` of the extracted pair block of
//! `Theta` and a difference variable `delta_l` for every pair `l` in the
//! fusion set. Each outer iteration runs
//!
//! 1. an inner backtracking gradient descent on the smooth `Theta`
//!    subproblem,
//! 2. the closed-form `Psi_l` update,
//! 3. block soft-thresholding for `delta_l`,
//! 4. scaled dual ascent on `U_l` and `z_l`,
//!
//! and stops once primal and dual residuals fall under a combined
//! absolute/relative tolerance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};
use crate::fusion::{
    column_difference, column_difference_norm, extract_pair_columns, norm, objective_value,
    CentroidBlock, FusionStructure, PairIndex,
};
use crate::matrix::{log_det_from_cholesky, SymMatrix};

const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub lambda: f64,
    pub outer_max_iters: usize,
    pub outer_tol_abs: f64,
    pub outer_tol_rel: f64,
    pub inner_max_iters: usize,
    /// Inner loop stops once `||grad||_F <= inner_grad_tol * p`.
    pub inner_grad_tol: f64,
    pub armijo_beta: f64,
    pub armijo_c: f64,
    pub initial_step: f64,
    pub inner_solver: InnerSolver,
}

/// Descent direction used by the inner `Theta` solver.
///
/// `Gradient` is plain steepest descent. `NewtonCg` approximately solves the
/// Newton system with a few preconditioned conjugate-gradient iterations,
/// using exact Hessian-vector products and, as preconditioner, the inverse of
/// `X -> Theta^{-1} X Theta^{-1} + c X` applied in the eigenbasis of the
/// iterate (`c` is the mean curvature the pair terms put on an off-diagonal
/// entry). Both share the Armijo backtracking and stopping rule; on
/// ill-conditioned `Theta` steepest descent can need thousands of steps
/// where Newton-CG needs a handful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerSolver {
    Gradient,
    #[default]
    NewtonCg,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho1: 0.1,
            rho2: 0.1,
            lambda: 0.0,
            outer_max_iters: 2000,
            outer_tol_abs: 1e-5,
            outer_tol_rel: 1e-4,
            inner_max_iters: 100,
            inner_grad_tol: 1e-6,
            armijo_beta: 0.5,
            armijo_c: 1e-4,
            initial_step: 1.0,
            inner_solver: InnerSolver::default(),
        }
    }
}

impl AdmmConfig {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CggmError::InvalidConfig(format!("{name} must be > 0, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(CggmError::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        positive("rho1", self.rho1)?;
        positive("rho2", self.rho2)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CggmError::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.outer_max_iters == 0 || self.inner_max_iters == 0 {
            return Err(CggmError::InvalidConfig("iteration limits must be positive".into()));
        }
        positive("outer_tol_abs", self.outer_tol_abs)?;
        positive("outer_tol_rel", self.outer_tol_rel)?;
        positive("inner_grad_tol", self.inner_grad_tol)?;
        unit("armijo_beta", self.armijo_beta)?;
        unit("armijo_c", self.armijo_c)?;
        positive("initial_step", self.initial_step)
    }
}

/// Primal and dual ADMM variables. All per-pair vectors are aligned with the
/// fusion set the state was initialized from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub theta: SymMatrix,
    pub psi: Vec<CentroidBlock>,
    pub delta: Vec<Vec<f64>>,
    /// Scaled duals for `Q_l Theta R_l = Psi_l`, column-major like `psi`.
    pub u: Vec<Vec<f64>>,
    /// Scaled duals for `D vec(Psi_l) = delta_l`.
    pub z: Vec<Vec<f64>>,
    pub outer_iter: usize,
}

impl AdmmState {
    pub fn p(&self) -> usize {
        self.theta.dim()
    }

    pub fn pairs(&self) -> impl Iterator<Item = PairIndex> + '_ {
        self.psi.iter().map(|b| b.pair())
    }

    fn check_against(&self, fusion: &FusionStructure) -> Result<()> {
        if self.p() != fusion.p() {
            return Err(CggmError::DimensionMismatch {
                expected: fusion.p(),
                got: self.p(),
            });
        }
        if self.psi.len() != fusion.len() || !self.pairs().eq(fusion.fusion_set().iter().copied()) {
            return Err(CggmError::ShapeMismatch(
                "state is not keyed by the fusion set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: SymMatrix,
    pub psi_hat: Vec<CentroidBlock>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_trace: Vec<ResidualRecord>,
    /// Final iterate, usable as a warm start.
    pub state: AdmmState,
}

impl FitResult {
    /// `iter,primal,dual,objective` CSV.
    pub fn residual_trace_csv(&self) -> String {
        let mut out = String::from("iter,primal,dual,objective\n");
        for r in &self.residual_trace {
            out.push_str(&format!("{},{:e},{:e},{}\n", r.iter, r.primal, r.dual, r.objective));
        }
        out
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.residual_trace.last().map(|r| r.objective)
    }
}

/// Cold start: `Theta = I`, `Psi_l` extracted from it, everything else zero.
pub fn initialize(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    config: &AdmmConfig,
) -> Result<AdmmState> {
    config.validate()?;
    let p = fusion.p();
    if sigma_hat.dim() != p {
        return Err(CggmError::DimensionMismatch {
            expected: p,
            got: sigma_hat.dim(),
        });
    }
    let theta = SymMatrix::identity(p);
    let psi: Vec<CentroidBlock> = fusion
        .fusion_set()
        .iter()
        .map(|&l| extract_pair_columns(&theta, l))
        .collect();
    let delta = psi.iter().map(column_difference).collect();
    let m = fusion.len();
    Ok(AdmmState {
        theta,
        psi,
        delta,
        u: vec![vec![0.0; 2 * (p - 2)]; m],
        z: vec![vec![0.0; p - 2]; m],
        outer_iter: 0,
    })
}

/// The smooth `Theta` subproblem with `Psi` and `U` held fixed:
///
/// `h(Theta) = -log det Theta + <S, Theta> + rho1/2 * sum_l ||Q_l Theta R_l - V_l||_F^2`
///
/// with `V_l = Psi_l - U_l`. The quadratic is collapsed into per-entry hit
/// counts `C` and scattered targets `A`, so one evaluation costs `O(p^2)`
/// after a single `O(|M| p)` setup.
struct ThetaSubproblem<'a> {
    sigma_hat: &'a SymMatrix,
    rho1: f64,
    counts: DMatrix<f64>,
    targets: DMatrix<f64>,
    constant: f64,
}

impl<'a> ThetaSubproblem<'a> {
    fn new(state: &AdmmState, sigma_hat: &'a SymMatrix, rho1: f64) -> Self {
        let p = state.p();
        let rows = p.saturating_sub(2);
        let mut counts = DMatrix::zeros(p, p);
        let mut targets = DMatrix::zeros(p, p);
        let mut constant = 0.0;
        for (block, u) in state.psi.iter().zip(&state.u) {
            let pair = block.pair();
            let psi = block.as_slice();
            for (r, q) in pair.others(p).enumerate() {
                let v1 = psi[r] - u[r];
                let v2 = psi[rows + r] - u[rows + r];
                counts[(q, pair.i())] += 1.0;
                counts[(q, pair.j())] += 1.0;
                targets[(q, pair.i())] += v1;
                targets[(q, pair.j())] += v2;
                constant += v1 * v1 + v2 * v2;
            }
        }
        Self {
            sigma_hat,
            rho1,
            counts,
            targets,
            constant,
        }
    }

    fn smooth_part(&self, theta: &DMatrix<f64>) -> f64 {
        let mut quad = 0.0;
        for (k, &t) in theta.iter().enumerate() {
            let c = self.counts[k];
            if c != 0.0 {
                quad += c * t * t - 2.0 * self.targets[k] * t;
            }
        }
        self.sigma_hat.as_matrix().dot(theta) + 0.5 * self.rho1 * (quad + self.constant)
    }

    /// Symmetrized gradient given `theta` and its inverse.
    fn gradient(&self, theta: &DMatrix<f64>, theta_inv: &DMatrix<f64>) -> SymMatrix {
        let mut g = self.sigma_hat.as_matrix() - theta_inv;
        g += (self.counts.component_mul(theta) - &self.targets) * self.rho1;
        SymMatrix::symmetrize(g)
    }

    /// Average curvature the pair terms add to one symmetric off-diagonal
    /// entry, per unit Frobenius norm.
    fn mean_penalty_curvature(&self) -> f64 {
        let p = self.counts.nrows();
        if p < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for a in 0..p {
            for b in 0..p {
                if a != b {
                    total += self.counts[(a, b)];
                }
            }
        }
        self.rho1 * total / (p * (p - 1)) as f64
    }
}

/// Inverse of `X -> Theta^{-1} X Theta^{-1} + c X` in the eigenbasis of
/// `Theta`.
struct Preconditioner {
    vectors: DMatrix<f64>,
    scale: DMatrix<f64>,
}

impl Preconditioner {
    fn new(theta: &DMatrix<f64>, c: f64) -> Self {
        let eig = theta.clone().symmetric_eigen();
        let lam = &eig.eigenvalues;
        let p = lam.len();
        let scale = DMatrix::from_fn(p, p, |a, b| 1.0 / (1.0 / (lam[a] * lam[b]) + c));
        Self {
            vectors: eig.eigenvectors,
            scale,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.vectors;
        let inner = (v.transpose() * x * v).component_mul(&self.scale);
        let d = v * inner * v.transpose();
        (&d + d.transpose()) * 0.5
    }
}

const MAX_CG_ITERS: usize = 50;

/// Truncated Newton direction: preconditioned CG on
/// `H X = Theta^{-1} X Theta^{-1} + rho1 sym(C o X) = G`, stopped at
/// relative residual `min(0.5, sqrt(||G||))`.
fn newton_cg_direction(
    sub: &ThetaSubproblem<'_>,
    theta: &DMatrix<f64>,
    theta_inv: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    curvature: f64,
) -> DMatrix<f64> {
    let pre = Preconditioner::new(theta, curvature);
    let hessian = |x: &DMatrix<f64>| {
        let cx = sub.counts.component_mul(x) * sub.rho1;
        theta_inv * x * theta_inv + (&cx + cx.transpose()) * 0.5
    };
    let g_norm = grad.norm();
    let target = g_norm * g_norm.sqrt().min(0.5);
    let mut d = DMatrix::zeros(grad.nrows(), grad.ncols());
    let mut r = grad.clone();
    let mut z = pre.apply(&r);
    let mut dir = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..MAX_CG_ITERS {
        let hd = hessian(&dir);
        let curv = dir.dot(&hd);
        if curv <= 0.0 {
            break;
        }
        let alpha = rz / curv;
        d += &dir * alpha;
        r -= &hd * alpha;
        if r.norm() <= target {
            break;
        }
        z = pre.apply(&r);
        let rz_next = r.dot(&z);
        dir = &z + &dir * (rz_next / rz);
        rz = rz_next;
    }
    if d.iter().all(|v| *v == 0.0) {
        // degenerate first CG step; fall back to the preconditioned gradient
        return pre.apply(grad);
    }
    d
}

/// Direct evaluation of the `Theta` subproblem objective by extracting every
/// pair block. Quadratic in `|M|` rather than `p`; meant for checking.
pub fn theta_subproblem_objective(
    theta: &SymMatrix,
    state: &AdmmState,
    sigma_hat: &SymMatrix,
    config: &AdmmConfig,
) -> Result<f64> {
    let log_det = theta.log_det()?;
    let mut quad = 0.0;
    for (block, u) in state.psi.iter().zip(&state.u) {
        let extracted = extract_pair_columns(theta, block.pair());
        for ((a, b), c) in extracted.as_slice().iter().zip(block.as_slice()).zip(u) {
            let d = a - b + c;
            quad += d * d;
        }
    }
    Ok(-log_det + sigma_hat.trace_product(theta) + 0.5 * config.rho1 * quad)
}

/// Gradient of the augmented Lagrangian in `Theta`, projected onto the
/// symmetric matrices.
pub fn theta_gradient(
    state: &AdmmState,
    sigma_hat: &SymMatrix,
    config: &AdmmConfig,
) -> Result<SymMatrix> {
    let sub = ThetaSubproblem::new(state, sigma_hat, config.rho1);
    let inv = state.theta.inverse()?;
    Ok(sub.gradient(state.theta.as_matrix(), inv.as_matrix()))
}

/// Outcome of the inner gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaUpdate {
    pub theta: SymMatrix,
    pub inner_iters: usize,
    pub grad_norm: f64,
    /// Subproblem value at the start and after every accepted step.
    pub values: Vec<f64>,
}

/// Backtracking descent on the `Theta` subproblem, started from
/// `state.theta`. Steps that leave the positive definite cone are rejected
/// like any other failed Armijo test.
pub fn theta_update(
    state: &AdmmState,
    sigma_hat: &SymMatrix,
    config: &AdmmConfig,
) -> Result<ThetaUpdate> {
    let p = state.p();
    let sub = ThetaSubproblem::new(state, sigma_hat, config.rho1);
    let mut theta = state.theta.as_matrix().clone();
    let chol = theta.clone().cholesky().ok_or(CggmError::NotPositiveDefinite)?;
    let mut value = -log_det_from_cholesky(&chol) + sub.smooth_part(&theta);
    let mut inv = chol.inverse();
    let mut values = vec![value];
    let tol = config.inner_grad_tol * p as f64;
    let mut grad_norm = f64::INFINITY;
    let mut iters = 0;
    let curvature = sub.mean_penalty_curvature();

    while iters < config.inner_max_iters {
        let grad = sub.gradient(&theta, &inv);
        grad_norm = grad.frobenius_norm();
        if grad_norm <= tol {
            break;
        }
        let direction = match config.inner_solver {
            InnerSolver::Gradient => grad.as_matrix().clone(),
            InnerSolver::NewtonCg => {
                newton_cg_direction(&sub, &theta, &inv, grad.as_matrix(), curvature)
            }
        };
        let decrease = config.armijo_c * grad.as_matrix().dot(&direction);
        let mut step = config.initial_step;
        loop {
            let candidate = &theta - &direction * step;
            if let Some(chol) = candidate.clone().cholesky() {
                let v = -log_det_from_cholesky(&chol) + sub.smooth_part(&candidate);
                if v <= value - step * decrease {
                    theta = candidate;
                    value = v;
                    inv = chol.inverse();
                    break;
                }
            }
            step *= config.armijo_beta;
            if step < MIN_STEP {
                return Err(CggmError::LineSearchStalled {
                    outer: state.outer_iter,
                    inner: iters,
                    step,
                });
            }
        }
        values.push(value);
        iters += 1;
    }
    if iters == config.inner_max_iters {
        grad_norm = sub.gradient(&theta, &inv).frobenius_norm();
    }
    Ok(ThetaUpdate {
        theta: SymMatrix::symmetrize(theta),
        inner_iters: iters,
        grad_norm,
        values,
    })
}

/// Closed-form `Psi_l` update:
/// `Psi_l = [Q_l Theta R_l + U_l + r (delta_l - z_l)(e1 - e2)^T] (I + r 11^T) / (1 + 2r)`
/// with `r = rho2 / rho1`.
pub fn psi_update(state: &AdmmState, config: &AdmmConfig) -> Vec<CentroidBlock> {
    let p = state.p();
    let rows = p - 2;
    let r = config.rho2 / config.rho1;
    let scale = 1.0 / (1.0 + 2.0 * r);
    // (I + r 11^T) / (1 + 2r)
    let diag = (1.0 + r) * scale;
    let off = r * scale;
    let theta = state.theta.as_matrix();
    state
        .psi
        .iter()
        .zip(&state.u)
        .zip(state.delta.iter().zip(&state.z))
        .map(|((block, u), (delta, z))| {
            let pair = block.pair();
            let mut out = CentroidBlock::zeros(pair, rows);
            let values = out.as_mut_slice();
            for (row, q) in pair.others(p).enumerate() {
                let shift = r * (delta[row] - z[row]);
                let m1 = theta[(q, pair.i())] + u[row] + shift;
                let m2 = theta[(q, pair.j())] + u[rows + row] - shift;
                values[row] = diag * m1 + off * m2;
                values[rows + row] = off * m1 + diag * m2;
            }
            out
        })
        .collect()
}

/// Proximal operator of `threshold * ||.||_2` (block soft-thresholding).
pub fn group_prox(v: &[f64], threshold: f64) -> Vec<f64> {
    let n = norm(v);
    if n <= threshold {
        vec![0.0; v.len()]
    } else {
        let shrink = 1.0 - threshold / n;
        v.iter().map(|x| shrink * x).collect()
    }
}

pub fn delta_update(
    state: &AdmmState,
    fusion: &FusionStructure,
    config: &AdmmConfig,
) -> Vec<Vec<f64>> {
    state
        .psi
        .iter()
        .zip(&state.z)
        .zip(fusion.fusion_weights())
        .map(|((block, z), &w)| {
            let mut v = column_difference(block);
            for (a, b) in v.iter_mut().zip(z) {
                *a += b;
            }
            group_prox(&v, config.lambda * w / config.rho2)
        })
        .collect()
}

/// Scaled dual ascent: `U_l += Q_l Theta R_l - Psi_l`, `z_l += D vec(Psi_l) - delta_l`.
pub fn dual_update(state: &AdmmState) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let p = state.p();
    let rows = p - 2;
    let theta = state.theta.as_matrix();
    let mut u_next = Vec::with_capacity(state.u.len());
    let mut z_next = Vec::with_capacity(state.z.len());
    for (((block, u), delta), z) in state.psi.iter().zip(&state.u).zip(&state.delta).zip(&state.z) {
        let pair = block.pair();
        let psi = block.as_slice();
        let mut u_new = u.clone();
        for (row, q) in pair.others(p).enumerate() {
            u_new[row] += theta[(q, pair.i())] - psi[row];
            u_new[rows + row] += theta[(q, pair.j())] - psi[rows + row];
        }
        let z_new = z
            .iter()
            .zip(delta)
            .enumerate()
            .map(|(row, (zv, d))| zv + (psi[row] - psi[rows + row]) - d)
            .collect();
        u_next.push(u_new);
        z_next.push(z_new);
    }
    (u_next, z_next)
}

/// Residual norms and the stopping thresholds they are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub primal_tol: f64,
    pub dual_tol: f64,
}

impl Residuals {
    pub fn converged(&self) -> bool {
        self.primal <= self.primal_tol && self.dual <= self.dual_tol
    }
}

/// Primal residual of `curr` and dual residual from the change in `Psi` and
/// `delta` between `prev` and `curr`.
pub fn residuals(prev: &AdmmState, curr: &AdmmState, config: &AdmmConfig) -> Residuals {
    residuals_since(&prev.psi, &prev.delta, curr, config)
}

fn residuals_since(
    prev_psi: &[CentroidBlock],
    prev_delta: &[Vec<f64>],
    curr: &AdmmState,
    config: &AdmmConfig,
) -> Residuals {
    let p = curr.p();
    let rows = p.saturating_sub(2);
    let theta = curr.theta.as_matrix();
    let mut primal_sq = 0.0;
    let mut dual_sq_psi = 0.0;
    let mut dual_sq_delta = 0.0;
    // scales for the relative tolerances
    let mut lhs_sq = 0.0;
    let mut rhs_sq = 0.0;
    let mut dual_var_sq = 0.0;

    for k in 0..curr.psi.len() {
        let block = &curr.psi[k];
        let pair = block.pair();
        let psi = block.as_slice();
        for (row, q) in pair.others(p).enumerate() {
            let a1 = theta[(q, pair.i())];
            let a2 = theta[(q, pair.j())];
            let e1 = a1 - psi[row];
            let e2 = a2 - psi[rows + row];
            primal_sq += e1 * e1 + e2 * e2;
            lhs_sq += a1 * a1 + a2 * a2;
            let diff = psi[row] - psi[rows + row];
            let e3 = diff - curr.delta[k][row];
            primal_sq += e3 * e3;
            lhs_sq += diff * diff;
        }
        rhs_sq += psi.iter().map(|v| v * v).sum::<f64>();
        rhs_sq += curr.delta[k].iter().map(|v| v * v).sum::<f64>();

        dual_sq_psi += psi
            .iter()
            .zip(prev_psi[k].as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        dual_sq_delta += curr.delta[k]
            .iter()
            .zip(&prev_delta[k])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        dual_var_sq += config.rho1 * config.rho1 * curr.u[k].iter().map(|v| v * v).sum::<f64>()
            + config.rho2 * config.rho2 * curr.z[k].iter().map(|v| v * v).sum::<f64>();
    }

    let dims = (3 * rows * curr.psi.len()) as f64;
    let primal = primal_sq.sqrt();
    let dual = (config.rho1 * config.rho1 * dual_sq_psi + config.rho2 * config.rho2 * dual_sq_delta)
        .sqrt();
    Residuals {
        primal,
        dual,
        primal_tol: dims.sqrt() * config.outer_tol_abs
            + config.outer_tol_rel * lhs_sq.sqrt().max(rhs_sq.sqrt()),
        dual_tol: dims.sqrt() * config.outer_tol_abs + config.outer_tol_rel * dual_var_sq.sqrt(),
    }
}

/// Runs the ADMM loop until the residual stopping rule holds or
/// `outer_max_iters` is spent. Not converging is reported through
/// [`FitResult::converged`], not as an error.
pub fn fit(
    sigma_hat: &SymMatrix,
    fusion: &FusionStructure,
    config: &AdmmConfig,
    warm_start: Option<AdmmState>,
) -> Result<FitResult> {
    config.validate()?;
    let mut state = match warm_start {
        Some(s) => {
            s.check_against(fusion)?;
            if sigma_hat.dim() != fusion.p() {
                return Err(CggmError::DimensionMismatch {
                    expected: fusion.p(),
                    got: sigma_hat.dim(),
                });
            }
            AdmmState { outer_iter: 0, ..s }
        }
        None => initialize(sigma_hat, fusion, config)?,
    };

    let mut trace = Vec::new();
    let mut converged = false;
    while state.outer_iter < config.outer_max_iters {
        let prev_psi = state.psi.clone();
        let prev_delta = state.delta.clone();

        state.theta = theta_update(&state, sigma_hat, config)?.theta;
        state.psi = psi_update(&state, config);
        state.delta = delta_update(&state, fusion, config);
        let (u, z) = dual_update(&state);
        state.u = u;
        state.z = z;
        state.outer_iter += 1;

        let res = residuals_since(&prev_psi, &prev_delta, &state, config);
        let objective = objective_value(&state.theta, sigma_hat, fusion, config.lambda)?;
        trace.push(ResidualRecord {
            iter: state.outer_iter,
            primal: res.primal,
            dual: res.dual,
            objective,
        });
        if res.converged() {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        theta_hat: state.theta.clone(),
        psi_hat: state.psi.clone(),
        converged,
        iterations: state.outer_iter,
        residual_trace: trace,
        state,
    })
}

/// Largest `||D vec(Psi_l)||_2` over the state, i.e. how far from fused the
/// least fused pair currently is.
pub fn max_pair_gap(state: &AdmmState) -> f64 {
    state
        .psi
        .iter()
        .map(|b| column_difference_norm(b.as_slice()))
        .fold(0.0, f64::max)
}
