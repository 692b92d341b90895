use crate::matrix::{dot, DenseMatrix};

use super::{check_finite, SolverError};

/// One additive term `weight·‖H·right − target‖_F²` of a matrix NNLS
/// objective in the unknown `H` (m×h).
#[derive(Clone, Debug)]
pub struct WeightedFactorTerm {
    pub right: DenseMatrix,
    pub target: DenseMatrix,
    pub weight: f64,
}

impl WeightedFactorTerm {
    pub fn new(right: DenseMatrix, target: DenseMatrix, weight: f64) -> Result<Self, SolverError> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(SolverError::InvalidArgument(format!("term weight {weight}")));
        }
        if right.cols() != target.cols() {
            return Err(SolverError::DimensionMismatch(format!(
                "right factor has {} columns, target has {}",
                right.cols(),
                target.cols()
            )));
        }
        Ok(Self {
            right,
            target,
            weight,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NnlsOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub h: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// `‖min(H, ∇)‖_∞` at the returned iterate.
    pub kkt_residual: f64,
    /// `‖∇‖_∞` at the returned iterate.
    pub grad_norm: f64,
}

const POWER_ITERS: usize = 50;

/// `Σ_k w_k·‖H·R_k − T_k‖_F²`.
pub fn nnls_objective(terms: &[WeightedFactorTerm], h: &DenseMatrix) -> f64 {
    terms
        .iter()
        .map(|t| t.weight * h.matmul(&t.right).sub(&t.target).frobenius_sq())
        .sum()
}

/// Matrix non-negative least squares by projected gradient.
///
/// The step is `1/L` with `L = 2·Σ_k w_k·σ_max(R_k R_kᵀ)`, each `σ_max`
/// estimated by power iteration. Iterates are clamped at zero after every
/// step. The loop ends when `‖min(H, ∇)‖_∞ ≤ tol·(1 + ‖∇‖_∞)` or after
/// `max_iters` steps; the last iterate is returned in both cases and
/// [`NnlsSolution::converged`] says which happened.
pub fn nnls_solve(
    terms: &[WeightedFactorTerm],
    init: &DenseMatrix,
    opts: NnlsOptions,
) -> Result<NnlsSolution, SolverError> {
    let (m, h) = init.shape();
    for (k, t) in terms.iter().enumerate() {
        if t.right.rows() != h || t.target.rows() != m {
            return Err(SolverError::DimensionMismatch(format!(
                "term {k}: right factor {}x{}, target {}x{}, unknown {m}x{h}",
                t.right.rows(),
                t.right.cols(),
                t.target.rows(),
                t.target.cols()
            )));
        }
        check_finite("term right factor", t.right.as_slice())?;
        check_finite("term target", t.target.as_slice())?;
    }
    check_finite("initial iterate", init.as_slice())?;
    if init.min_entry() < 0.0 {
        return Err(SolverError::InvalidArgument(
            "initial iterate must be non-negative".into(),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidArgument(format!("tol = {}", opts.tol)));
    }

    // ∇ = 2(H·G − C) with G = Σ w R Rᵀ and C = Σ w T Rᵀ.
    let mut gram = DenseMatrix::zeros(h, h);
    let mut cross = DenseMatrix::zeros(m, h);
    let mut lipschitz = 0.0;
    for t in terms {
        gram.axpy(t.weight, &t.right.matmul_t(&t.right));
        cross.axpy(t.weight, &t.target.matmul_t(&t.right));
        lipschitz += 2.0 * t.weight * largest_eigenvalue_rrt(&t.right);
    }

    let mut iterate = init.clone();
    let mut iterations = 0;
    loop {
        let grad = iterate.matmul(&gram).sub(&cross).scale(2.0);
        let grad_norm = grad.max_abs();
        let kkt_residual = kkt_residual(&iterate, &grad);
        let converged = kkt_residual <= opts.tol * (1.0 + grad_norm);
        if converged || iterations >= opts.max_iters || lipschitz == 0.0 {
            return Ok(NnlsSolution {
                h: iterate,
                iterations,
                converged,
                kkt_residual,
                grad_norm,
            });
        }
        iterate.axpy(-1.0 / lipschitz, &grad);
        iterate.clamp_nonneg();
        iterations += 1;
        if !iterate.is_finite() {
            return Err(SolverError::NonFiniteIterate {
                iteration: iterations,
            });
        }
    }
}

/// `‖min(H, ∇)‖_∞`, zero exactly at a KKT point of `min f(H) s.t. H ≥ 0`.
pub(crate) fn kkt_residual(h: &DenseMatrix, grad: &DenseMatrix) -> f64 {
    h.as_slice()
        .iter()
        .zip(grad.as_slice())
        .fold(0.0, |acc, (&x, &g)| acc.max(x.min(g).abs()))
}

/// Power-iteration estimate of the largest eigenvalue of `R Rᵀ`.
fn largest_eigenvalue_rrt(r: &DenseMatrix) -> f64 {
    let n = r.rows();
    if n == 0 || r.cols() == 0 {
        return 0.0;
    }
    // Fixed, non-symmetric start so it is unlikely to be orthogonal to the
    // leading eigenvector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 0.5 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        // R (Rᵀ v)
        let rt_v: Vec<f64> = (0..r.cols())
            .map(|j| (0..n).map(|i| r[(i, j)] * v[i]).sum())
            .collect();
        let w: Vec<f64> = (0..n).map(|i| dot(r.row(i), &rt_v)).collect();
        estimate = dot(&w, &w).sqrt();
        v = w;
    }
    estimate
}
