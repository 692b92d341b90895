use crate::matrix::DenseMatrix;

use super::{log_softmax_rows, softmax_rows, SolverError};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-16;

#[derive(Clone, Copy, Debug)]
pub struct MultinomialOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for MultinomialOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MultinomialFit {
    pub u1: DenseMatrix,
    pub b1: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// `Σ_j −Tr(Y_jᵀ log softmax(H_j·U1 + 1·b1ᵀ)) + rho1·‖U1‖_F²`.
pub fn multinomial_objective(
    h_list: &[DenseMatrix],
    y_list: &[DenseMatrix],
    rho1: f64,
    u1: &DenseMatrix,
    b1: &[f64],
) -> f64 {
    objective_from_logits(&block_logits(h_list, u1, b1), y_list, rho1, u1)
}

fn block_logits(h_list: &[DenseMatrix], u1: &DenseMatrix, b1: &[f64]) -> Vec<DenseMatrix> {
    h_list
        .iter()
        .map(|h| {
            let mut logits = h.matmul(u1);
            logits.add_row_vector(b1);
            logits
        })
        .collect()
}

fn objective_from_logits(logits: &[DenseMatrix], y_list: &[DenseMatrix], rho1: f64, u1: &DenseMatrix) -> f64 {
    let mut value = rho1 * u1.frobenius_sq();
    for (l, y) in logits.iter().zip(y_list) {
        let logp = log_softmax_rows(l);
        value -= logp
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .filter(|(_, &yv)| yv != 0.0)
            .map(|(&lp, &yv)| yv * lp)
            .sum::<f64>();
    }
    value
}

fn gradient(
    h_list: &[DenseMatrix],
    y_list: &[DenseMatrix],
    logits: &[DenseMatrix],
    rho1: f64,
    u1: &DenseMatrix,
) -> (DenseMatrix, Vec<f64>) {
    let mut gu = u1.scale(2.0 * rho1);
    let mut gb = vec![0.0; u1.cols()];
    for ((h, y), l) in h_list.iter().zip(y_list).zip(logits) {
        let resid = softmax_rows(l).sub(y);
        gu.add_assign(&h.t_matmul(&resid));
        for (g, s) in gb.iter_mut().zip(resid.column_sums()) {
            *g += s;
        }
    }
    (gu, gb)
}

/// Multinomial logistic regression over a list of (features, one-hot
/// targets) blocks by full-batch gradient descent with Armijo backtracking.
///
/// The first trial step is 1.0; later iterations start from twice the last
/// accepted step. Stops when the gradient ∞-norm is at most
/// `tol·(1 + |objective|)`.
pub fn multinomial_fit(
    h_list: &[DenseMatrix],
    y_list: &[DenseMatrix],
    rho1: f64,
    init: (&DenseMatrix, &[f64]),
    opts: MultinomialOptions,
) -> Result<MultinomialFit, SolverError> {
    let (u_init, b_init) = init;
    let (h, o) = u_init.shape();
    if h_list.len() != y_list.len() {
        return Err(SolverError::DimensionMismatch(format!(
            "{} feature blocks, {} target blocks",
            h_list.len(),
            y_list.len()
        )));
    }
    if b_init.len() != o {
        return Err(SolverError::DimensionMismatch("bias length".into()));
    }
    for (hj, yj) in h_list.iter().zip(y_list) {
        if hj.cols() != h || yj.cols() != o || hj.rows() != yj.rows() {
            return Err(SolverError::DimensionMismatch(format!(
                "block {:?} / {:?} against weights {h}x{o}",
                hj.shape(),
                yj.shape()
            )));
        }
    }
    if !(rho1 >= 0.0) {
        return Err(SolverError::InvalidArgument(format!("rho1 = {rho1}")));
    }

    let mut u1 = u_init.clone();
    let mut b1 = b_init.to_vec();
    let mut logits = block_logits(h_list, &u1, &b1);
    let mut objective = objective_from_logits(&logits, y_list, rho1, &u1);
    let mut trace = vec![objective];
    let mut step = 1.0;
    let mut iterations = 0;
    loop {
        let (gu, gb) = gradient(h_list, y_list, &logits, rho1, &u1);
        let grad_norm = gb.iter().fold(gu.max_abs(), |m, g| m.max(g.abs()));
        let converged = grad_norm <= opts.tol * (1.0 + objective.abs());
        if converged || iterations >= opts.max_iters {
            return Ok(MultinomialFit {
                u1,
                b1,
                objective,
                grad_norm,
                iterations,
                converged,
                trace,
            });
        }
        let grad_sq = gu.frobenius_sq() + gb.iter().map(|g| g * g).sum::<f64>();
        loop {
            let mut u_try = u1.clone();
            u_try.axpy(-step, &gu);
            let b_try: Vec<f64> = b1.iter().zip(&gb).map(|(b, g)| b - step * g).collect();
            let l_try = block_logits(h_list, &u_try, &b_try);
            let f_try = objective_from_logits(&l_try, y_list, rho1, &u_try);
            if f_try.is_finite() && f_try <= objective - ARMIJO * step * grad_sq {
                u1 = u_try;
                b1 = b_try;
                logits = l_try;
                objective = f_try;
                break;
            }
            step *= SHRINK;
            if step < MIN_STEP {
                return Err(SolverError::LineSearchStall { iteration: iterations });
            }
        }
        trace.push(objective);
        iterations += 1;
        step *= 2.0;
    }
}
