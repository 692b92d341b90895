use crate::matrix::DenseMatrix;

use super::{check_finite, SolverError};

/// Matrix ridge regression.
///
/// Minimizes `lambda·‖AΘ − B‖_F² + Σ_i reg_diag[i]·‖Θ[i,:]‖²` by solving the
/// normal equations `(lambda·AᵀA + diag(reg_diag))·Θ = lambda·AᵀB` with a
/// Cholesky factorization. A zero entry in `reg_diag` leaves that row of Θ
/// (typically a bias) unpenalized.
pub fn ridge_solve(
    a: &DenseMatrix,
    b: &DenseMatrix,
    lambda: f64,
    reg_diag: &[f64],
) -> Result<DenseMatrix, SolverError> {
    if a.rows() != b.rows() {
        return Err(SolverError::DimensionMismatch(format!(
            "design has {} rows, targets have {}",
            a.rows(),
            b.rows()
        )));
    }
    if reg_diag.len() != a.cols() {
        return Err(SolverError::DimensionMismatch(format!(
            "reg_diag has length {}, design has {} columns",
            reg_diag.len(),
            a.cols()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SolverError::InvalidArgument(format!("lambda = {lambda}")));
    }
    if reg_diag.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        return Err(SolverError::InvalidArgument(
            "reg_diag entries must be finite and non-negative".into(),
        ));
    }
    check_finite("design matrix", a.as_slice())?;
    check_finite("targets", b.as_slice())?;

    let mut gram = a.t_matmul(a).scale(lambda);
    for (i, r) in reg_diag.iter().enumerate() {
        gram[(i, i)] += r;
    }
    let rhs = a.t_matmul(b).scale(lambda);
    symmetric_solve(&gram, &rhs)
}

/// Solves `G·X = R` for symmetric positive-definite `G`.
///
/// On factorization failure the diagonal is jittered once by
/// `1e-10·trace(G)/d`; a second failure is reported as
/// [`SolverError::SingularSystem`].
pub fn symmetric_solve(gram: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix, SolverError> {
    let d = gram.rows();
    if gram.cols() != d || rhs.rows() != d {
        return Err(SolverError::DimensionMismatch(format!(
            "system {}x{} with right-hand side {}x{}",
            gram.rows(),
            gram.cols(),
            rhs.rows(),
            rhs.cols()
        )));
    }
    if d == 0 {
        return Ok(DenseMatrix::zeros(0, rhs.cols()));
    }
    let factor = match cholesky(gram) {
        Some(l) => l,
        None => {
            let jitter = 1e-10 * gram.trace().abs() / d as f64;
            let mut jittered = gram.clone();
            for i in 0..d {
                jittered[(i, i)] += jitter;
            }
            cholesky(&jittered).ok_or(SolverError::SingularSystem)?
        }
    };
    Ok(cholesky_solve(&factor, rhs))
}

/// Lower-triangular `L` with `LLᵀ = G`, or `None` when a pivot is not
/// safely positive.
fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.rows();
    let max_diag = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max);
    let floor = max_diag * f64::EPSILON * n as f64;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = g[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !pivot.is_finite() || pivot <= floor {
            return None;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = g[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &DenseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let k = rhs.cols();
    let mut x = rhs.clone();
    for c in 0..k {
        // forward: L y = r
        for i in 0..n {
            let mut v = x[(i, c)];
            for j in 0..i {
                v -= l[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for j in i + 1..n {
                v -= l[(j, i)] * x[(j, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_system() {
        let i2 = DenseMatrix::identity(2);
        let theta = ridge_solve(&i2, &i2, 1.0, &[0.0, 0.0]).unwrap();
        assert!(theta.sub(&i2).max_abs() < 1e-14);
    }

    #[test]
    fn scalar_normal_equation() {
        let a = m(&[&[1.0], &[1.0]]);
        let b = m(&[&[2.0], &[2.0]]);
        let theta = ridge_solve(&a, &b, 1.0, &[2.0]).unwrap();
        assert!((theta[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let a = DenseMatrix::zeros(3, 2);
        let b = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            ridge_solve(&a, &b, 1.0, &[0.0, 0.0]),
            Err(SolverError::DimensionMismatch(_))
        ));
        let b = DenseMatrix::zeros(3, 1);
        assert!(matches!(
            ridge_solve(&a, &b, 1.0, &[0.0]),
            Err(SolverError::DimensionMismatch(_))
        ));
        assert!(matches!(
            ridge_solve(&a, &b, 0.0, &[0.0, 0.0]),
            Err(SolverError::InvalidArgument(_))
        ));
    }

    #[test]
    fn rank_deficient_unregularized_uses_jitter() {
        // Two identical columns: AᵀA is exactly singular.
        let a = m(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        let b = m(&[&[1.0], &[2.0], &[3.0]]);
        let theta = ridge_solve(&a, &b, 1.0, &[0.0, 0.0]).unwrap();
        let fit = a.matmul(&theta);
        assert!(fit.sub(&b).max_abs() < 1e-4);
    }

    #[test]
    fn zero_system_is_singular() {
        let a = DenseMatrix::zeros(3, 2);
        let b = DenseMatrix::zeros(3, 1);
        assert_eq!(
            ridge_solve(&a, &b, 1.0, &[0.0, 0.0]),
            Err(SolverError::SingularSystem)
        );
    }

    #[test]
    fn zero_regularized_column_is_fine() {
        let a = m(&[&[0.0, 1.0], &[0.0, 2.0]]);
        let b = m(&[&[1.0], &[2.0]]);
        let theta = ridge_solve(&a, &b, 1.0, &[0.5, 0.0]).unwrap();
        assert_eq!(theta[(0, 0)], 0.0);
        assert!((theta[(1, 0)] - 1.0).abs() < 1e-12);
    }
}
