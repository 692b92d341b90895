use crate::matrix::DenseMatrix;

/// Row-wise softmax with the row maximum subtracted before exponentiating.
pub fn softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Row-wise `log softmax`, computed as `x − max − log Σ exp(x − max)`.
pub fn log_softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}
