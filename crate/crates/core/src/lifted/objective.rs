use crate::matrix::{DenseMatrix, SeqTensor};
use crate::solvers::log_softmax_rows;

use super::{Formulation, HiddenStates, LiftedError, LiftedHyperparams, LiftedRnnModel, OutputStates};

/// Value of the lifted training objective for the active formulation.
///
/// All three share the recursion penalty
/// `λ·Σ_j ‖H_j − X_j·U0 − H_{j−1}·W − 1·b0ᵀ‖²` and the regularizer
/// `ρ0‖U0‖² + ρ1‖U1‖² + ρ2‖W‖²`. The loss term is
///
/// * regression: `Σ_j ‖Y_j − H_j·U1 − 1·b1ᵀ‖²`
/// * softmax cross-entropy: `Σ_j −Tr(Y_jᵀ log softmax(H_j·U1 + 1·b1ᵀ))`
/// * simplex cross-entropy: `Σ_j −Tr(Y_j log Z_j) + λ‖Z_j − (H_j·U1 + 1·b1ᵀ)ᵀ‖²`
pub fn lifted_objective(
    model: &LiftedRnnModel,
    states: &HiddenStates,
    x: &SeqTensor,
    y: &SeqTensor,
    hyper: &LiftedHyperparams,
    outputs: Option<&OutputStates>,
) -> Result<f64, LiftedError> {
    if states.len() != x.len() || y.len() != x.len() {
        return Err(LiftedError::Shape(format!(
            "{} states, {} input steps, {} label steps",
            states.len(),
            x.len(),
            y.len()
        )));
    }
    let formulation = hyper.formulation();
    if formulation == Formulation::SimplexCe && outputs.is_none() {
        return Err(LiftedError::MissingOutputStates);
    }

    let mut value = hyper.rho0 * model.u0.frobenius_sq()
        + hyper.rho1 * model.u1.frobenius_sq()
        + hyper.rho2 * model.w.frobenius_sq();
    for j in 0..x.len() {
        value += hyper.lambda * recursion_residual(model, states, x, j).frobenius_sq();
        let h = states.get(j);
        let y_j = y.step(j);
        value += match formulation {
            Formulation::Regression => y_j.sub(&model.logits(h)).frobenius_sq(),
            Formulation::SoftmaxCe => cross_entropy(&log_softmax_rows(&model.logits(h)), y_j),
            Formulation::SimplexCe => {
                let z = &outputs.expect("checked above").z[j];
                let zt = z.transpose();
                cross_entropy(&zt.map(f64::ln), y_j)
                    + hyper.lambda * zt.sub(&model.logits(h)).frobenius_sq()
            }
        };
    }
    Ok(value)
}

/// `H_j − X_j·U0 − H_{j−1}·W − 1·b0ᵀ`.
pub(crate) fn recursion_residual(
    model: &LiftedRnnModel,
    states: &HiddenStates,
    x: &SeqTensor,
    j: usize,
) -> DenseMatrix {
    states
        .get(j)
        .sub(&model.hidden_preactivation(x.step(j), states.previous(j)))
}

/// `−Σ Y ∘ logp`, skipping zero labels so that `0·log 0` contributes nothing.
pub(crate) fn cross_entropy(logp: &DenseMatrix, y: &DenseMatrix) -> f64 {
    -logp
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .filter(|(_, &yv)| yv != 0.0)
        .map(|(&lp, &yv)| yv * lp)
        .sum::<f64>()
}
