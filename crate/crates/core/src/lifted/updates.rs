//! Exact block updates of the lifted objective.

use crate::matrix::{DenseMatrix, SeqTensor};
use crate::solvers::{
    multinomial_fit, nnls_solve, ridge_solve, simplex_entropy_prox_batch, softmax_rows,
    MultinomialOptions, NnlsOptions, WeightedFactorTerm, DEFAULT_BISECTION_TOL,
};

use super::objective::cross_entropy;
use super::{
    Formulation, HiddenStates, LiftedError, LiftedHyperparams, LiftedRnnModel, OutputStates,
};
use crate::solvers::log_softmax_rows;
use crate::solvers::SolverError;

#[derive(Clone, Debug, PartialEq)]
pub struct FirstLayerWeights {
    pub w: DenseMatrix,
    pub u0: DenseMatrix,
    pub b0: Vec<f64>,
}

fn check_steps(states: &HiddenStates, other: &SeqTensor, what: &str) -> Result<(), LiftedError> {
    if states.len() != other.len() || other.samples() != states.get(0).rows() {
        return Err(LiftedError::Shape(format!(
            "{} hidden states of {:?} vs {what} {}x{}x{}",
            states.len(),
            states.get(0).shape(),
            other.samples(),
            other.features(),
            other.len()
        )));
    }
    Ok(())
}

/// Joint ridge solve for `(W, U0, b0)` on the time-stacked system
/// `H_j ≈ [H_{j−1}, X_j, 1]·[W; U0; b0ᵀ]`, with penalties ρ2 on W, ρ0 on U0
/// and none on b0.
pub fn update_weights_layer1(
    states: &HiddenStates,
    x: &SeqTensor,
    hyper: &LiftedHyperparams,
) -> Result<FirstLayerWeights, LiftedError> {
    if states.is_empty() {
        return Err(LiftedError::Shape("no timesteps".into()));
    }
    check_steps(states, x, "inputs")?;
    let (m, h) = states.get(0).shape();
    let i = x.features();
    let ones = DenseMatrix::from_fn(m, 1, |_, _| 1.0);
    let zeros = DenseMatrix::zeros(m, h);

    let blocks: Vec<DenseMatrix> = (0..states.len())
        .map(|j| {
            let prev = states.previous(j).unwrap_or(&zeros);
            DenseMatrix::hstack(&[prev, x.step(j), &ones])
        })
        .collect();
    let design = DenseMatrix::vstack(&blocks.iter().collect::<Vec<_>>());
    let targets = DenseMatrix::vstack(&states.as_slice().iter().collect::<Vec<_>>());

    let mut reg = vec![hyper.rho2; h];
    reg.extend(std::iter::repeat(hyper.rho0).take(i));
    reg.push(0.0);
    let theta = ridge_solve(&design, &targets, hyper.lambda, &reg)?;

    Ok(FirstLayerWeights {
        w: theta.row_block(0, h),
        u0: theta.row_block(h, h + i),
        b0: theta.row(h + i).to_vec(),
    })
}

/// Output-layer update `(U1, b1)`.
///
/// Regression: ridge of `Y_j` on `[H_j, 1]`. Softmax cross-entropy:
/// multinomial logistic regression warm-started at the model's current
/// output weights. Simplex cross-entropy: λ-weighted ridge of `Z_jᵀ` on
/// `[H_j, 1]`. U1 carries penalty ρ1 throughout; b1 is unpenalized.
pub fn update_weights_layer2(
    states: &HiddenStates,
    y: &SeqTensor,
    model: &LiftedRnnModel,
    hyper: &LiftedHyperparams,
    outputs: Option<&OutputStates>,
) -> Result<(DenseMatrix, Vec<f64>), LiftedError> {
    if states.is_empty() {
        return Err(LiftedError::Shape("no timesteps".into()));
    }
    check_steps(states, y, "labels")?;
    let (m, h) = states.get(0).shape();

    let ridge_on = |targets: Vec<DenseMatrix>, lambda: f64| -> Result<_, LiftedError> {
        let ones = DenseMatrix::from_fn(m, 1, |_, _| 1.0);
        let blocks: Vec<DenseMatrix> = states
            .as_slice()
            .iter()
            .map(|hj| DenseMatrix::hstack(&[hj, &ones]))
            .collect();
        let design = DenseMatrix::vstack(&blocks.iter().collect::<Vec<_>>());
        let target = DenseMatrix::vstack(&targets.iter().collect::<Vec<_>>());
        let mut reg = vec![hyper.rho1; h];
        reg.push(0.0);
        let theta = ridge_solve(&design, &target, lambda, &reg)?;
        Ok((theta.row_block(0, h), theta.row(h).to_vec()))
    };

    match hyper.formulation() {
        Formulation::Regression => ridge_on(y.steps().to_vec(), 1.0),
        Formulation::SimplexCe => {
            let outputs = outputs.ok_or(LiftedError::MissingOutputStates)?;
            ridge_on(outputs.z.iter().map(DenseMatrix::transpose).collect(), hyper.lambda)
        }
        Formulation::SoftmaxCe => {
            let fit = multinomial_fit(
                states.as_slice(),
                y.steps(),
                hyper.rho1,
                (&model.u1, &model.b1),
                MultinomialOptions {
                    max_iters: hyper.inner_max_iters,
                    tol: hyper.inner_tol,
                },
            )?;
            Ok((fit.u1, fit.b1))
        }
    }
}

/// Minimizes the lifted objective over the single state `H_{1,j}`, all other
/// variables fixed, warm-started at the current state.
///
/// Regression and simplex cross-entropy reduce to a matrix NNLS with terms
/// `λ‖H − A‖²`, `λ‖H·W − B‖²` (only for `j < T−1`) and the output coupling
/// `w‖H·U1 − (targets − 1·b1ᵀ)‖²` (`w = 1` against `Y_j` for regression,
/// `w = λ` against `Z_jᵀ` for simplex). Softmax cross-entropy uses projected
/// gradient with backtracking on the same two penalties plus the
/// cross-entropy of `softmax(H·U1 + 1·b1ᵀ)`.
pub fn update_state(
    j: usize,
    states: &HiddenStates,
    model: &LiftedRnnModel,
    x: &SeqTensor,
    y: &SeqTensor,
    hyper: &LiftedHyperparams,
    outputs: Option<&OutputStates>,
) -> Result<DenseMatrix, LiftedError> {
    let t_len = states.len();
    if j >= t_len {
        return Err(LiftedError::Shape(format!("time index {j} out of range 0..{t_len}")));
    }
    check_steps(states, x, "inputs")?;
    check_steps(states, y, "labels")?;
    let m = x.samples();

    let anchor = model.hidden_preactivation(x.step(j), states.previous(j));
    let forward_target = (j + 1 < t_len).then(|| {
        // B = H_{j+1} − X_{j+1}·U0 − 1·b0ᵀ
        let mut b = states.get(j + 1).sub(&x.step(j + 1).matmul(&model.u0));
        let neg_b0: Vec<f64> = model.b0.iter().map(|v| -v).collect();
        b.add_row_vector(&neg_b0);
        b
    });
    let opts = NnlsOptions {
        max_iters: hyper.inner_max_iters,
        tol: hyper.inner_tol,
    };
    let neg_b1: Vec<f64> = model.b1.iter().map(|v| -v).collect();
    let h_dim = model.hidden_size();

    let output_term = |targets: DenseMatrix, weight: f64| -> Result<WeightedFactorTerm, SolverError> {
        let mut t = targets;
        t.add_row_vector(&neg_b1);
        WeightedFactorTerm::new(model.u1.clone(), t, weight)
    };

    let formulation = hyper.formulation();
    if formulation == Formulation::SoftmaxCe {
        return Ok(softmax_state_solve(
            states.get(j),
            &anchor,
            forward_target.as_ref().map(|b| (&model.w, b)),
            model,
            y.step(j),
            hyper,
        )?);
    }

    let mut terms = vec![WeightedFactorTerm::new(
        DenseMatrix::identity(h_dim),
        anchor,
        hyper.lambda,
    )?];
    if let Some(b) = forward_target {
        terms.push(WeightedFactorTerm::new(model.w.clone(), b, hyper.lambda)?);
    }
    match formulation {
        Formulation::Regression => terms.push(output_term(y.step(j).clone(), 1.0)?),
        Formulation::SimplexCe => {
            let outputs = outputs.ok_or(LiftedError::MissingOutputStates)?;
            let z = &outputs.z[j];
            if z.shape() != (model.output_size(), m) {
                return Err(LiftedError::Shape("output state shape".into()));
            }
            terms.push(output_term(z.transpose(), hyper.lambda)?);
        }
        Formulation::SoftmaxCe => unreachable!(),
    }
    Ok(nnls_solve(&terms, states.get(j), opts)?.h)
}

/// Projected gradient for
/// `λ‖H − A‖² + λ‖B − H·W‖² − Tr(Yᵀ log softmax(H·U1 + 1·b1ᵀ))` over `H ≥ 0`.
///
/// Steps start at `1/L` for a Lipschitz bound of the gradient and adapt by
/// backtracking on the projected-gradient sufficient-decrease condition, so
/// every accepted step lowers the objective.
fn softmax_state_solve(
    init: &DenseMatrix,
    anchor: &DenseMatrix,
    forward: Option<(&DenseMatrix, &DenseMatrix)>,
    model: &LiftedRnnModel,
    y: &DenseMatrix,
    hyper: &LiftedHyperparams,
) -> Result<DenseMatrix, SolverError> {
    let lambda = hyper.lambda;
    // Objective plus the forward residual `H·W − B` and logits, which the
    // gradient at the same point reuses.
    let evaluate = |h: &DenseMatrix| {
        let mut v = lambda * h.sub(anchor).frobenius_sq();
        let resid = forward.map(|(w, b)| h.matmul(w).sub(b));
        if let Some(r) = &resid {
            v += lambda * r.frobenius_sq();
        }
        let logits = model.logits(h);
        v += cross_entropy(&log_softmax_rows(&logits), y);
        (v, resid, logits)
    };
    let gradient = |h: &DenseMatrix, resid: &Option<DenseMatrix>, logits: &DenseMatrix| {
        let mut g = h.sub(anchor).scale(2.0 * lambda);
        if let (Some((w, _)), Some(r)) = (forward, resid) {
            g.axpy(2.0 * lambda, &r.matmul_t(w));
        }
        let resid = softmax_rows(logits).sub(y);
        g.add_assign(&resid.matmul_t(&model.u1));
        g
    };

    // Hessian bound: 2λ(1 + ‖W‖²) + ½‖U1‖², the softmax Hessian being ⪯ ½·I.
    let w_sq = forward.map_or(0.0, |(w, _)| w.frobenius_sq());
    let lipschitz = 2.0 * lambda * (1.0 + w_sq) + 0.5 * model.u1.frobenius_sq();
    let mut step = 1.0 / lipschitz;

    let mut h = init.clone();
    let (mut f, mut resid, mut logits) = evaluate(&h);
    for iteration in 0..=hyper.inner_max_iters {
        let g = gradient(&h, &resid, &logits);
        let kkt = h
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .fold(0.0f64, |acc, (&x, &gv)| acc.max(x.min(gv).abs()));
        if kkt <= hyper.inner_tol * (1.0 + g.max_abs()) || iteration == hyper.inner_max_iters {
            break;
        }
        loop {
            let mut candidate = h.clone();
            candidate.axpy(-step, &g);
            candidate.clamp_nonneg();
            let d = candidate.sub(&h);
            let (f_new, r_new, l_new) = evaluate(&candidate);
            let model_bound = f + crate::matrix::dot(g.as_slice(), d.as_slice())
                + d.frobenius_sq() / (2.0 * step);
            if f_new.is_finite() && f_new <= model_bound && f_new <= f {
                h = candidate;
                f = f_new;
                resid = r_new;
                logits = l_new;
                break;
            }
            step *= 0.5;
            if step < 1e-16 / lipschitz {
                // No representable descent left.
                return Ok(h);
            }
        }
        step *= 2.0;
        if !h.is_finite() {
            return Err(SolverError::NonFiniteIterate { iteration });
        }
    }
    Ok(h)
}

/// Simplex-entropy prox of the current logits for every timestep:
/// `Z_j = prox((H_j·U1 + 1·b1ᵀ)ᵀ; Y_jᵀ, λ)`.
pub fn update_output_states(
    states: &HiddenStates,
    y: &SeqTensor,
    model: &LiftedRnnModel,
    hyper: &LiftedHyperparams,
) -> Result<OutputStates, LiftedError> {
    check_steps(states, y, "labels")?;
    let z = states
        .as_slice()
        .iter()
        .zip(y.steps())
        .map(|(h, y_j)| {
            simplex_entropy_prox_batch(
                &model.logits(h).transpose(),
                &y_j.transpose(),
                hyper.lambda,
                DEFAULT_BISECTION_TOL,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OutputStates { z })
}
