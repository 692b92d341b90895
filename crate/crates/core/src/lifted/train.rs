use crate::matrix::SeqTensor;

use super::{
    init_model, lifted_objective, update_output_states, update_state, update_weights_layer1,
    update_weights_layer2, warm_start_states, Formulation, HiddenStates, LiftedError,
    LiftedHyperparams, LiftedRnnModel, OutputStates,
};

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: LiftedRnnModel,
    pub states: HiddenStates,
    pub outputs: Option<OutputStates>,
    /// Objective at initialization followed by its value after every
    /// completed sweep.
    pub trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn sweeps_run(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Block-coordinate descent on the lifted objective.
///
/// Starts from [`init_model`] with states from the feedforward recursion (and,
/// for the simplex last layer, output states from the prox of the initial
/// logits). Each sweep updates `(W, U0, b0)`, then `(U1, b1)`, then the output
/// states if any, then `H_{1,0}, …, H_{1,T−1}` in order. Stops after
/// `hyper.sweeps` sweeps or once a sweep's relative objective decrease falls
/// below `hyper.early_stop_tol`.
pub fn train_bcd(
    x: &SeqTensor,
    y: &SeqTensor,
    hyper: &LiftedHyperparams,
    seed: u64,
) -> Result<TrainOutcome, LiftedError> {
    hyper.validate()?;
    if x.is_empty() || x.samples() == 0 {
        return Err(LiftedError::Shape("empty training set".into()));
    }
    if y.len() != x.len() || y.samples() != x.samples() {
        return Err(LiftedError::Shape(format!(
            "inputs {}x{}x{} vs labels {}x{}x{}",
            x.samples(),
            x.features(),
            x.len(),
            y.samples(),
            y.features(),
            y.len()
        )));
    }

    let mut model = init_model(x.features(), hyper.hidden_size, y.features(), seed);
    let mut states = warm_start_states(&model, x)?;
    let simplex = hyper.formulation() == Formulation::SimplexCe;
    let mut outputs = if simplex {
        Some(update_output_states(&states, y, &model, hyper)?)
    } else {
        None
    };
    let mut trace = vec![lifted_objective(&model, &states, x, y, hyper, outputs.as_ref())?];

    for _ in 0..hyper.sweeps {
        let first = update_weights_layer1(&states, x, hyper)?;
        model.w = first.w;
        model.u0 = first.u0;
        model.b0 = first.b0;

        let (u1, b1) = update_weights_layer2(&states, y, &model, hyper, outputs.as_ref())?;
        model.u1 = u1;
        model.b1 = b1;

        if simplex {
            outputs = Some(update_output_states(&states, y, &model, hyper)?);
        }

        for j in 0..states.len() {
            let h = update_state(j, &states, &model, x, y, hyper, outputs.as_ref())?;
            states.replace(j, h);
        }

        let value = lifted_objective(&model, &states, x, y, hyper, outputs.as_ref())?;
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(value);
        let decrease = (previous - value) / previous.abs().max(f64::MIN_POSITIVE);
        if decrease < hyper.early_stop_tol {
            break;
        }
    }

    Ok(TrainOutcome {
        model,
        states,
        outputs,
        trace,
    })
}
