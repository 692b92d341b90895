//! The lifted RNN: model, objective, block updates and the BCD trainer.

mod model;
pub(crate) mod objective;
mod train;
mod updates;

pub use model::{
    accuracy, init_model, predict, warm_start_states, HiddenStates, LiftedRnnModel, OutputStates,
    INIT_STD,
};
pub use objective::lifted_objective;
pub use train::{train_bcd, TrainOutcome};
pub use updates::{
    update_output_states, update_state, update_weights_layer1, update_weights_layer2,
    FirstLayerWeights,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solvers::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftedError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("output states are required for the simplex cross-entropy last layer")]
    MissingOutputStates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

/// How the classification loss attaches to the hidden states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastLayerMode {
    /// Softmax cross-entropy on `H·U1 + 1·b1ᵀ` directly.
    SoftmaxCe,
    /// Lifted output states `Z` on the simplex, coupled to the logits by a
    /// λ-weighted quadratic penalty.
    SimplexCe,
}

/// The objective actually being minimized, derived from task and mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Regression,
    SoftmaxCe,
    SimplexCe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftedHyperparams {
    /// Weight on every recursion penalty.
    pub lambda: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub hidden_size: usize,
    pub sweeps: usize,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub task: Task,
    pub last_layer_mode: LastLayerMode,
    /// Stop once a sweep lowers the objective by less than this fraction;
    /// zero disables early stopping.
    pub early_stop_tol: f64,
}

impl Default for LiftedHyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            rho0: 0.1,
            rho1: 0.1,
            rho2: 0.1,
            hidden_size: 10,
            sweeps: 30,
            inner_tol: 1e-8,
            inner_max_iters: 500,
            task: Task::Classification,
            last_layer_mode: LastLayerMode::SoftmaxCe,
            early_stop_tol: 1e-4,
        }
    }
}

impl LiftedHyperparams {
    pub fn formulation(&self) -> Formulation {
        match (self.task, self.last_layer_mode) {
            (Task::Regression, _) => Formulation::Regression,
            (Task::Classification, LastLayerMode::SoftmaxCe) => Formulation::SoftmaxCe,
            (Task::Classification, LastLayerMode::SimplexCe) => Formulation::SimplexCe,
        }
    }

    pub fn validate(&self) -> Result<(), LiftedError> {
        let bad = |msg: String| Err(LiftedError::InvalidHyperparams(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {}", self.lambda));
        }
        for (name, v) in [("rho0", self.rho0), ("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v}"));
            }
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be at least 1".into());
        }
        if !(self.inner_tol > 0.0) {
            return bad(format!("inner_tol = {}", self.inner_tol));
        }
        if !(self.early_stop_tol >= 0.0) {
            return bad(format!("early_stop_tol = {}", self.early_stop_tol));
        }
        Ok(())
    }

    /// Same hyperparameters with λ and all three ρ multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self {
            lambda: self.lambda * c,
            rho0: self.rho0 * c,
            rho1: self.rho1 * c,
            rho2: self.rho2 * c,
            ..self.clone()
        }
    }
}
