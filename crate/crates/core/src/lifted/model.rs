use serde::{Deserialize, Serialize};

use crate::matrix::{DenseMatrix, SeqTensor};
use crate::rng::Rng;
use crate::solvers::softmax_rows;

use super::{LiftedError, Task};

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.1;

/// Weights of a one-hidden-layer ReLU recurrent network.
///
/// Row-vector convention: a batch of states `H` (m×h) advances as
/// `relu(H·W + X·U0 + 1·b0ᵀ)` and reads out `H·U1 + 1·b1ᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedRnnModel {
    pub u0: DenseMatrix,
    pub w: DenseMatrix,
    pub b0: Vec<f64>,
    pub u1: DenseMatrix,
    pub b1: Vec<f64>,
}

impl LiftedRnnModel {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            u0: DenseMatrix::zeros(input, hidden),
            w: DenseMatrix::zeros(hidden, hidden),
            b0: vec![0.0; hidden],
            u1: DenseMatrix::zeros(hidden, output),
            b1: vec![0.0; output],
        }
    }

    pub fn input_size(&self) -> usize {
        self.u0.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.w.rows()
    }

    pub fn output_size(&self) -> usize {
        self.u1.cols()
    }

    /// Checks that the five blocks agree on `(i, h, o)` and are finite.
    pub fn validate(&self) -> Result<(), LiftedError> {
        let h = self.u0.cols();
        let o = self.u1.cols();
        if self.w.shape() != (h, h)
            || self.b0.len() != h
            || self.u1.rows() != h
            || self.b1.len() != o
        {
            return Err(LiftedError::Shape(format!(
                "inconsistent model blocks: U0 {:?}, W {:?}, b0 {}, U1 {:?}, b1 {}",
                self.u0.shape(),
                self.w.shape(),
                self.b0.len(),
                self.u1.shape(),
                self.b1.len()
            )));
        }
        let finite = self.u0.is_finite()
            && self.w.is_finite()
            && self.u1.is_finite()
            && self.b0.iter().chain(&self.b1).all(|v| v.is_finite());
        if !finite {
            return Err(LiftedError::Shape("model has non-finite entries".into()));
        }
        Ok(())
    }

    /// `X_j·U0 + H_{j−1}·W + 1·b0ᵀ`; `prev = None` stands for the zero state.
    pub fn hidden_preactivation(&self, x_t: &DenseMatrix, prev: Option<&DenseMatrix>) -> DenseMatrix {
        let mut pre = x_t.matmul(&self.u0);
        if let Some(h) = prev {
            pre.add_assign(&h.matmul(&self.w));
        }
        pre.add_row_vector(&self.b0);
        pre
    }

    /// `H·U1 + 1·b1ᵀ`.
    pub fn logits(&self, h: &DenseMatrix) -> DenseMatrix {
        let mut out = h.matmul(&self.u1);
        out.add_row_vector(&self.b1);
        out
    }

    fn check_input(&self, x: &SeqTensor) -> Result<(), LiftedError> {
        if x.features() != self.input_size() {
            return Err(LiftedError::Shape(format!(
                "input has {} features, model expects {}",
                x.features(),
                self.input_size()
            )));
        }
        Ok(())
    }
}

/// Gaussian `N(0, 0.1²)` weights drawn in the order U0, W, U1 (each
/// row-major) from one stream seeded with `seed`; biases start at zero.
pub fn init_model(input: usize, hidden: usize, output: usize, seed: u64) -> LiftedRnnModel {
    let mut rng = Rng::new(seed);
    let mut draw = |r, c| DenseMatrix::from_fn(r, c, |_, _| rng.normal_with(0.0, INIT_STD));
    let u0 = draw(input, hidden);
    let w = draw(hidden, hidden);
    let u1 = draw(hidden, output);
    LiftedRnnModel {
        u0,
        w,
        b0: vec![0.0; hidden],
        u1,
        b1: vec![0.0; output],
    }
}

/// Non-negative hidden states `H_{1,0} … H_{1,T−1}`, one `m × h` matrix per
/// timestep. The state before the first step is the implicit zero matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStates {
    states: Vec<DenseMatrix>,
}

impl HiddenStates {
    pub fn new(states: Vec<DenseMatrix>) -> Result<Self, LiftedError> {
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.shape() != first.shape()) {
                return Err(LiftedError::Shape("hidden states differ in shape".into()));
            }
        }
        if states.iter().any(|s| s.min_entry() < 0.0 || !s.is_finite()) {
            return Err(LiftedError::Shape(
                "hidden states must be finite and non-negative".into(),
            ));
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, j: usize) -> &DenseMatrix {
        &self.states[j]
    }

    /// `H_{1,j−1}`, or `None` for `j = 0`.
    pub fn previous(&self, j: usize) -> Option<&DenseMatrix> {
        j.checked_sub(1).map(|p| &self.states[p])
    }

    pub fn as_slice(&self) -> &[DenseMatrix] {
        &self.states
    }

    pub(crate) fn replace(&mut self, j: usize, h: DenseMatrix) {
        debug_assert!(h.min_entry() >= 0.0);
        self.states[j] = h;
    }
}

/// Output states for the simplex cross-entropy last layer: `Z_j` is `o × m`
/// with every column on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputStates {
    pub z: Vec<DenseMatrix>,
}

/// Feedforward ReLU recursion from the zero state.
pub fn warm_start_states(model: &LiftedRnnModel, x: &SeqTensor) -> Result<HiddenStates, LiftedError> {
    model.check_input(x)?;
    let mut states: Vec<DenseMatrix> = Vec::with_capacity(x.len());
    for t in 0..x.len() {
        let mut h = model.hidden_preactivation(x.step(t), states.last());
        h.clamp_nonneg();
        states.push(h);
    }
    Ok(HiddenStates { states })
}

/// Feedforward prediction: class probabilities per timestep for
/// classification, raw affine outputs for regression.
pub fn predict(model: &LiftedRnnModel, x: &SeqTensor, task: Task) -> Result<SeqTensor, LiftedError> {
    let states = warm_start_states(model, x)?;
    let steps = states
        .as_slice()
        .iter()
        .map(|h| {
            let logits = model.logits(h);
            match task {
                Task::Classification => softmax_rows(&logits),
                Task::Regression => logits,
            }
        })
        .collect();
    SeqTensor::from_steps(steps).map_err(LiftedError::from)
}

fn argmax(row: &[f64]) -> usize {
    // Strict comparison keeps the lowest index on ties.
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of (sample, timestep) pairs whose predicted argmax matches the
/// label argmax.
pub fn accuracy(predicted: &SeqTensor, labels: &SeqTensor) -> Result<f64, LiftedError> {
    if predicted.samples() != labels.samples()
        || predicted.features() != labels.features()
        || predicted.len() != labels.len()
    {
        return Err(LiftedError::Shape(format!(
            "prediction {}x{}x{} vs labels {}x{}x{}",
            predicted.samples(),
            predicted.features(),
            predicted.len(),
            labels.samples(),
            labels.features(),
            labels.len()
        )));
    }
    let total = predicted.samples() * predicted.len();
    if total == 0 {
        return Err(LiftedError::Shape("empty prediction".into()));
    }
    let mut hits = 0usize;
    for (p, y) in predicted.steps().iter().zip(labels.steps()) {
        for s in 0..p.rows() {
            if argmax(p.row(s)) == argmax(y.row(s)) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(steps: Vec<Vec<Vec<f64>>>) -> SeqTensor {
        SeqTensor::from_steps(
            steps
                .into_iter()
                .map(|rows| DenseMatrix::from_rows(&rows).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(init_model(3, 4, 2, 9), init_model(3, 4, 2, 9));
        assert_ne!(init_model(3, 4, 2, 9), init_model(3, 4, 2, 10));
    }

    #[test]
    fn degenerate_dims() {
        let m = init_model(1, 1, 1, 0);
        assert_eq!(m.u0.shape(), (1, 1));
        assert_eq!(m.w.shape(), (1, 1));
        assert_eq!(m.u1.shape(), (1, 1));
        assert_eq!(m.b0, vec![0.0]);
        assert_eq!(m.b1, vec![0.0]);
        m.validate().unwrap();
    }

    #[test]
    fn zero_model_gives_zero_states_and_uniform_probabilities() {
        let model = LiftedRnnModel::zeros(2, 3, 4);
        let x = seq(vec![vec![vec![1.0, -2.0]], vec![vec![0.5, 0.5]]]);
        let states = warm_start_states(&model, &x).unwrap();
        assert!(states.as_slice().iter().all(|h| h.max_abs() == 0.0));
        let p = predict(&model, &x, Task::Classification).unwrap();
        assert!(p.steps().iter().all(|s| s.as_slice().iter().all(|&v| v == 0.25)));
    }

    #[test]
    fn single_step_has_no_recurrence() {
        let mut model = init_model(2, 3, 2, 5);
        model.b0 = vec![0.1, -0.2, 0.3];
        let x = seq(vec![vec![vec![1.0, 2.0], vec![-1.0, 0.5]]]);
        let h = warm_start_states(&model, &x).unwrap();
        let mut expect = x.step(0).matmul(&model.u0);
        expect.add_row_vector(&model.b0);
        expect.clamp_nonneg();
        assert_eq!(h.get(0), &expect);
    }

    #[test]
    fn accuracy_cases() {
        let y = seq(vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ]);
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        let wrong = seq(vec![
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ]);
        assert_eq!(accuracy(&wrong, &y).unwrap(), 0.0);
        // ties go to index 0, which is right for exactly half the cells
        let ties = seq(vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ]);
        assert_eq!(accuracy(&ties, &y).unwrap(), 0.5);
        let short = seq(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
        assert!(accuracy(&short, &y).is_err());
    }

    #[test]
    fn hidden_states_reject_negative_entries() {
        let bad = DenseMatrix::from_vec(1, 1, vec![-1.0]).unwrap();
        assert!(HiddenStates::new(vec![bad]).is_err());
    }
}
