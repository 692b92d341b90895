//! Elman RNN with the same architecture as the lifted model, trained by
//! mini-batch SGD and backpropagation through time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lifted::{init_model, LiftedRnnModel};
use crate::lifted::objective::cross_entropy;
use crate::matrix::{DenseMatrix, SeqTensor};
use crate::rng::Rng;
use crate::solvers::{log_softmax_rows, softmax_rows};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("invalid SGD config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
}

/// How per-(sample, timestep) cross-entropies are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    #[default]
    Mean,
    /// Plain sum over the batch and all timesteps.
    Sum,
}

impl LossReduction {
    /// Multiplier applied to the summed cross-entropy of an `m × T` batch.
    pub fn weight(self, samples: usize, steps: usize) -> f64 {
        match self {
            LossReduction::Mean => 1.0 / (samples * steps) as f64,
            LossReduction::Sum => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub lr0: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    /// Shared value of ρ0, ρ1 and ρ2.
    pub rho: f64,
    pub steps: usize,
    pub hidden_size: usize,
    pub seed: u64,
    pub reduction: LossReduction,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            decay: 0.9,
            decay_every: 1000,
            batch_size: 100,
            rho: 1e-3,
            steps: 5000,
            hidden_size: 10,
            seed: 0,
            reduction: LossReduction::Mean,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |msg: &str| Err(BaselineError::InvalidConfig(msg.to_string()));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.decay_every == 0 || self.batch_size == 0 || self.steps == 0 || self.hidden_size == 0 {
            return bad("decay_every, batch_size, steps and hidden_size must be at least 1");
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad("rho must be non-negative");
        }
        Ok(())
    }

    /// `lr0 · decay^⌊t / decay_every⌋` for zero-based step `t`.
    pub fn learning_rate(&self, t: usize) -> f64 {
        let exponent = i32::try_from(t / self.decay_every).unwrap_or(i32::MAX);
        self.lr0 * self.decay.powi(exponent)
    }
}

/// Activations of one forward pass, stored feature-major: each step is a
/// `features × m` matrix with one column per sample.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `(X_t·U0 + H_{t−1}·W + 1·b0ᵀ)ᵀ`.
    pub pre: Vec<DenseMatrix>,
    /// `relu(pre)`.
    pub hidden: Vec<DenseMatrix>,
    /// `(H_t·U1 + 1·b1ᵀ)ᵀ`.
    pub logits: Vec<DenseMatrix>,
}

pub fn forward(model: &LiftedRnnModel, x: &SeqTensor) -> ForwardPass {
    let t_len = x.len();
    let mut pre = Vec::with_capacity(t_len);
    let mut hidden: Vec<DenseMatrix> = Vec::with_capacity(t_len);
    let mut logits = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut p = model.u0.t_matmul(&x.step(t).transpose());
        if let Some(prev) = hidden.last() {
            p.add_assign(&model.w.t_matmul(prev));
        }
        p.add_column_vector(&model.b0);
        let mut h = p.clone();
        h.clamp_nonneg();
        let mut z = model.u1.t_matmul(&h);
        z.add_column_vector(&model.b1);
        logits.push(z);
        pre.push(p);
        hidden.push(h);
    }
    ForwardPass { pre, hidden, logits }
}

fn check_batch(model: &LiftedRnnModel, x: &SeqTensor, y: &SeqTensor) -> Result<(), BaselineError> {
    if x.samples() == 0 || x.is_empty() {
        return Err(BaselineError::Shape("empty batch".into()));
    }
    if x.features() != model.input_size()
        || y.features() != model.output_size()
        || x.samples() != y.samples()
        || x.len() != y.len()
    {
        return Err(BaselineError::Shape(format!(
            "model (i={}, o={}) vs inputs {}x{}x{} and labels {}x{}x{}",
            model.input_size(),
            model.output_size(),
            x.samples(),
            x.features(),
            x.len(),
            y.samples(),
            y.features(),
            y.len()
        )));
    }
    Ok(())
}

fn regularizer(model: &LiftedRnnModel, rho: f64) -> f64 {
    rho * (model.u0.frobenius_sq() + model.u1.frobenius_sq() + model.w.frobenius_sq())
}

/// Mean softmax cross-entropy over all (sample, timestep) pairs plus
/// `rho·(‖U0‖² + ‖U1‖² + ‖W‖²)`.
pub fn loss(model: &LiftedRnnModel, x: &SeqTensor, y: &SeqTensor, rho: f64) -> Result<f64, BaselineError> {
    check_batch(model, x, y)?;
    let pass = forward(model, x);
    Ok(data_loss(&pass, y, LossReduction::Mean) + regularizer(model, rho))
}

fn data_loss(pass: &ForwardPass, y: &SeqTensor, reduction: LossReduction) -> f64 {
    let total: f64 = pass
        .logits
        .iter()
        .zip(y.steps())
        .map(|(z, y_t)| cross_entropy(&log_softmax_rows(&z.transpose()), y_t))
        .sum();
    reduction.weight(y.samples(), y.len()) * total
}

/// Exact gradient of [`loss`], returned in the model's own layout. The ReLU
/// derivative at a pre-activation of exactly zero is taken as zero.
pub fn grad_bptt(
    model: &LiftedRnnModel,
    x: &SeqTensor,
    y: &SeqTensor,
    rho: f64,
) -> Result<LiftedRnnModel, BaselineError> {
    check_batch(model, x, y)?;
    let pass = forward(model, x);
    Ok(backward(model, x, y, rho, LossReduction::Mean, &pass))
}

fn backward(
    model: &LiftedRnnModel,
    x: &SeqTensor,
    y: &SeqTensor,
    rho: f64,
    reduction: LossReduction,
    pass: &ForwardPass,
) -> LiftedRnnModel {
    let t_len = x.len();
    let scale = reduction.weight(x.samples(), t_len);
    let mut grad = LiftedRnnModel::zeros(model.input_size(), model.hidden_size(), model.output_size());
    let mut carry: Option<DenseMatrix> = None;

    for t in (0..t_len).rev() {
        let d_logits = softmax_rows(&pass.logits[t].transpose())
            .sub(y.step(t))
            .scale(scale)
            .transpose();
        let h = &pass.hidden[t];
        grad.u1.add_assign(&h.matmul_t(&d_logits));
        add_into(&mut grad.b1, &d_logits.row_sums());

        let mut d_hidden = model.u1.matmul(&d_logits);
        if let Some(d_next) = &carry {
            d_hidden.add_assign(&model.w.matmul(d_next));
        }
        let d_pre = d_hidden.zip_map(&pass.pre[t], |g, p| if p > 0.0 { g } else { 0.0 });

        grad.u0.add_assign(&x.step(t).transpose().matmul_t(&d_pre));
        if t > 0 {
            grad.w.add_assign(&pass.hidden[t - 1].matmul_t(&d_pre));
        }
        add_into(&mut grad.b0, &d_pre.row_sums());
        carry = Some(d_pre);
    }

    grad.u0.axpy(2.0 * rho, &model.u0);
    grad.w.axpy(2.0 * rho, &model.w);
    grad.u1.axpy(2.0 * rho, &model.u1);
    grad
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[derive(Clone, Debug)]
pub struct SgdOutcome {
    pub model: LiftedRnnModel,
    /// Mini-batch loss evaluated before each update.
    pub losses: Vec<f64>,
}

/// Seed offset separating the mini-batch shuffle stream from the weight
/// initialization stream.
const SHUFFLE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mini-batch SGD from [`init_model`]`(i, h, o, seed)`.
///
/// Each epoch draws a fresh permutation (Fisher–Yates on a stream seeded with
/// `seed + 0x9E3779B97F4A7C15`) and walks it in consecutive batches of
/// `batch_size`; a short trailing batch is dropped.
pub fn sgd_train(x: &SeqTensor, y: &SeqTensor, config: &SgdConfig) -> Result<SgdOutcome, BaselineError> {
    config.validate()?;
    let m = x.samples();
    if config.batch_size > m {
        return Err(BaselineError::InvalidConfig(format!(
            "batch size {} exceeds training set size {m}",
            config.batch_size
        )));
    }
    let mut model = init_model(x.features(), config.hidden_size, y.features(), config.seed);
    check_batch(&model, x, y)?;
    let mut rng = Rng::new(config.seed.wrapping_add(SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..m).collect();
    let per_epoch = m / config.batch_size;
    let full_batch = per_epoch == 1 && config.batch_size == m;
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let slot = step % per_epoch;
        if slot == 0 && !full_batch {
            rng.shuffle(&mut order);
        }
        let (xb, yb) = if full_batch {
            (x.clone(), y.clone())
        } else {
            let idx = &order[slot * config.batch_size..(slot + 1) * config.batch_size];
            (x.select_samples(idx), y.select_samples(idx))
        };
        let pass = forward(&model, &xb);
        let value = data_loss(&pass, &yb, config.reduction) + regularizer(&model, config.rho);
        if !value.is_finite() {
            return Err(BaselineError::Diverged { step });
        }
        losses.push(value);
        let grad = backward(&model, &xb, &yb, config.rho, config.reduction, &pass);
        let lr = config.learning_rate(step);
        model.u0.axpy(-lr, &grad.u0);
        model.w.axpy(-lr, &grad.w);
        model.u1.axpy(-lr, &grad.u1);
        for (b, g) in model.b0.iter_mut().zip(&grad.b0) {
            *b -= lr * g;
        }
        for (b, g) in model.b1.iter_mut().zip(&grad.b1) {
            *b -= lr * g;
        }
    }
    Ok(SgdOutcome { model, losses })
}
