//! Seeded synthetic sequence tasks and their JSON file format.
//!
//! Every generator consumes one [`Rng`] stream sample by sample, and within a
//! sample step by step. The exact draws per step are documented on
//! [`generate`] so that other implementations can reproduce datasets bit for
//! bit.

mod io;

pub use io::{deserialize, serialize, ParseError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, SeqTensor};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("could not calibrate timer on-fraction: {0}")]
    Calibration(String),
}

/// Class index used for "on" labels; "off" is index 1.
pub const ON: usize = 0;
pub const OFF: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Uniform(−1, 1) inputs; label "on" while the running sum is positive.
    SumThreshold { length: usize },
    /// Jaeger-style timer: inputs (timer value, switch, 1 − switch).
    Timer {
        length: usize,
        max_timer: u32,
        on_fraction: f64,
    },
    /// AR(2) process with standard normal noise; label "on" while `x_t > 0`.
    Ar2 {
        length: usize,
        #[serde(default = "default_a1")]
        a1: f64,
        #[serde(default = "default_a2")]
        a2: f64,
    },
    /// One-hot inputs echoed at a fixed lag.
    LagEcho {
        length: usize,
        num_classes: usize,
        lag: usize,
    },
}

fn default_a1() -> f64 {
    -0.6
}

fn default_a2() -> f64 {
    0.3
}

impl GeneratorSpec {
    pub fn ar2(length: usize) -> Self {
        Self::Ar2 {
            length,
            a1: default_a1(),
            a2: default_a2(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SumThreshold { .. } => "sum_threshold",
            Self::Timer { .. } => "timer",
            Self::Ar2 { .. } => "ar2",
            Self::LagEcho { .. } => "lag_echo",
        }
    }

    pub fn length(&self) -> usize {
        match *self {
            Self::SumThreshold { length }
            | Self::Timer { length, .. }
            | Self::Ar2 { length, .. }
            | Self::LagEcho { length, .. } => length,
        }
    }

    /// Same generator with a different sequence length.
    pub fn with_length(&self, length: usize) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            Self::SumThreshold { length: l }
            | Self::Timer { length: l, .. }
            | Self::Ar2 { length: l, .. }
            | Self::LagEcho { length: l, .. } => *l = length,
        }
        spec
    }

    /// `(input features, output classes)`.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Self::SumThreshold { .. } | Self::Ar2 { .. } => (1, 2),
            Self::Timer { .. } => (3, 2),
            Self::LagEcho { num_classes, .. } => (num_classes, num_classes),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| Err(DatasetError::InvalidSpec(msg));
        if self.length() == 0 {
            return bad("length must be at least 1".into());
        }
        match *self {
            Self::Timer {
                max_timer,
                on_fraction,
                ..
            } => {
                if max_timer == 0 {
                    return bad("max_timer must be at least 1".into());
                }
                if !(0.0..=1.0).contains(&on_fraction) {
                    return bad(format!("on_fraction {on_fraction} outside [0, 1]"));
                }
            }
            Self::Ar2 { a1, a2, .. } if !(a1.is_finite() && a2.is_finite()) => {
                return bad("AR coefficients must be finite".into());
            }
            Self::LagEcho {
                length,
                num_classes,
                lag,
            } => {
                if num_classes == 0 {
                    return bad("num_classes must be at least 1".into());
                }
                if lag == 0 || lag >= length {
                    return bad(format!("lag {lag} must satisfy 1 <= lag < length {length}"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub params: GeneratorSpec,
    pub seed: u64,
    pub m: usize,
    pub i: usize,
    pub o: usize,
    #[serde(rename = "T")]
    pub length: usize,
}

/// Inputs `x` (m × i × T) with one-hot labels `y` (m × o × T).
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDataset {
    pub x: SeqTensor,
    pub y: SeqTensor,
    pub meta: DatasetMeta,
}

impl SequenceDataset {
    pub fn samples(&self) -> usize {
        self.x.samples()
    }

    /// Fraction of (sample, timestep) labels equal to class 0.
    pub fn class0_fraction(&self) -> f64 {
        let total = (self.y.samples() * self.y.len()) as f64;
        let on: f64 = self.y.steps().iter().map(|s| s.column(ON).iter().sum::<f64>()).sum();
        on / total
    }
}

fn one_hot_row(classes: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; classes];
    row[k] = 1.0;
    row
}

/// Labels for one sum-threshold sequence: class 0 while the running sum is
/// strictly positive, class 1 otherwise (a sum of exactly zero is "off").
/// Returned as `T` one-hot rows.
pub fn sum_threshold_labels(x: &[f64]) -> Vec<[f64; 2]> {
    let mut sum = 0.0;
    x.iter()
        .map(|&v| {
            sum += v;
            if sum > 0.0 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        })
        .collect()
}

/// Timer labels and running-timer trace.
///
/// The running timer starts at 0. Each step it first decays by one (floored
/// at zero); if the switch is on it becomes `max(timer, value)`. The label is
/// "on" exactly when the timer is positive.
pub fn timer_labels(values: &[u32], switches: &[bool]) -> (Vec<[f64; 2]>, Vec<u32>) {
    let mut running = 0u32;
    let mut labels = Vec::with_capacity(values.len());
    let mut trace = Vec::with_capacity(values.len());
    for (&v, &on) in values.iter().zip(switches) {
        running = running.saturating_sub(1);
        if on {
            running = running.max(v);
        }
        trace.push(running);
        labels.push(if running > 0 { [1.0, 0.0] } else { [0.0, 1.0] });
    }
    (labels, trace)
}

/// Generates `m` sequences from one [`Rng`] seeded with `seed`.
///
/// Draw order, for each sample and then for each step `t`:
///
/// * `SumThreshold`: one uniform, `x_t = 2u − 1`.
/// * `Timer`: one uniform for the switch (`on` iff `u < on_fraction`), then one
///   uniform for the value `1 + floor(u·p)`.
/// * `Ar2`: one normal (two uniforms) for `w_t`; `x_{−1} = x_{−2} = 0`. The
///   input at step `t` is `x_t` itself.
/// * `LagEcho`: one uniform for the input class `floor(u·C)`, then, only while
///   `t < lag`, one uniform for the random label class.
pub fn generate(spec: &GeneratorSpec, m: usize, seed: u64) -> Result<SequenceDataset, DatasetError> {
    spec.validate()?;
    let length = spec.length();
    let (i, o) = spec.dims();
    let mut rng = Rng::new(seed);
    let mut x = SeqTensor::zeros(m, i, length);
    let mut y = SeqTensor::zeros(m, o, length);

    let write_labels = |y: &mut SeqTensor, s: usize, rows: &[[f64; 2]]| {
        for (t, row) in rows.iter().enumerate() {
            y.set(s, 0, t, row[0]);
            y.set(s, 1, t, row[1]);
        }
    };

    for s in 0..m {
        match *spec {
            GeneratorSpec::SumThreshold { .. } => {
                let xs: Vec<f64> = (0..length).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                for (t, &v) in xs.iter().enumerate() {
                    x.set(s, 0, t, v);
                }
                write_labels(&mut y, s, &sum_threshold_labels(&xs));
            }
            GeneratorSpec::Timer {
                max_timer,
                on_fraction,
                ..
            } => {
                let mut values = Vec::with_capacity(length);
                let mut switches = Vec::with_capacity(length);
                for t in 0..length {
                    let on = rng.uniform() < on_fraction;
                    let value = 1 + rng.below(max_timer as usize) as u32;
                    x.set(s, 0, t, f64::from(value));
                    x.set(s, 1, t, if on { 1.0 } else { 0.0 });
                    x.set(s, 2, t, if on { 0.0 } else { 1.0 });
                    values.push(value);
                    switches.push(on);
                }
                write_labels(&mut y, s, &timer_labels(&values, &switches).0);
            }
            GeneratorSpec::Ar2 { a1, a2, .. } => {
                let (mut prev1, mut prev2) = (0.0, 0.0);
                for t in 0..length {
                    let v = a1 * prev1 + a2 * prev2 + rng.normal();
                    x.set(s, 0, t, v);
                    let class = if v > 0.0 { ON } else { OFF };
                    y.set(s, class, t, 1.0);
                    prev2 = prev1;
                    prev1 = v;
                }
            }
            GeneratorSpec::LagEcho {
                num_classes, lag, ..
            } => {
                let mut inputs = Vec::with_capacity(length);
                for t in 0..length {
                    let c = rng.below(num_classes);
                    x.set(s, c, t, 1.0);
                    inputs.push(c);
                    if t < lag {
                        let label = rng.below(num_classes);
                        y.set(s, label, t, 1.0);
                    }
                }
                for t in lag..length {
                    y.set(s, inputs[t - lag], t, 1.0);
                }
            }
        }
    }

    Ok(SequenceDataset {
        x,
        y,
        meta: DatasetMeta {
            generator: spec.name().to_string(),
            params: spec.clone(),
            seed,
            m,
            i,
            o,
            length,
        },
    })
}

/// One-hot matrix helper for tests and callers building labels by hand.
pub fn one_hot_matrix(classes: usize, labels: &[usize]) -> DenseMatrix {
    let rows: Vec<Vec<f64>> = labels.iter().map(|&k| one_hot_row(classes, k)).collect();
    DenseMatrix::from_rows(&rows).expect("one-hot rows are finite")
}

pub const CALIBRATION_SAMPLES: usize = 10_000;
pub const CALIBRATION_BAND: (f64, f64) = (0.48, 0.52);

/// Bisects the timer's on-fraction until the class-0 share over
/// [`CALIBRATION_SAMPLES`] sequences lands in [`CALIBRATION_BAND`].
///
/// All candidates reuse the same seed, so the switch draws are common random
/// numbers and the balance is monotone in the fraction.
pub fn calibrate_on_fraction(length: usize, max_timer: u32, seed: u64) -> Result<f64, DatasetError> {
    let balance = |f: f64| -> Result<f64, DatasetError> {
        let spec = GeneratorSpec::Timer {
            length,
            max_timer,
            on_fraction: f,
        };
        Ok(generate(&spec, CALIBRATION_SAMPLES, seed)?.class0_fraction())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let b = balance(mid)?;
        if (CALIBRATION_BAND.0..=CALIBRATION_BAND.1).contains(&b) {
            return Ok(mid);
        }
        if b < CALIBRATION_BAND.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(DatasetError::Calibration(format!(
        "no fraction in [{lo}, {hi}] balances length {length}, max_timer {max_timer}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_sum_worked_example() {
        let x = [-0.26, 0.55, -0.78, 0.05, 0.89, 0.12];
        let labels = sum_threshold_labels(&x);
        let on: Vec<f64> = labels.iter().map(|r| r[0]).collect();
        let off: Vec<f64> = labels.iter().map(|r| r[1]).collect();
        assert_eq!(on, vec![0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(off, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let rs: Vec<f64> = x
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let expect = [-0.26, 0.29, -0.49, -0.44, 0.45, 0.57];
        for (a, b) in rs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn running_sum_edge_cases() {
        assert!(sum_threshold_labels(&[0.1, 0.2, 0.3]).iter().all(|r| r[0] == 1.0));
        assert_eq!(sum_threshold_labels(&[0.0]), vec![[0.0, 1.0]]);
    }

    #[test]
    fn timer_worked_example() {
        let (labels, trace) = timer_labels(
            &[3, 2, 5, 4, 2, 4],
            &[false, true, false, false, true, false],
        );
        assert_eq!(trace, vec![0, 2, 1, 0, 2, 1]);
        let on: Vec<f64> = labels.iter().map(|r| r[0]).collect();
        assert_eq!(on, vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn timer_single_switch_lasts_p_steps() {
        let p = 7;
        let mut switches = vec![false; 20];
        switches[0] = true;
        let (labels, _) = timer_labels(&[p; 20], &switches);
        let on = labels.iter().filter(|r| r[0] == 1.0).count();
        assert_eq!(on, p as usize);
        assert!(labels[..p as usize].iter().all(|r| r[0] == 1.0));
        let (labels, _) = timer_labels(&[5; 10], &[false; 10]);
        assert!(labels.iter().all(|r| r[1] == 1.0));
    }

    #[test]
    fn generation_is_deterministic() {
        for spec in [
            GeneratorSpec::SumThreshold { length: 7 },
            GeneratorSpec::Timer {
                length: 9,
                max_timer: 4,
                on_fraction: 0.2,
            },
            GeneratorSpec::ar2(6),
            GeneratorSpec::LagEcho {
                length: 8,
                num_classes: 3,
                lag: 2,
            },
        ] {
            let a = generate(&spec, 5, 17).unwrap();
            let b = generate(&spec, 5, 17).unwrap();
            assert_eq!(a, b);
            let c = generate(&spec, 5, 18).unwrap();
            assert_ne!(a.x, c.x);
        }
    }

    #[test]
    fn timer_never_on_without_switches() {
        let spec = GeneratorSpec::Timer {
            length: 30,
            max_timer: 5,
            on_fraction: 0.0,
        };
        let ds = generate(&spec, 10, 1).unwrap();
        assert_eq!(ds.class0_fraction(), 0.0);
    }

    #[test]
    fn lag_echo_copies_inputs() {
        let spec = GeneratorSpec::LagEcho {
            length: 10,
            num_classes: 4,
            lag: 3,
        };
        let ds = generate(&spec, 20, 5).unwrap();
        for t in 3..10 {
            assert_eq!(ds.y.step(t), ds.x.step(t - 3));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GeneratorSpec::SumThreshold { length: 0 }, 1, 0).is_err());
        let lag = GeneratorSpec::LagEcho {
            length: 4,
            num_classes: 2,
            lag: 4,
        };
        assert!(matches!(generate(&lag, 1, 0), Err(DatasetError::InvalidSpec(_))));
        let timer = GeneratorSpec::Timer {
            length: 4,
            max_timer: 0,
            on_fraction: 0.5,
        };
        assert!(generate(&timer, 1, 0).is_err());
    }
}
