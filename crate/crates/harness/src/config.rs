use serde::{Deserialize, Serialize};

use liftrnn::baseline::SgdConfig;
use liftrnn::datasets::GeneratorSpec;
use liftrnn::lifted::LiftedHyperparams;

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lifted,
    Sgd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lifted => "lifted",
            Method::Sgd => "sgd",
        }
    }
}

/// Which generator parameter the `values` list replaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Length,
    /// Timer `max_timer`.
    MaxDependency,
    /// LagEcho `lag`.
    Lag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub sweep: SweepVariable,
    pub values: Vec<usize>,
    pub methods: Vec<Method>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Overrides the hidden size of both methods.
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    #[serde(default)]
    pub lifted: LiftedHyperparams,
    #[serde(default)]
    pub sgd: SgdConfig,
    #[serde(default)]
    pub base_seed: u64,
    /// Timer only: recalibrate `on_fraction` for every swept value so the
    /// classes are balanced.
    #[serde(default)]
    pub calibrate_on_fraction: bool,
    /// Record wall-clock seconds; when false the column is written as 0 so the
    /// CSV is byte-identical across runs.
    #[serde(default = "default_true")]
    pub timing: bool,
}

fn default_repeats() -> usize {
    5
}
fn default_train_size() -> usize {
    200
}
fn default_test_size() -> usize {
    1000
}
fn default_hidden() -> usize {
    10
}
fn default_true() -> bool {
    true
}

/// Offset between the training seed and the test-set seed of a repeat.
pub const TEST_SEED_OFFSET: u64 = 10_000;
/// Offset of the seed used for on-fraction calibration.
pub const CALIBRATION_SEED_OFFSET: u64 = 20_000;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.values.is_empty() {
            return bad("values must be non-empty".into());
        }
        if self.methods.is_empty() {
            return bad("methods must be non-empty".into());
        }
        if self.train_size == 0 || self.test_size == 0 {
            return bad("train_size and test_size must be at least 1".into());
        }
        match (self.sweep, &self.generator) {
            (SweepVariable::Length, _)
            | (SweepVariable::MaxDependency, GeneratorSpec::Timer { .. })
            | (SweepVariable::Lag, GeneratorSpec::LagEcho { .. }) => {}
            (sweep, generator) => {
                return bad(format!("cannot sweep {sweep:?} on generator {}", generator.name()));
            }
        }
        if self.calibrate_on_fraction && !matches!(self.generator, GeneratorSpec::Timer { .. }) {
            return bad("calibrate_on_fraction only applies to the timer generator".into());
        }
        for &v in &self.values {
            self.spec_for(v, None).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.lifted_hyper().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let sgd = self.sgd_config(0);
        sgd.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.methods.contains(&Method::Sgd) && sgd.batch_size > self.train_size {
            return bad(format!(
                "SGD batch size {} exceeds train_size {}",
                sgd.batch_size, self.train_size
            ));
        }
        Ok(())
    }

    /// Generator with the swept parameter set to `value`; `on_fraction`
    /// replaces the timer's switch probability when given.
    pub fn spec_for(&self, value: usize, on_fraction: Option<f64>) -> GeneratorSpec {
        let mut spec = self.generator.clone();
        match (&mut spec, self.sweep) {
            (s, SweepVariable::Length) => *s = s.with_length(value),
            (GeneratorSpec::Timer { max_timer, .. }, SweepVariable::MaxDependency) => {
                *max_timer = u32::try_from(value).unwrap_or(u32::MAX);
            }
            (GeneratorSpec::LagEcho { lag, .. }, SweepVariable::Lag) => *lag = value,
            _ => {}
        }
        if let (GeneratorSpec::Timer { on_fraction: f, .. }, Some(v)) = (&mut spec, on_fraction) {
            *f = v;
        }
        spec
    }

    pub fn lifted_hyper(&self) -> LiftedHyperparams {
        LiftedHyperparams {
            hidden_size: self.hidden_size,
            ..self.lifted.clone()
        }
    }

    pub fn sgd_config(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            hidden_size: self.hidden_size,
            seed,
            ..self.sgd.clone()
        }
    }

    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.base_seed + r as u64
    }

    pub fn test_seed(&self, r: usize) -> u64 {
        self.base_seed + TEST_SEED_OFFSET + r as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "generator": {"kind": "sum_threshold", "length": 10},
        "sweep": "length", "values": [10, 20], "methods": ["lifted", "sgd"]
    }"#;

    #[test]
    fn defaults_follow_the_protocol() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!((cfg.repeats, cfg.train_size, cfg.test_size), (5, 200, 1000));
        assert_eq!(cfg.lifted.lambda, 0.1);
        assert_eq!(cfg.lifted.rho1, 0.1);
        assert_eq!(cfg.sgd.rho, 1e-3);
        assert_eq!(cfg.sgd.lr0, 1e-4);
        assert_eq!(cfg.repeat_seed(3), 3);
        assert_eq!(cfg.test_seed(3), 10_003);
        assert_eq!(cfg.spec_for(20, None), GeneratorSpec::SumThreshold { length: 20 });
    }

    #[test]
    fn rejects_bad_configs() {
        let no_values = MINIMAL.replace("[10, 20]", "[]");
        assert!(ExperimentConfig::from_json(&no_values).is_err());
        let lag_on_sum = MINIMAL.replace("\"length\", \"values\"", "\"lag\", \"values\"");
        assert!(ExperimentConfig::from_json(&lag_on_sum).is_err());
        let zero_repeats = MINIMAL.replace("\"methods\"", "\"repeats\": 0, \"methods\"");
        assert!(ExperimentConfig::from_json(&zero_repeats).is_err());
        let unknown = MINIMAL.replace("\"methods\"", "\"bogus\": 1, \"methods\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn sweeps_set_the_right_parameter() {
        let timer = r#"{"generator": {"kind": "timer", "length": 60, "max_timer": 10, "on_fraction": 0.1},
            "sweep": "max_dependency", "values": [30], "methods": ["sgd"]}"#;
        let cfg = ExperimentConfig::from_json(timer).unwrap();
        assert_eq!(
            cfg.spec_for(30, Some(0.05)),
            GeneratorSpec::Timer { length: 60, max_timer: 30, on_fraction: 0.05 }
        );
    }
}
