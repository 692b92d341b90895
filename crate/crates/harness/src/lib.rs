//! Experiment runner and command-line front end for the `liftrnn` crate.

pub mod cli;
pub mod config;
pub mod run;
pub mod selftest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use liftrnn::baseline::BaselineError;
use liftrnn::datasets::{DatasetError, ParseError};
use liftrnn::lifted::{LiftedError, LiftedRnnModel};

pub use config::{ExperimentConfig, Method, SweepVariable};
pub use run::{run_experiment, write_csv, ResultRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("dataset file {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Lifted(#[from] LiftedError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{dataset} value {value} method {method} seed {seed}: {source}")]
    Repeat {
        dataset: String,
        value: usize,
        method: &'static str,
        seed: u64,
        source: Box<HarnessError>,
    },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

/// Trained weights as written by `train` and read by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: Method,
    pub model: LiftedRnnModel,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model weights are finite")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let file: Self = serde_json::from_str(text).map_err(|e| HarnessError::ModelFile(e.to_string()))?;
        file.model.validate()?;
        Ok(file)
    }
}

pub(crate) fn read_file(path: &str) -> Result<Vec<u8>, HarnessError> {
    std::fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &str, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_string(),
        source,
    })
}
