use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, SeqTensor};

use super::{DatasetMeta, SequenceDataset};

/// Malformed dataset file. `location` is `line:column` for JSON syntax
/// errors and a path such as `x[3][0]` for schema violations.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{location}: {message}")]
pub struct ParseError {
    pub location: String,
    pub message: String,
}

impl ParseError {
    fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    meta: DatasetMeta,
    x: Vec<Vec<Vec<f64>>>,
    y: Vec<Vec<Vec<f64>>>,
}

/// `{"meta": …, "x": [m][i][T], "y": [m][o][T]}`. Floats are written in
/// shortest round-trip form, so parsing restores every bit.
pub fn serialize(ds: &SequenceDataset) -> Vec<u8> {
    let file = DatasetFile {
        meta: ds.meta.clone(),
        x: ds.x.to_nested(),
        y: ds.y.to_nested(),
    };
    serde_json::to_vec(&file).expect("dataset values are finite")
}

pub fn deserialize(bytes: &[u8]) -> Result<SequenceDataset, ParseError> {
    let file: DatasetFile = serde_json::from_slice(bytes).map_err(|e| {
        ParseError::at(format!("{}:{}", e.line(), e.column()), e.to_string())
    })?;
    let meta = file.meta;
    let x = tensor_from_nested("x", &file.x, meta.m, meta.i, meta.length)?;
    let y = tensor_from_nested("y", &file.y, meta.m, meta.o, meta.length)?;
    for (t, step) in y.steps().iter().enumerate() {
        for s in 0..step.rows() {
            let row = step.row(s);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(ParseError::at(
                    format!("y[{s}][*][{t}]"),
                    "label column is not one-hot",
                ));
            }
        }
    }
    Ok(SequenceDataset { x, y, meta })
}

fn tensor_from_nested(
    name: &str,
    nested: &[Vec<Vec<f64>>],
    m: usize,
    features: usize,
    length: usize,
) -> Result<SeqTensor, ParseError> {
    if nested.len() != m {
        return Err(ParseError::at(
            name,
            format!("expected {m} samples, found {}", nested.len()),
        ));
    }
    let mut steps = vec![DenseMatrix::zeros(m, features); length];
    for (s, sample) in nested.iter().enumerate() {
        if sample.len() != features {
            return Err(ParseError::at(
                format!("{name}[{s}]"),
                format!("expected {features} features, found {}", sample.len()),
            ));
        }
        for (f, series) in sample.iter().enumerate() {
            if series.len() != length {
                return Err(ParseError::at(
                    format!("{name}[{s}][{f}]"),
                    format!("expected {length} timesteps, found {}", series.len()),
                ));
            }
            for (t, &v) in series.iter().enumerate() {
                steps[t][(s, f)] = v;
            }
        }
    }
    if length == 0 {
        return Err(ParseError::at("meta.T", "sequence length must be at least 1"));
    }
    SeqTensor::from_steps(steps).map_err(|e| ParseError::at(name, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::super::{generate, GeneratorSpec};
    use super::*;

    #[test]
    fn round_trip_each_generator() {
        for spec in [
            GeneratorSpec::SumThreshold { length: 5 },
            GeneratorSpec::Timer {
                length: 6,
                max_timer: 3,
                on_fraction: 0.3,
            },
            GeneratorSpec::ar2(4),
            GeneratorSpec::LagEcho {
                length: 5,
                num_classes: 3,
                lag: 1,
            },
        ] {
            let ds = generate(&spec, 3, 99).unwrap();
            let back = deserialize(&serialize(&ds)).unwrap();
            assert_eq!(ds, back);
        }
    }

    #[test]
    fn truncated_file() {
        let ds = generate(&GeneratorSpec::SumThreshold { length: 3 }, 2, 1).unwrap();
        let bytes = serialize(&ds);
        let err = deserialize(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(err.location.contains(':'), "{err}");
    }

    #[test]
    fn hand_written_file() {
        let text = r#"{
            "meta": {"generator": "sum_threshold", "params": {"kind": "sum_threshold", "length": 2},
                     "seed": 0, "m": 1, "i": 1, "o": 2, "T": 2},
            "x": [[[0.5, -1.0]]],
            "y": [[[1, 0], [0, 1]]]
        }"#;
        let ds = deserialize(text.as_bytes()).unwrap();
        assert_eq!(ds.samples(), 1);
        assert_eq!(ds.x.get(0, 0, 1), -1.0);
        assert_eq!(ds.y.get(0, 1, 1), 1.0);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let text = r#"{"meta": {"generator": "sum_threshold", "params": {"kind": "sum_threshold", "length": 2},
                     "seed": 0, "m": 1, "i": 1, "o": 2, "T": 2},
            "x": [[[0.5]]], "y": [[[1, 0], [0, 1]]]}"#;
        assert_eq!(deserialize(text.as_bytes()).unwrap_err().location, "x[0][0]");
        let text = text.replace("[[[0.5]]]", "[[[0.5, 0.1]]]").replace("[0, 1]]", "[0, 0]]");
        assert_eq!(deserialize(text.as_bytes()).unwrap_err().location, "y[0][*][1]");
    }
}
