use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use liftrnn::baseline::sgd_train;
use liftrnn::datasets::{calibrate_on_fraction, generate, GeneratorSpec, SequenceDataset};
use liftrnn::lifted::{accuracy, predict, train_bcd, Task};

use crate::config::{ExperimentConfig, Method, CALIBRATION_SEED_OFFSET};
use crate::HarnessError;

pub const CSV_HEADER: [&str; 7] = ["dataset", "value", "method", "mean_acc", "std_acc", "seconds", "seeds"];

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub value: usize,
    pub method: Method,
    pub mean_acc: f64,
    /// Population standard deviation over repeats.
    pub std_acc: f64,
    /// Summed training and evaluation time over repeats.
    pub seconds: f64,
    pub seeds: Vec<u64>,
    /// Per-repeat test accuracies in seed order.
    pub accuracies: Vec<f64>,
}

/// Outcome of one (value, method, repeat) job.
#[derive(Clone, Debug)]
pub struct RepeatResult {
    pub accuracy: f64,
    pub seconds: f64,
}

/// Trains one method on `train` and returns test accuracy.
pub fn train_and_score(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    train: &SequenceDataset,
    test: &SequenceDataset,
) -> Result<f64, HarnessError> {
    let model = match method {
        Method::Lifted => train_bcd(&train.x, &train.y, &cfg.lifted_hyper(), seed)?.model,
        Method::Sgd => sgd_train(&train.x, &train.y, &cfg.sgd_config(seed))?.model,
    };
    let pred = predict(&model, &test.x, Task::Classification)?;
    Ok(accuracy(&pred, &test.y)?)
}

fn run_repeat(cfg: &ExperimentConfig, spec: &GeneratorSpec, method: Method, r: usize) -> Result<RepeatResult, HarnessError> {
    let start = Instant::now();
    let seed = cfg.repeat_seed(r);
    let train = generate(spec, cfg.train_size, seed)?;
    let test = generate(spec, cfg.test_size, cfg.test_seed(r))?;
    let accuracy = train_and_score(cfg, method, seed, &train, &test)?;
    Ok(RepeatResult {
        accuracy,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Worker count from `LIFTED_SEQ_THREADS`; unset, empty or 0 means one per
/// available core.
pub fn thread_count() -> Result<usize, HarnessError> {
    match std::env::var("LIFTED_SEQ_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| HarnessError::Config(format!("LIFTED_SEQ_THREADS={v:?} is not a count"))),
        _ => Ok(0),
    }
}

pub fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every (value, method, repeat) job and aggregates rows in config
/// order. Jobs run on a pool of [`thread_count`] workers; results are
/// gathered by index so the output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let specs: Vec<GeneratorSpec> = pool.install(|| {
        cfg.values
            .par_iter()
            .map(|&v| {
                let on_fraction = if cfg.calibrate_on_fraction {
                    let probe = cfg.spec_for(v, None);
                    let GeneratorSpec::Timer { length, max_timer, .. } = probe else {
                        unreachable!("validated as timer");
                    };
                    Some(calibrate_on_fraction(length, max_timer, cfg.base_seed + CALIBRATION_SEED_OFFSET)?)
                } else {
                    None
                };
                Ok(cfg.spec_for(v, on_fraction))
            })
            .collect::<Result<_, HarnessError>>()
    })?;

    let jobs: Vec<(usize, Method, usize)> = (0..cfg.values.len())
        .flat_map(|vi| {
            cfg.methods
                .iter()
                .flat_map(move |&m| (0..cfg.repeats).map(move |r| (vi, m, r)))
        })
        .collect();
    let results: Vec<Result<RepeatResult, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(vi, method, r)| run_repeat(cfg, &specs[vi], method, r))
            .collect()
    });

    let mut rows = Vec::new();
    let mut results = results.into_iter();
    for (vi, &value) in cfg.values.iter().enumerate() {
        for &method in &cfg.methods {
            let mut accuracies = Vec::with_capacity(cfg.repeats);
            let mut seconds = 0.0;
            for r in 0..cfg.repeats {
                let outcome = results.next().expect("one result per job").map_err(|e| HarnessError::Repeat {
                    dataset: specs[vi].name().to_string(),
                    value,
                    method: method.as_str(),
                    seed: cfg.repeat_seed(r),
                    source: Box::new(e),
                })?;
                accuracies.push(outcome.accuracy);
                seconds += outcome.seconds;
            }
            let (mean_acc, std_acc) = mean_and_population_std(&accuracies);
            rows.push(ResultRow {
                dataset: specs[vi].name().to_string(),
                value,
                method,
                mean_acc,
                std_acc,
                seconds: if cfg.timing { seconds } else { 0.0 },
                seeds: (0..cfg.repeats).map(|r| cfg.repeat_seed(r)).collect(),
                accuracies,
            });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        let seeds: Vec<String> = row.seeds.iter().map(u64::to_string).collect();
        writer.write_record([
            row.dataset.clone(),
            row.value.to_string(),
            row.method.as_str().to_string(),
            format!("{:.6}", row.mean_acc),
            format!("{:.6}", row.std_acc),
            format!("{:.3}", row.seconds),
            seeds.join(";"),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
