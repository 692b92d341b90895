use std::ffi::OsString;

use clap::{Parser, Subcommand, ValueEnum};

use liftrnn::baseline::{sgd_train, SgdConfig};
use liftrnn::datasets::{deserialize, generate, serialize, GeneratorSpec};
use liftrnn::lifted::{accuracy, predict, train_bcd, LiftedHyperparams, Task};

use crate::{read_file, run, write_file, ExperimentConfig, HarnessError, Method, ModelFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "liftrnn", version, about = "Lifted RNN experiments on synthetic sequence tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Lifted,
    Sgd,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset file.
    Generate {
        /// Generator spec: inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Train one method on a dataset file.
    Train {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        data: String,
        /// Hyperparameters: inline JSON or a path; omitted fields keep defaults.
        #[arg(long)]
        config: Option<String>,
        /// Seed for weight initialization (SGD also uses it for batching).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_model: String,
    },
    /// Report per-timestep classification accuracy of a model on a dataset.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: String,
    },
    /// Run a sweep and write the results CSV.
    Experiment {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
    },
    /// Run solver-oracle and gradient checks.
    Selftest,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Errors go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Inline JSON if the argument starts with `{`, otherwise a file path.
fn json_arg(arg: &str) -> Result<String, HarnessError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        String::from_utf8(read_file(arg)?).map_err(|e| HarnessError::Config(format!("{arg}: {e}")))
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, HarnessError> {
    serde_json::from_str(&json_arg(arg)?).map_err(|e| HarnessError::Config(format!("{what}: {e}")))
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Generate { spec, m, seed, out } => {
            let spec: GeneratorSpec = parse_json(&spec, "generator spec")?;
            let ds = generate(&spec, m, seed)?;
            write_file(&out, &serialize(&ds))?;
        }
        Command::Train {
            method,
            data,
            config,
            seed,
            out_model,
        } => {
            let ds = deserialize(&read_file(&data)?)?;
            let config = config.as_deref().unwrap_or("{}");
            let file = match method {
                MethodArg::Lifted => {
                    let hyper: LiftedHyperparams = parse_json(config, "lifted config")?;
                    let outcome = train_bcd(&ds.x, &ds.y, &hyper, seed)?;
                    eprintln!(
                        "objective {:.6e} -> {:.6e} after {} sweeps",
                        outcome.trace[0],
                        outcome.trace[outcome.sweeps_run()],
                        outcome.sweeps_run()
                    );
                    ModelFile {
                        method: Method::Lifted,
                        model: outcome.model,
                    }
                }
                MethodArg::Sgd => {
                    let mut sgd: SgdConfig = parse_json(config, "sgd config")?;
                    sgd.seed = seed;
                    let outcome = sgd_train(&ds.x, &ds.y, &sgd)?;
                    if let (Some(first), Some(last)) = (outcome.losses.first(), outcome.losses.last()) {
                        eprintln!("loss {first:.6} -> {last:.6} after {} steps", outcome.losses.len());
                    }
                    ModelFile {
                        method: Method::Sgd,
                        model: outcome.model,
                    }
                }
            };
            write_file(&out_model, file.to_json().as_bytes())?;
        }
        Command::Eval { model, data } => {
            let text = String::from_utf8(read_file(&model)?).map_err(|e| HarnessError::ModelFile(e.to_string()))?;
            let file = ModelFile::from_json(&text)?;
            let ds = deserialize(&read_file(&data)?)?;
            let pred = predict(&file.model, &ds.x, Task::Classification)?;
            println!("accuracy {:.6}", accuracy(&pred, &ds.y)?);
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::from_json(&json_arg(&config)?)?;
            let rows = run::run_experiment(&cfg)?;
            let mut bytes = Vec::new();
            run::write_csv(&rows, &mut bytes)?;
            write_file(&out, &bytes)?;
        }
        Command::Selftest => {
            let report = crate::selftest::run_all();
            for check in &report {
                println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            if report.iter().any(|c| !c.passed) {
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(EXIT_OK)
}
