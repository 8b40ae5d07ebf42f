use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ed_predict::cohort::{
    apply_missingness_policy, ingest, pca_batch_screen, read_cohort, split_hospitals, BatchCandidate, Cohort,
    Horizon,
};
use ed_predict::model::nomogram;
use ed_predict::pipeline::{run_file, PipelineConfig};
use ed_predict::report::to_json;
use ed_predict::synth::{generate, summary_table, SynthSpec};
use ed_predict::trainer::FitConfig;
use ed_predict_cli::cards::CARDS_ENV;
use ed_predict_cli::{nomogram_csv, predict, CardStore, CliError};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "ed-predict", version, about = "Erectile dysfunction risk models after prostate cancer treatment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict one patient's risk and print the result as JSON.
    Predict {
        /// Card name (ed-1y, ed-2y, or a card in the cards directory) or card file path.
        #[arg(long)]
        model: String,
        /// JSON file holding a flat object of variable values ("-" for stdin).
        #[arg(long)]
        input: Option<PathBuf>,
        /// A variable value, NAME=VALUE. Repeatable; overrides --input.
        #[arg(long = "set", value_name = "NAME=VALUE")]
        set: Vec<String>,
        /// Add the card's stored recalibration offset to the linear predictor.
        #[arg(long)]
        apply_calibration: bool,
        #[arg(long, env = CARDS_ENV)]
        cards: Option<PathBuf>,
    },
    /// Run the full development pipeline on a cohort CSV and write the reports.
    Pipeline {
        #[arg(long)]
        cohort: PathBuf,
        /// Outcome horizon in months.
        #[arg(long, default_value_t = 12)]
        horizon: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory (created if absent).
        #[arg(long, default_value = "pipeline-out")]
        out: PathBuf,
        /// Drop variables missing in more than this share of patients.
        #[arg(long, default_value_t = 0.30)]
        missing_threshold: f64,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap replicates for feature elimination.
        #[arg(long, default_value_t = 200)]
        replicates: usize,
    },
    /// Serve the prediction API over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of extra model cards (*.json).
        #[arg(long, env = CARDS_ENV)]
        cards: Option<PathBuf>,
    },
    /// Print a card's nomogram point scales.
    Nomogram {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, env = CARDS_ENV)]
        cards: Option<PathBuf>,
    },
    /// Generate a synthetic cohort CSV.
    Synth {
        /// SynthSpec JSON file; defaults to the built-in spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_patients: Option<usize>,
        #[arg(long)]
        n_hospitals: Option<usize>,
        /// Output CSV; stdout when absent (the summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the effective spec as JSON and exit.
        #[arg(long)]
        print_spec: bool,
    },
    /// Hospital-disjoint train/test split of a cohort CSV.
    Split {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value_t = 12)]
        horizon: u32,
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.30)]
        missing_threshold: f64,
    },
    /// PCA batch-effect screen of a cohort CSV.
    Screen {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value_t = 12)]
        horizon: u32,
        /// Candidate groupings (hospital_id or variable names); defaults to the standard set.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.30)]
        missing_threshold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn horizon(months: u32) -> Result<Horizon, CliError> {
    Ok(Horizon::from_months(months)?)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| CliError::io("stdin", e))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
    }
}

fn record_fields(input: Option<&Path>, set: &[String]) -> Result<Map<String, Value>, CliError> {
    let mut record = match input {
        Some(path) => match serde_json::from_str::<Value>(&read_input(path)?) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(CliError::InvalidInput("input must be a JSON object".into())),
            Err(e) => return Err(CliError::InvalidInput(e.to_string())),
        },
        None => Map::new(),
    };
    for pair in set {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::InvalidInput(format!("expected NAME=VALUE, got `{pair}`")))?;
        record.insert(name.trim().to_string(), Value::String(value.trim().to_string()));
    }
    Ok(record)
}

fn prepared_cohort(path: &Path, months: u32, threshold: f64) -> Result<Cohort, CliError> {
    let h = horizon(months)?;
    let raw = ingest(path)?;
    let cohort = read_cohort(&raw, h)?;
    Ok(apply_missingness_policy(&cohort, threshold, h)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path.display(), e))
}

fn stdout(text: &str) -> Result<(), CliError> {
    std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Predict { model, input, set, apply_calibration, cards } => {
            let store = CardStore::load(cards.as_deref())?;
            let card = store.resolve(&model)?;
            let record = record_fields(input.as_deref(), &set)?;
            let response = predict(&card, &record, apply_calibration)?;
            stdout(&to_json(&response))
        }
        Command::Pipeline {
            cohort,
            horizon: months,
            seed,
            out,
            missing_threshold,
            train_fraction,
            tolerance,
            alpha,
            replicates,
        } => {
            let config = PipelineConfig {
                horizon: horizon(months)?,
                seed,
                variable_missing_threshold: missing_threshold,
                train_fraction,
                split_tolerance: tolerance,
                alpha,
                fit: FitConfig { rng_seed: seed, bootstrap_replicates: replicates, ..Default::default() },
                ..Default::default()
            };
            let output = run_file(&cohort, &config)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::io(out.display(), e))?;
            for (name, bytes) in &output.artifacts {
                write_file(&out.join(name), bytes)?;
            }
            if let Some(w) = &output.summary.split_warning {
                eprintln!("warning: {w}");
            }
            eprintln!("wrote {} files to {}", output.artifacts.len(), out.display());
            stdout(&to_json(&output.summary))
        }
        Command::Serve { port, host, cards } => {
            let store = CardStore::load(cards.as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::InvalidInput(format!("address {host}:{port}: {e}")))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io("runtime", e))?;
            runtime
                .block_on(ed_predict_cli::serve::serve(addr, store))
                .map_err(|e| CliError::io(addr, e))
        }
        Command::Nomogram { model, format, cards } => {
            let store = CardStore::load(cards.as_deref())?;
            let table = nomogram(&store.resolve(&model)?)?;
            match format {
                Format::Csv => stdout(&nomogram_csv(&table)),
                Format::Json => stdout(&to_json(&table)),
            }
        }
        Command::Synth { spec, seed, n_patients, n_hospitals, out, print_spec } => {
            let mut spec = match spec {
                Some(path) => SynthSpec::load(&path)?,
                None => SynthSpec::default(),
            };
            spec.rng_seed = seed.unwrap_or(spec.rng_seed);
            spec.n_patients = n_patients.unwrap_or(spec.n_patients);
            spec.n_hospitals = n_hospitals.unwrap_or(spec.n_hospitals);
            if print_spec {
                spec.validate()?;
                return stdout(&(spec.to_json_pretty() + "\n"));
            }
            let cohort = generate(&spec)?;
            let summary = summary_table(&cohort);
            match out {
                Some(path) => {
                    write_file(&path, &cohort.to_csv_bytes())?;
                    stdout(&summary)
                }
                None => {
                    eprint!("{summary}");
                    std::io::stdout().write_all(&cohort.to_csv_bytes()).map_err(|e| CliError::io("stdout", e))
                }
            }
        }
        Command::Split { cohort, horizon: months, train_fraction, tolerance, seed, missing_threshold } => {
            let cohort = prepared_cohort(&cohort, months, missing_threshold)?;
            let split = split_hospitals(&cohort, train_fraction, tolerance, seed)?;
            if let Some(w) = &split.warning {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "train {} patients ({:.4}), test {} patients",
                split.train_patients, split.train_fraction, split.test_patients
            );
            stdout(&split.to_csv(&cohort.hospital_sizes()))
        }
        Command::Screen { cohort, horizon: months, candidates, components, alpha, missing_threshold } => {
            let cohort = prepared_cohort(&cohort, months, missing_threshold)?;
            let candidates = if candidates.is_empty() {
                BatchCandidate::defaults()
            } else {
                candidates
                    .iter()
                    .map(|c| c.parse::<BatchCandidate>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::InvalidInput(e.to_string()))?
            };
            let report = pca_batch_screen(&cohort, &candidates, components, alpha)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            stdout(&to_json(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
