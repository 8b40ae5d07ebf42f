//! End-to-end model development on a cohort CSV.
//!
//! Stages run in order: ingest, map, missing, screen, split, univariate,
//! train, evaluate, calibrate. Every artifact is rendered to bytes so the
//! caller decides where it goes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{
    apply_missingness_policy, binarize_outcome, ingest, ingest_reader, pca_batch_screen, read_cohort,
    split_hospitals, BatchCandidate, BatchScreenReport, Cohort, Horizon, OutcomeClass, RawCohort,
    DEFAULT_VARIABLE_MISSING_THRESHOLD,
};
use crate::model::{Coding, ModelCard, PatientRecord, Term, Variable};
use crate::report::{fmt_num, to_json};
use crate::stats::{univariate_screen, UnivariateResult};
use crate::trainer::{
    bootstrap_rfe, calibrate_in_the_large, evaluate_predictions, EvalReport, FeatureMatrix,
    FitConfig, RfeResult, DEFAULT_THRESHOLD,
};

/// Names of the files a successful run produces.
pub const ARTIFACTS: [&str; 11] = [
    "exclusions.csv",
    "split.csv",
    "univariate.csv",
    "model_card.json",
    "eval_train.json",
    "eval_test.json",
    "roc.csv",
    "calibration.csv",
    "rfe_report.json",
    "batch_screen.json",
    "config.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub horizon: Horizon,
    pub seed: u64,
    pub variable_missing_threshold: f64,
    pub train_fraction: f64,
    pub split_tolerance: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub calibration_bins: usize,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            horizon: Horizon::OneYear,
            seed: 42,
            variable_missing_threshold: DEFAULT_VARIABLE_MISSING_THRESHOLD,
            train_fraction: 0.75,
            split_tolerance: 0.05,
            alpha: 0.05,
            threshold: DEFAULT_THRESHOLD,
            calibration_bins: 10,
            fit: FitConfig { rng_seed: 42, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Map,
    Missing,
    Screen,
    Split,
    Univariate,
    Train,
    Evaluate,
    Calibrate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Map => "map",
            Stage::Missing => "missing",
            Stage::Screen => "screen",
            Stage::Split => "split",
            Stage::Univariate => "univariate",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("stage {}: {message}", stage.name())]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub n_records: usize,
    pub n_excluded: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub selected: Vec<String>,
    pub train_auc: f64,
    pub test_auc: f64,
    pub calibration_offset: f64,
    pub batch_flags: Vec<String>,
    pub split_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// File name → contents, one entry per [`ARTIFACTS`] name.
    pub artifacts: BTreeMap<String, Vec<u8>>,
    pub summary: PipelineSummary,
}

/// Runs every stage on a cohort file.
pub fn run_file(path: &Path, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let raw = ingest(path).map_err(at(Stage::Ingest))?;
    run(&raw, config)
}

/// Runs every stage on cohort CSV bytes.
pub fn run_bytes(csv: &[u8], config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let raw = ingest_reader(csv, "memory").map_err(at(Stage::Ingest))?;
    run(&raw, config)
}

fn retained(cohort: &Cohort, record: &PatientRecord) -> bool {
    matches!(binarize_outcome(record, cohort.horizon), Ok(OutcomeClass::Function))
}

/// Covariate values of the modelled variables, `None` if age or PSA is absent.
fn feature_row(record: &PatientRecord, variables: &[Variable]) -> Option<Vec<f64>> {
    variables.iter().map(|&v| record.get(v)).collect()
}

pub fn run(raw: &RawCohort, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let mapped = read_cohort(raw, config.horizon).map_err(at(Stage::Map))?;
    let cohort = apply_missingness_policy(&mapped, config.variable_missing_threshold, config.horizon)
        .map_err(at(Stage::Missing))?;

    let screen = pca_batch_screen(&cohort, &BatchCandidate::defaults(), 2, config.alpha)
        .map_err(at(Stage::Screen))?;

    let split = split_hospitals(&cohort, config.train_fraction, config.split_tolerance, config.seed)
        .map_err(at(Stage::Split))?;
    let (train, test): (Vec<&PatientRecord>, Vec<&PatientRecord>) =
        cohort.records.iter().partition(|r| split.is_train(&r.hospital_id));

    let variables = cohort.active_variables();
    let univariate = univariate_table(&cohort, &train, &variables, config.alpha)?;

    // modelling rows: training records with every covariate present
    let (rows, labels): (Vec<Vec<f64>>, Vec<bool>) = train
        .iter()
        .filter_map(|r| feature_row(r, &variables).map(|row| (row, retained(&cohort, r))))
        .unzip();
    let names = variables.iter().map(|v| v.name().to_string()).collect();
    let features = FeatureMatrix::new(names, rows).map_err(at(Stage::Train))?;
    let fit = FitConfig { rng_seed: config.seed, ..config.fit.clone() };
    let rfe = bootstrap_rfe(&features, &labels, &fit).map_err(at(Stage::Train))?;
    let card = card_from_fit(&rfe, config.horizon).map_err(at(Stage::Train))?;

    let (eval_train, _) = evaluate_set(&cohort, &card, &train, &variables, config)?;
    let (eval_test, test_usable) = evaluate_set(&cohort, &card, &test, &variables, config)?;

    let test_labels: Vec<bool> = test_usable.iter().map(|r| retained(&cohort, r)).collect();
    let delta = calibrate_in_the_large(&card, &test_usable, &test_labels).map_err(at(Stage::Calibrate))?;
    let card = ModelCard { recalibrated_offset: Some(delta), ..card };

    let mut artifacts = BTreeMap::new();
    let mut put = |name: &str, text: String| {
        artifacts.insert(name.to_string(), text.into_bytes());
    };
    put("exclusions.csv", exclusions_csv(&cohort));
    put("split.csv", split.to_csv(&cohort.hospital_sizes()));
    put("univariate.csv", univariate_csv(&univariate));
    put("model_card.json", to_json(&card));
    put("eval_train.json", to_json(&eval_train));
    put("eval_test.json", to_json(&eval_test));
    put("roc.csv", roc_csv(&[("train", &eval_train), ("test", &eval_test)]));
    put("calibration.csv", calibration_csv(&[("train", &eval_train), ("test", &eval_test)]));
    put("rfe_report.json", to_json(&RfeReport { config: &fit, result: &rfe }));
    put("batch_screen.json", to_json(&screen));
    put("config.json", to_json(config));

    let summary = PipelineSummary {
        n_records: cohort.records.len(),
        n_excluded: cohort.exclusions.len(),
        n_train: train.len(),
        n_test: test.len(),
        selected: rfe.selected.clone(),
        train_auc: eval_train.auc,
        test_auc: eval_test.auc,
        calibration_offset: delta,
        batch_flags: flagged(&screen),
        split_warning: split.warning.clone(),
    };
    Ok(PipelineOutput { artifacts, summary })
}

/// Evaluation on the records of `set` with every covariate present; returns
/// those records too.
fn evaluate_set<'a>(
    cohort: &Cohort,
    card: &ModelCard,
    set: &[&'a PatientRecord],
    variables: &[Variable],
    config: &PipelineConfig,
) -> Result<(EvalReport, Vec<&'a PatientRecord>), PipelineError> {
    let usable: Vec<&PatientRecord> =
        set.iter().copied().filter(|r| feature_row(r, variables).is_some()).collect();
    let p: Vec<f64> = usable
        .iter()
        .map(|r| card.evaluate(*r).map(|pr| pr.p_retained))
        .collect::<Result<_, _>>()
        .map_err(at(Stage::Evaluate))?;
    let y: Vec<bool> = usable.iter().map(|r| retained(cohort, r)).collect();
    let report = evaluate_predictions(&p, &y, config.threshold, config.calibration_bins)
        .map_err(at(Stage::Evaluate))?;
    Ok((report, usable))
}

#[derive(Serialize)]
struct RfeReport<'a> {
    config: &'a FitConfig,
    result: &'a RfeResult,
}

fn flagged(screen: &BatchScreenReport) -> Vec<String> {
    screen.results.iter().filter(|r| r.flagged).map(|r| r.candidate.clone()).collect()
}

fn univariate_table(
    cohort: &Cohort,
    train: &[&PatientRecord],
    variables: &[Variable],
    alpha: f64,
) -> Result<Vec<UnivariateResult>, PipelineError> {
    let mut samples = Vec::new();
    for &v in variables {
        let (mut ed, mut function) = (Vec::new(), Vec::new());
        for r in train {
            let Some(x) = r.get(v) else { continue };
            if v.is_missing_code(x) {
                continue;
            }
            if retained(cohort, r) {
                function.push(x);
            } else {
                ed.push(x);
            }
        }
        if ed.is_empty() || function.is_empty() {
            continue;
        }
        samples.push((v.name().to_string(), ed, function));
    }
    univariate_screen(&samples, alpha).map_err(at(Stage::Univariate))
}

/// A card holding the refitted model, terms in variable order.
fn card_from_fit(rfe: &RfeResult, horizon: Horizon) -> Result<ModelCard, crate::model::ModelError> {
    let terms = rfe
        .selected
        .iter()
        .zip(&rfe.final_model.coefficients)
        .map(|(name, &coefficient)| {
            let v: Variable = name.parse()?;
            let (min_code, max_code, missing_code) = match v.coding() {
                Coding::Ordinal { min, max, missing } => (min, max, missing),
                Coding::Continuous { min, max } => (min as i64, max as i64, None),
            };
            Ok(Term { variable: name.clone(), coefficient, min_code, max_code, missing_code })
        })
        .collect::<Result<Vec<_>, crate::model::ModelError>>()?;
    let card = ModelCard {
        name: format!("refit-{}m", horizon.months()),
        version: "1.0.0".into(),
        horizon_months: horizon.months(),
        intercept: rfe.final_model.intercept,
        calibration_offset: 0.0,
        recalibrated_offset: None,
        terms,
    };
    card.validate()?;
    Ok(card)
}

fn exclusions_csv(cohort: &Cohort) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patient_id", "reason"]).expect("in-memory write");
    for e in &cohort.exclusions {
        w.write_record([&e.patient_id, &e.reason]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

fn univariate_csv(rows: &[UnivariateResult]) -> String {
    let mut out = String::from("variable,test,statistic,p_value,q_value\n");
    for r in rows {
        let test = match r.test_used {
            crate::stats::TestUsed::WelchT => "welch_t",
            crate::stats::TestUsed::Wilcoxon => "wilcoxon",
        };
        let _ = writeln!(
            out,
            "{},{test},{},{},{}",
            r.variable,
            fmt_num(r.statistic),
            fmt_num(r.p_value),
            fmt_num(r.q_value)
        );
    }
    out
}

fn roc_csv(sets: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("set,fpr,tpr\n");
    for (name, report) in sets {
        for (fpr, tpr) in &report.roc_points {
            let _ = writeln!(out, "{name},{},{}", fmt_num(*fpr), fmt_num(*tpr));
        }
    }
    out
}

fn calibration_csv(sets: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("set,bin,mean_predicted,observed_rate,n\n");
    for (name, report) in sets {
        for (i, b) in report.calibration_bins.iter().enumerate() {
            let _ = writeln!(
                out,
                "{name},{},{},{},{}",
                i + 1,
                fmt_num(b.mean_predicted),
                fmt_num(b.observed_rate),
                b.n
            );
        }
    }
    out
}
