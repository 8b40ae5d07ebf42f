mod common;

use std::path::PathBuf;

use ed_predict::cohort::{ingest_reader, read_cohort, Horizon};
use ed_predict::pipeline::{run_bytes, run_file, PipelineConfig, PipelineOutput, Stage, ARTIFACTS};
use ed_predict::report::to_json;
use ed_predict::synth::{generate, SynthSpec};
use ed_predict::ModelCard;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn seed42() -> PipelineOutput {
    run_file(&data("synthetic_seed42.csv"), &PipelineConfig::default()).unwrap()
}

fn text<'a>(out: &'a PipelineOutput, name: &str) -> &'a str {
    std::str::from_utf8(&out.artifacts[name]).unwrap()
}

#[test]
fn bundled_cohort_produces_every_artifact() {
    let out = seed42();
    let names: Vec<&str> = out.artifacts.keys().map(String::as_str).collect();
    let mut expected = ARTIFACTS.to_vec();
    expected.sort_unstable();
    assert_eq!(names, expected);
    assert!(out.summary.test_auc > 0.75, "{}", out.summary.test_auc);

    assert!(text(&out, "exclusions.csv").starts_with("patient_id,reason\n"));
    assert!(text(&out, "split.csv").starts_with("hospital_id,assignment,patients\n"));
    assert!(text(&out, "univariate.csv").starts_with("variable,test,statistic,p_value,q_value\n"));
    assert!(text(&out, "roc.csv").starts_with("set,fpr,tpr\n"));
    assert!(text(&out, "calibration.csv").starts_with("set,bin,mean_predicted,observed_rate,n\n"));
    assert_eq!(text(&out, "split.csv").lines().count(), 1 + 69);
}

#[test]
fn summary_matches_golden() {
    let out = seed42();
    let golden = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/seed42_summary.json"))
        .unwrap();
    assert_eq!(to_json(&out.summary), golden);
}

#[test]
fn reruns_are_byte_identical() {
    let bytes = std::fs::read(data("synthetic_seed42.csv")).unwrap();
    let cfg = PipelineConfig::default();
    let runs: Vec<PipelineOutput> = [1, 4]
        .iter()
        .map(|&t| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
            pool.install(|| run_bytes(&bytes, &cfg).unwrap())
        })
        .collect();
    assert_eq!(runs[0].artifacts, runs[1].artifacts);
    assert_eq!(runs[0], seed42());

    let other = run_bytes(&bytes, &PipelineConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(other.artifacts["rfe_report.json"], runs[0].artifacts["rfe_report.json"]);
}

#[test]
fn reported_test_auc_is_reproducible_from_artifacts() {
    let out = seed42();
    let card = ModelCard::from_json(text(&out, "model_card.json")).unwrap();
    assert_eq!(card.horizon_months, 12);
    assert!(card.recalibrated_offset.is_some());

    let test_hospitals: Vec<&str> = text(&out, "split.csv")
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("test"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let raw = ingest_reader(std::fs::read(data("synthetic_seed42.csv")).unwrap().as_slice(), "x").unwrap();
    let cohort = read_cohort(&raw, Horizon::OneYear).unwrap();
    let excluded: Vec<&str> =
        text(&out, "exclusions.csv").lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for r in &cohort.records {
        if !test_hospitals.contains(&r.hospital_id.as_str()) || excluded.contains(&r.patient_id.as_str()) {
            continue;
        }
        let Ok(p) = card.evaluate(r) else { continue };
        scores.push(p.p_ed);
        labels.push(r.outcome_1y == Some(1));
    }
    let eval: serde_json::Value = serde_json::from_str(text(&out, "eval_test.json")).unwrap();
    assert_eq!(eval["n"].as_u64().unwrap() as usize, scores.len());
    let auc = common::pairwise_auc(&scores, &labels);
    assert!((auc - out.summary.test_auc).abs() < 1e-12, "{auc} vs {}", out.summary.test_auc);
}

#[test]
fn single_hospital_fails_at_split() {
    let spec = SynthSpec { n_patients: 300, n_hospitals: 2, ..Default::default() };
    let csv = String::from_utf8(generate(&spec).unwrap().to_csv_bytes()).unwrap();
    let one: String = csv.lines().map(|l| format!("{}\n", l.replace(",H02,", ",H01,"))).collect();
    let err = run_bytes(one.as_bytes(), &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage, Stage::Split);
    assert!(err.to_string().starts_with("stage split:"));
}

#[test]
fn stage_errors_are_named() {
    let err = run_bytes(b"patient_id,reason\nx,y\n", &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    let err = run_file(&PathBuf::from("/nonexistent.csv"), &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);

    // every outcome at two years missing
    let spec = SynthSpec {
        n_patients: 200,
        n_hospitals: 4,
        generating_card_2y: None,
        missingness_rates: Default::default(),
        ..Default::default()
    };
    let csv = generate(&spec).unwrap().to_csv_bytes();
    let cfg = PipelineConfig { horizon: Horizon::TwoYears, ..Default::default() };
    assert_eq!(run_bytes(&csv, &cfg).unwrap_err().stage, Stage::Missing);
}

#[test]
fn two_year_horizon_runs() {
    let out = seed42_2y();
    let card = ModelCard::from_json(text(&out, "model_card.json")).unwrap();
    assert_eq!(card.horizon_months, 24);
    assert!(out.summary.n_excluded > 100, "two-year non-response adds exclusions");
    assert!(out.summary.test_auc > 0.7);
}

fn seed42_2y() -> PipelineOutput {
    let cfg = PipelineConfig { horizon: Horizon::TwoYears, ..Default::default() };
    run_file(&data("synthetic_seed42.csv"), &cfg).unwrap()
}
