mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;

use ed_predict::cohort::Horizon;
use ed_predict::model::{sigmoid, ModelCard, Variable};
use ed_predict::synth::{
    expected_prevalence, generate, hospital_sizes, summary_table, Marginal, SynthError, SynthSpec,
};

fn flat_card(intercept: f64) -> ModelCard {
    let mut card = ModelCard::ed_1y();
    card.intercept = intercept;
    card.terms.iter_mut().for_each(|t| t.coefficient = 0.0);
    card
}

#[test]
fn nat_share_tracks_default_marginal() {
    let mut shares = Vec::new();
    for seed in 0..50 {
        let cohort = generate(&SynthSpec { rng_seed: seed, ..Default::default() }).unwrap();
        let nat = cohort.records.iter().filter(|r| r.treatment_group == 4).count();
        let share = nat as f64 / cohort.records.len() as f64;
        // a single cohort of 848 has sd ≈ 0.017 around the target
        assert!((share - 0.414).abs() < 0.06, "seed {seed}: {share}");
        shares.push(share);
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    assert!((mean - 0.414).abs() < 0.03, "{mean}");
}

#[test]
fn categorical_marginals_are_reproduced() {
    let spec = SynthSpec { n_patients: 5000, missingness_rates: BTreeMap::new(), ..Default::default() };
    let mut totals: BTreeMap<(String, i64), usize> = BTreeMap::new();
    let seeds = 50;
    for seed in 0..seeds {
        let cohort = generate(&SynthSpec { rng_seed: seed, ..spec.clone() }).unwrap();
        for (name, marginal) in &spec.marginals {
            let Marginal::Categorical { probabilities } = marginal else { continue };
            let v = Variable::from_name(name).unwrap();
            for &(code, p) in probabilities {
                let k = cohort.records.iter().filter(|r| r.get(v) == Some(code as f64)).count();
                let share = k as f64 / 5000.0;
                // one cohort: sd ≤ 0.0071, so 0.035 is five standard deviations
                assert!((share - p).abs() < 0.035, "seed {seed} {name}={code}: {share} vs {p}");
                *totals.entry((name.clone(), code)).or_default() += k;
            }
        }
    }
    for ((name, code), k) in totals {
        let Marginal::Categorical { probabilities } = &spec.marginals[&name] else { unreachable!() };
        let p = probabilities.iter().find(|c| c.0 == code).unwrap().1;
        let share = k as f64 / (5000.0 * seeds as f64);
        assert!((share - p).abs() < 0.02, "{name}={code}: {share} vs {p}");
    }
}

#[test]
fn continuous_marginals() {
    let cohort = generate(&SynthSpec { n_patients: 20_000, ..Default::default() }).unwrap();
    let ages: Vec<f64> = cohort.records.iter().map(|r| f64::from(r.age_years.unwrap())).collect();
    let psa: Vec<f64> = cohort.records.iter().map(|r| r.psa_at_diagnosis.unwrap()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    assert!((mean(&ages) - 68.4).abs() < 0.2);
    assert!((sd(&ages) - 6.7).abs() < 0.2);
    assert!((mean(&psa) - 10.9).abs() < 0.5);
    assert!(psa.iter().all(|&p| p > 0.0 && ((p * 10.0).round() - p * 10.0).abs() < 1e-9));
}

#[test]
fn same_seed_same_bytes() {
    let spec = SynthSpec { rng_seed: 77, ..Default::default() };
    assert_eq!(generate(&spec).unwrap().to_csv_bytes(), generate(&spec).unwrap().to_csv_bytes());
    let other = SynthSpec { rng_seed: 78, ..Default::default() };
    assert_ne!(generate(&spec).unwrap().to_csv_bytes(), generate(&other).unwrap().to_csv_bytes());
}

#[test]
fn bundled_seed42_file_matches_generator() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_seed42.csv");
    let bundled = std::fs::read(path).unwrap();
    assert_eq!(bundled, generate(&SynthSpec::default()).unwrap().to_csv_bytes());
}

#[test]
fn high_intercept_gives_function() {
    let spec = SynthSpec {
        n_patients: 100_000,
        generating_card: flat_card(10.0),
        generating_card_2y: None,
        missingness_rates: BTreeMap::new(),
        ..Default::default()
    };
    let cohort = generate(&spec).unwrap();
    let function = cohort.records.iter().filter(|r| r.outcome_1y != Some(1)).count();
    assert!(function as f64 / 100_000.0 > 0.9999, "{function}");
    assert!(sigmoid(10.0) > 0.9999);
    // FUNCTION answers are spread over 2..5
    let mut by_answer = [0usize; 6];
    for r in &cohort.records {
        by_answer[usize::from(r.outcome_1y.unwrap())] += 1;
    }
    for count in &by_answer[2..] {
        assert!((*count as f64 / 100_000.0 - 0.25).abs() < 0.01);
    }
}

#[test]
fn prevalence_defaults_and_limits() {
    let p = expected_prevalence(&SynthSpec::default()).unwrap();
    assert!((p - 0.46).abs() <= 0.02, "{p}");
    let low = expected_prevalence(&SynthSpec { generating_card: flat_card(30.0), ..Default::default() }).unwrap();
    let high = expected_prevalence(&SynthSpec { generating_card: flat_card(-30.0), ..Default::default() }).unwrap();
    assert_eq!(low, 0.0);
    assert_eq!(high, 1.0);
    let mid = expected_prevalence(&SynthSpec { generating_card: flat_card(0.0), ..Default::default() }).unwrap();
    assert!((mid - 0.5).abs() < 0.005, "{mid}");
}

#[test]
fn prevalence_matches_mean_card_probability() {
    // the Monte Carlo estimate should agree with averaging p_ed over a large draw
    let spec = SynthSpec { n_patients: 50_000, missingness_rates: BTreeMap::new(), ..Default::default() };
    let cohort = generate(&spec).unwrap();
    let card = ModelCard::ed_1y();
    let mean_p_ed = cohort.records.iter().map(|r| card.evaluate(r).unwrap().p_ed).sum::<f64>() / 50_000.0;
    let p = expected_prevalence(&SynthSpec::default()).unwrap();
    assert!((p - mean_p_ed).abs() < 0.01, "{p} vs {mean_p_ed}");
}

#[test]
fn missingness_rates_are_applied() {
    let mut spec = SynthSpec { n_patients: 20_000, ..Default::default() };
    spec.missingness_rates.insert("smoking".into(), 0.2);
    spec.missingness_rates.insert("age_years".into(), 0.1);
    let cohort = generate(&spec).unwrap();
    let n = 20_000.0;
    let share = |f: &dyn Fn(&ed_predict::PatientRecord) -> bool| cohort.records.iter().filter(|r| f(r)).count() as f64 / n;
    let smoking = share(&|r| r.smoking == 0);
    let age = share(&|r| r.age_years.is_none());
    let out2 = share(&|r| r.outcome_2y.is_none());
    // smoking already has a 0 code in its marginal
    let expected_smoking = 0.117 + 0.883 * 0.2;
    assert!((smoking - expected_smoking).abs() < 0.015, "{smoking}");
    assert!((age - 0.1).abs() < 0.01);
    assert!((out2 - 0.21).abs() < 0.01);
}

#[test]
fn hospital_sizes_and_ids() {
    let cohort = generate(&SynthSpec::default()).unwrap();
    let sizes = hospital_sizes(848, 69, 1.0);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &cohort.records {
        *counts.entry(r.hospital_id.as_str()).or_default() += 1;
    }
    assert_eq!(counts.len(), 69);
    assert_eq!(counts.values().copied().collect::<Vec<_>>(), sizes);
    assert_eq!(cohort.records[0].patient_id, "P00001");
    assert!(sizes[0] > 10 * sizes[68]);
}

#[test]
fn treatment_text_exclusions_survive_round_trip() {
    let cohort = generate(&SynthSpec::default()).unwrap();
    let mapped = cohort.mapped_records().count();
    let read = cohort.to_cohort(Horizon::OneYear).unwrap();
    assert_eq!(read.records.len(), mapped);
    assert_eq!(read.exclusions.len(), cohort.records.len() - mapped);
    assert!(read.exclusions.iter().all(|e| e.reason == "combination of treatments"));
    for r in &read.records {
        let original = cohort.records.iter().find(|o| o.patient_id == r.patient_id).unwrap();
        assert_eq!(r, original);
    }
}

#[test]
fn infeasible_specs() {
    let bad = |spec: SynthSpec| matches!(generate(&spec), Err(SynthError::InfeasibleSpec(_)));
    assert!(bad(SynthSpec { n_patients: 10, n_hospitals: 11, ..Default::default() }));
    assert!(bad(SynthSpec { n_hospitals: 1, ..Default::default() }));
    let mut spec = SynthSpec::default();
    spec.marginals.insert("smoking".into(), Marginal::Categorical { probabilities: vec![(1, 0.5), (2, 0.4)] });
    assert!(bad(spec));
    let mut spec = SynthSpec::default();
    spec.marginals.insert("age_years".into(), Marginal::Categorical { probabilities: vec![(1, 1.0)] });
    assert!(bad(spec));
    let mut spec = SynthSpec::default();
    spec.missingness_rates.insert("treatment_group".into(), 0.1);
    assert!(bad(spec));
    let mut spec = SynthSpec::default();
    spec.marginals.remove("cvd");
    assert!(bad(spec));
    assert!(matches!(
        SynthSpec::load(&PathBuf::from("/nonexistent/spec.json")),
        Err(SynthError::UnreadableSpec { .. })
    ));
}

#[test]
fn spec_json_round_trip() {
    let spec = SynthSpec::default();
    let back = SynthSpec::from_json(&spec.to_json_pretty()).unwrap();
    assert_eq!(back, spec);
    let minimal = serde_json::json!({
        "n_patients": 100,
        "rng_seed": 3,
        "marginals": serde_json::to_value(&spec.marginals).unwrap(),
        "hormone_by_treatment": [0.1, 0.5, 0.2, 0.0],
        "n0_share": 0.5,
        "combination_rate": 0.0,
        "generating_card": serde_json::to_value(ModelCard::ed_1y()).unwrap(),
    });
    let parsed = SynthSpec::from_json(&minimal.to_string()).unwrap();
    assert_eq!(parsed.n_hospitals, 69);
    assert!(parsed.missingness_rates.is_empty() && parsed.generating_card_2y.is_none());
}

#[test]
fn summary_table_counts() {
    let cohort = generate(&SynthSpec::default()).unwrap();
    let table = summary_table(&cohort);
    let n = cohort.mapped_records().count();
    assert!(table.starts_with(&format!("Number of patients\t{n}\n")));
    assert!(table.contains("no active therapy (NAT)"));
}
