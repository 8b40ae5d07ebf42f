//! Seeded synthetic cohorts with outcomes drawn from a model card.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{
    ingest_reader, map_treatment_text, read_cohort, write_cohort_csv, Cohort, CohortError, Horizon,
    TreatmentOutcome,
};
use crate::model::{Coding, ModelCard, ModelError, NStage, PatientRecord, Variable};

const PREVALENCE_DRAWS: usize = 100_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),
    #[error("cannot read spec {path}: {message}")]
    UnreadableSpec { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
}

/// Distribution of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// (code, probability) pairs, sampled in the listed order.
    Categorical { probabilities: Vec<(i64, f64)> },
    /// Rounded to whole units and clamped to [min, max].
    Normal { mean: f64, sd: f64, min: f64, max: f64 },
    /// Parameterized by the mean and sd on the natural scale.
    LogNormal { mean: f64, sd: f64, decimals: u32 },
}

impl Marginal {
    fn categorical(pairs: &[(i64, f64)]) -> Marginal {
        Marginal::Categorical { probabilities: pairs.to_vec() }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Marginal::Categorical { probabilities } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = 0;
                for &(code, p) in probabilities {
                    acc += p;
                    last = code;
                    if u < acc {
                        return code as f64;
                    }
                }
                last as f64
            }
            Marginal::Normal { mean, sd, min, max } => {
                let x: f64 = Normal::new(*mean, *sd).expect("validated").sample(rng);
                x.round().clamp(*min, *max)
            }
            Marginal::LogNormal { mean, sd, decimals } => {
                let s2 = (1.0 + (sd / mean).powi(2)).ln();
                let mu = mean.ln() - s2 / 2.0;
                let x: f64 = LogNormal::new(mu, s2.sqrt()).expect("validated").sample(rng);
                let scale = 10f64.powi(*decimals as i32);
                ((x * scale).round() / scale).max(1.0 / scale)
            }
        }
    }

    fn validate(&self, variable: Variable) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleSpec(format!("{variable}: {m}")));
        match (self, variable.coding()) {
            (Marginal::Categorical { probabilities }, Coding::Ordinal { min, max, missing }) => {
                let sum: f64 = probabilities.iter().map(|c| c.1).sum();
                if probabilities.is_empty() || (sum - 1.0).abs() > 1e-9 {
                    return bad(format!("probabilities sum to {sum}"));
                }
                let mut codes: Vec<i64> = probabilities.iter().map(|c| c.0).collect();
                codes.sort_unstable();
                codes.dedup();
                if codes.len() != probabilities.len() {
                    return bad("repeated code".into());
                }
                for &(code, p) in probabilities {
                    if !(0.0..=1.0).contains(&p) {
                        return bad(format!("probability {p} for code {code}"));
                    }
                    if (code < min || code > max) && Some(code) != missing {
                        return bad(format!("code {code} outside {min}..{max}"));
                    }
                }
                Ok(())
            }
            (Marginal::Normal { sd, min, max, .. }, Coding::Continuous { .. }) => {
                if !(*sd > 0.0 && sd.is_finite() && min <= max) {
                    return bad("normal needs sd > 0 and min <= max".into());
                }
                Ok(())
            }
            (Marginal::LogNormal { mean, sd, .. }, Coding::Continuous { .. }) => {
                if !(*mean > 0.0 && *sd > 0.0 && mean.is_finite() && sd.is_finite()) {
                    return bad("log-normal needs positive mean and sd".into());
                }
                Ok(())
            }
            _ => bad("marginal kind does not fit the variable's coding".into()),
        }
    }
}

/// Generator settings. Serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_patients: usize,
    #[serde(default = "default_hospitals")]
    pub n_hospitals: usize,
    pub rng_seed: u64,
    /// Hospital k (1-based) gets weight k^-exponent.
    #[serde(default = "default_zipf")]
    pub hospital_zipf_exponent: f64,
    /// Keyed by variable name; every variable except hormone_therapy.
    pub marginals: BTreeMap<String, Marginal>,
    /// P(hormone therapy) for treatment codes 1..4.
    pub hormone_by_treatment: [f64; 4],
    /// Share of patients recorded as N0; the rest are NX.
    pub n0_share: f64,
    /// Share of patients whose treatment text names two primary treatments.
    pub combination_rate: f64,
    pub generating_card: ModelCard,
    /// Draws outcome_2y when present.
    #[serde(default)]
    pub generating_card_2y: Option<ModelCard>,
    /// Variable name or outcome_1y/outcome_2y → share set to missing.
    #[serde(default)]
    pub missingness_rates: BTreeMap<String, f64>,
}

fn default_hospitals() -> usize {
    69
}

fn default_zipf() -> f64 {
    1.0
}

impl Default for SynthSpec {
    fn default() -> Self {
        use Variable::*;
        let mut m = BTreeMap::new();
        let mut put = |v: Variable, marginal: Marginal| {
            m.insert(v.name().to_string(), marginal);
        };
        put(TreatmentGroup, Marginal::categorical(&[(1, 0.329), (2, 0.196), (3, 0.061), (4, 0.414)]));
        put(AgeYears, Marginal::Normal { mean: 68.4, sd: 6.7, min: 40.0, max: 95.0 });
        put(TumorTStage, Marginal::categorical(&[(1, 0.457), (2, 0.414), (3, 0.129)]));
        put(PsaAtDiagnosis, Marginal::LogNormal { mean: 10.9, sd: 13.9, decimals: 1 });
        put(
            IsupGradeGroup,
            Marginal::categorical(&[(0, 0.018), (1, 0.554), (2, 0.233), (3, 0.088), (4, 0.072), (5, 0.035)]),
        );
        put(Cvd, Marginal::categorical(&[(0, 0.48), (1, 0.52)]));
        put(Diabetes, Marginal::categorical(&[(0, 0.887), (1, 0.113)]));
        put(CharlsonSimplified, Marginal::categorical(&[(0, 0.02), (1, 0.50), (2, 0.30), (3, 0.18)]));
        put(Smoking, Marginal::categorical(&[(0, 0.117), (1, 0.433), (2, 0.392), (3, 0.058)]));
        put(Alcohol, Marginal::categorical(&[(0, 0.114), (1, 0.098), (2, 0.051), (3, 0.737)]));
        put(
            ErectionFrequencyBaseline,
            Marginal::categorical(&[(0, 0.06), (1, 0.50), (2, 0.14), (3, 0.10), (4, 0.09), (5, 0.11)]),
        );
        put(
            ErectionQualityBaseline,
            Marginal::categorical(&[(0, 0.06), (1, 0.50), (2, 0.20), (3, 0.10), (4, 0.14)]),
        );
        put(
            LackOfEnergy,
            Marginal::categorical(&[(0, 0.04), (1, 0.24), (2, 0.24), (3, 0.20), (4, 0.16), (5, 0.12)]),
        );
        put(
            AbdPelvicRectalPain,
            Marginal::categorical(&[(0, 0.05), (1, 0.60), (2, 0.15), (3, 0.10), (4, 0.06), (5, 0.04)]),
        );
        SynthSpec {
            n_patients: 848,
            n_hospitals: 69,
            rng_seed: 42,
            hospital_zipf_exponent: 1.0,
            marginals: m,
            hormone_by_treatment: [0.15, 0.55, 0.20, 0.0],
            n0_share: 0.579,
            combination_rate: 0.0175,
            generating_card: ModelCard::ed_1y(),
            generating_card_2y: Some(ModelCard::ed_2y()),
            missingness_rates: [("outcome_2y".to_string(), 0.21)].into(),
        }
    }
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<SynthSpec, SynthError> {
        let spec: SynthSpec = serde_json::from_str(text)
            .map_err(|e| SynthError::InfeasibleSpec(format!("invalid spec JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SynthSpec, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::UnreadableSpec {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        SynthSpec::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let infeasible = |m: String| Err(SynthError::InfeasibleSpec(m));
        if self.n_hospitals < 2 {
            return infeasible(format!("n_hospitals must be at least 2, got {}", self.n_hospitals));
        }
        if self.n_hospitals > self.n_patients {
            return infeasible(format!(
                "n_hospitals ({}) exceeds n_patients ({})",
                self.n_hospitals, self.n_patients
            ));
        }
        if !self.hospital_zipf_exponent.is_finite() || self.hospital_zipf_exponent < 0.0 {
            return infeasible("hospital_zipf_exponent must be finite and non-negative".into());
        }
        for v in Variable::ALL {
            if v == Variable::HormoneTherapy {
                continue;
            }
            match self.marginals.get(v.name()) {
                Some(m) => m.validate(v)?,
                None => return infeasible(format!("no marginal for {v}")),
            }
        }
        for name in self.marginals.keys() {
            match Variable::from_name(name) {
                Some(Variable::HormoneTherapy) => {
                    return infeasible("hormone_therapy is set by hormone_by_treatment".into())
                }
                Some(_) => {}
                None => return infeasible(format!("unknown variable {name}")),
            }
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !self.hormone_by_treatment.iter().all(|&p| unit(p)) || !unit(self.n0_share) || !unit(self.combination_rate) {
            return infeasible("probabilities must lie in [0, 1]".into());
        }
        for (name, &rate) in &self.missingness_rates {
            if !unit(rate) {
                return infeasible(format!("missingness rate {rate} for {name}"));
            }
            let ok = match name.as_str() {
                "outcome_1y" | "outcome_2y" => true,
                other => Variable::from_name(other).is_some_and(|v| v.has_missing_code()),
            };
            if !ok {
                return infeasible(format!("{name} cannot be set missing"));
            }
        }
        self.generating_card.validate()?;
        if let Some(card) = &self.generating_card_2y {
            card.validate()?;
        }
        Ok(())
    }
}

/// Generated rows, before treatment mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub records: Vec<PatientRecord>,
    /// Free-text treatment per record, as a registry export would carry it.
    pub treatment_text: Vec<String>,
}

impl SyntheticCohort {
    /// Writes the cohort CSV, treatment column as text.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), SynthError> {
        write_cohort_csv(&self.records, Some(&self.treatment_text), writer)?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        out
    }

    /// Round-trips through the CSV reader, so treatment exclusions apply.
    pub fn to_cohort(&self, horizon: Horizon) -> Result<Cohort, SynthError> {
        let bytes = self.to_csv_bytes();
        let raw = ingest_reader(bytes.as_slice(), "synthetic")?;
        Ok(read_cohort(&raw, horizon)?)
    }

    /// Records whose treatment text maps to a single category.
    pub fn mapped_records(&self) -> impl Iterator<Item = &PatientRecord> {
        self.records
            .iter()
            .zip(&self.treatment_text)
            .filter(|(_, t)| matches!(map_treatment_text(t), TreatmentOutcome::Mapped { .. }))
            .map(|(r, _)| r)
    }
}

/// Patients per hospital: weights k^-s, one patient each guaranteed, the
/// rest by largest remainder (ties to the lower index).
pub fn hospital_sizes(n_patients: usize, n_hospitals: usize, exponent: f64) -> Vec<usize> {
    let weights: Vec<f64> = (1..=n_hospitals).map(|k| (k as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let spare = n_patients - n_hospitals;
    let shares: Vec<f64> = weights.iter().map(|w| w / total * spare as f64).collect();
    let mut sizes: Vec<usize> = shares.iter().map(|s| 1 + s.floor() as usize).collect();
    let mut left = n_patients - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n_hospitals).collect();
    order.sort_by(|&a, &b| (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

fn treatment_text(rng: &mut ChaCha8Rng, treatment: u8, hormone: bool, combination: bool) -> String {
    if combination {
        const PAIRS: [&str; 4] = ["RP+EBRT", "EBRT+BT", "RP+BT", "BT+EBRT+HT"];
        return PAIRS[rng.random_range(0..PAIRS.len())].to_string();
    }
    let mut text = match treatment {
        1 if rng.random::<f64>() < 0.5 => "RP+LND".to_string(),
        1 => "RP".to_string(),
        2 => "EBRT".to_string(),
        3 => "BT".to_string(),
        _ if rng.random::<f64>() < 0.8 => "AS".to_string(),
        _ => "WW".to_string(),
    };
    if hormone {
        text.push_str("+HT");
    }
    text
}

fn draw_outcome(rng: &mut ChaCha8Rng, p_retained: f64) -> u8 {
    if rng.random::<f64>() < p_retained {
        rng.random_range(2..=5)
    } else {
        1
    }
}

/// Draws a cohort. Variables are independent; outcome 1 (ED) with
/// probability p_ed from the card, otherwise uniform over 2..5. Missingness
/// is applied last.
pub fn generate(spec: &SynthSpec) -> Result<SyntheticCohort, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let sizes = hospital_sizes(spec.n_patients, spec.n_hospitals, spec.hospital_zipf_exponent);
    let h_width = spec.n_hospitals.to_string().len().max(2);
    let p_width = spec.n_patients.to_string().len().max(5);

    let mut records = Vec::with_capacity(spec.n_patients);
    let mut texts = Vec::with_capacity(spec.n_patients);
    for (h, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let mut r = PatientRecord {
                patient_id: format!("P{:0p_width$}", records.len() + 1),
                hospital_id: format!("H{:0h_width$}", h + 1),
                ..Default::default()
            };
            for v in Variable::ALL {
                if v == Variable::HormoneTherapy {
                    let p = spec.hormone_by_treatment[usize::from(r.treatment_group) - 1];
                    r.hormone_therapy = u8::from(rng.random::<f64>() < p);
                } else {
                    let x = spec.marginals[v.name()].sample(&mut rng);
                    r.set(v, x);
                }
            }
            r.tumor_n_stage = if rng.random::<f64>() < spec.n0_share { NStage::N0 } else { NStage::NX };
            let combination = rng.random::<f64>() < spec.combination_rate;
            texts.push(treatment_text(&mut rng, r.treatment_group, r.hormone_therapy == 1, combination));
            let p1 = spec.generating_card.evaluate(&r)?.p_retained;
            r.outcome_1y = Some(draw_outcome(&mut rng, p1));
            if let Some(card) = &spec.generating_card_2y {
                let p2 = card.evaluate(&r)?.p_retained;
                r.outcome_2y = Some(draw_outcome(&mut rng, p2));
            }
            records.push(r);
        }
    }

    for (name, &rate) in &spec.missingness_rates {
        for r in &mut records {
            if rng.random::<f64>() >= rate {
                continue;
            }
            match name.as_str() {
                "outcome_1y" => r.outcome_1y = None,
                "outcome_2y" => r.outcome_2y = None,
                other => match Variable::from_name(other).expect("validated") {
                    Variable::AgeYears => r.age_years = None,
                    Variable::PsaAtDiagnosis => r.psa_at_diagnosis = None,
                    v => r.set(v, 0.0),
                },
            }
        }
    }
    Ok(SyntheticCohort { records, treatment_text: texts })
}

/// Share of ED (outcome 1) at one year over a seeded draw of 100 000 patients.
pub fn expected_prevalence(spec: &SynthSpec) -> Result<f64, SynthError> {
    let mut big = spec.clone();
    big.n_patients = PREVALENCE_DRAWS;
    big.n_hospitals = spec.n_hospitals.min(PREVALENCE_DRAWS);
    big.generating_card_2y = None;
    big.missingness_rates.clear();
    let cohort = generate(&big)?;
    let ed = cohort.records.iter().filter(|r| r.outcome_1y == Some(1)).count();
    Ok(ed as f64 / PREVALENCE_DRAWS as f64)
}

/// Table-1-style summary of the records whose treatment maps.
pub fn summary_table(cohort: &SyntheticCohort) -> String {
    let records: Vec<&PatientRecord> = cohort.mapped_records().collect();
    let n = records.len();
    let mut out = String::new();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let _ = writeln!(out, "Number of patients\t{n}");
    let _ = writeln!(out, "Excluded (treatment)\t{}", cohort.records.len() - n);
    let mut section = |title: &str, v: Variable| {
        let _ = writeln!(out, "{title} (n (%))");
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for r in &records {
            *counts.entry(r.get(v).unwrap_or(0.0) as i64).or_default() += 1;
        }
        for (code, label) in v.labels() {
            let k = counts.get(code).copied().unwrap_or(0);
            let _ = writeln!(out, "  {label}\t{k} ({:.1})", pct(k));
        }
    };
    section("Treatments", Variable::TreatmentGroup);
    section("Tumor T stage", Variable::TumorTStage);
    section("ISUP grade group", Variable::IsupGradeGroup);
    section("Smoking", Variable::Smoking);
    section("Alcohol use", Variable::Alcohol);
    let (age_mean, age_sd) = mean_sd(records.iter().filter_map(|r| r.age_years.map(f64::from)));
    let (psa_mean, psa_sd) = mean_sd(records.iter().filter_map(|r| r.psa_at_diagnosis));
    let cvd = records.iter().filter(|r| r.cvd == 1).count();
    let diabetes = records.iter().filter(|r| r.diabetes == 1).count();
    let ed = records.iter().filter(|r| r.outcome_1y == Some(1)).count();
    let answered = records.iter().filter(|r| r.outcome_1y.is_some()).count();
    let _ = writeln!(out, "Age (mean ± stdev)\t{age_mean:.1} ± {age_sd:.1}");
    let _ = writeln!(out, "PSA at diagnosis (mean ± stdev)\t{psa_mean:.1} ± {psa_sd:.1}");
    let _ = writeln!(out, "Cardiovascular disease\t{cvd} ({:.1})", pct(cvd));
    let _ = writeln!(out, "Diabetes\t{diabetes} ({:.1})", pct(diabetes));
    let ed_pct = if answered == 0 { 0.0 } else { 100.0 * ed as f64 / answered as f64 };
    let _ = writeln!(out, "ED at 1 year\t{ed} ({ed_pct:.1})");
    out
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return (v.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}
