use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use super::treatment::map_treatments;
use super::{Cohort, CohortError, Exclusion, Horizon};
use crate::model::{NStage, PatientRecord};

/// Cohort CSV header, in canonical order.
pub const COHORT_COLUMNS: [&str; 20] = [
    "patient_id",
    "hospital_id",
    "age_years",
    "treatment_group",
    "hormone_therapy",
    "tumor_t_stage",
    "tumor_n_stage",
    "psa_at_diagnosis",
    "isup_grade_group",
    "cvd",
    "diabetes",
    "charlson_simplified",
    "smoking",
    "alcohol",
    "erection_frequency_baseline",
    "erection_quality_baseline",
    "lack_of_energy",
    "abd_pelvic_rectal_pain",
    "outcome_1y",
    "outcome_2y",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    /// 1-based line number in the source file.
    pub line: u64,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

/// Rows of a cohort CSV as text, before any interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCohort {
    pub source: String,
    pub header: Vec<String>,
    pub rows: Vec<RawRow>,
    pub malformed: Vec<MalformedRow>,
}

impl RawCohort {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn field<'a>(&self, row: &'a RawRow, name: &str) -> Option<&'a str> {
        self.column(name).and_then(|i| row.values.get(i)).map(String::as_str)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

/// Reads a cohort CSV file.
pub fn ingest(path: &Path) -> Result<RawCohort, CohortError> {
    let file = std::fs::File::open(path).map_err(|e| CohortError::UnreadableFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_reader(file, &path.display().to_string())
}

/// Reads cohort CSV text from any reader. Rows with the wrong number of
/// fields are collected in `malformed`.
pub fn ingest_reader(reader: impl Read, source: &str) -> Result<RawCohort, CohortError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CohortError::EmptyFile);
    }
    for column in COHORT_COLUMNS {
        if !header.iter().any(|h| h == column) {
            return Err(CohortError::MissingColumn(column.to_string()));
        }
    }
    let mut seen = BTreeSet::new();
    for h in &header {
        if !COHORT_COLUMNS.contains(&h.as_str()) || !seen.insert(h.as_str()) {
            return Err(CohortError::UnexpectedColumn(h.clone()));
        }
    }

    let mut rows = Vec::new();
    let mut malformed = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            malformed.push(MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
            continue;
        }
        rows.push(RawRow { line, values: record.iter().map(|v| v.trim().to_string()).collect() });
    }
    if rows.is_empty() && malformed.is_empty() {
        return Err(CohortError::EmptyFile);
    }
    Ok(RawCohort { source: source.to_string(), header, rows, malformed })
}

fn parse_code(raw: &RawCohort, row: &RawRow, field: &str, missing_allowed: bool) -> Result<u8, String> {
    let text = raw.field(row, field).unwrap_or("");
    if text.is_empty() {
        return if missing_allowed { Ok(0) } else { Err(format!("missing {field}")) };
    }
    text.parse::<u8>().map_err(|_| format!("invalid {field} `{text}`"))
}

fn parse_record(raw: &RawCohort, row: &RawRow, treatment: u8, hormone: u8) -> Result<PatientRecord, String> {
    let text = |f: &str| raw.field(row, f).unwrap_or("").to_string();
    let optional_outcome = |f: &str| -> Result<Option<u8>, String> {
        let t = raw.field(row, f).unwrap_or("");
        if t.is_empty() {
            Ok(None)
        } else {
            t.parse::<u8>().map(Some).map_err(|_| format!("invalid {f} `{t}`"))
        }
    };
    let age = text("age_years");
    let psa = text("psa_at_diagnosis");
    let n_stage = text("tumor_n_stage");
    let record = PatientRecord {
        patient_id: text("patient_id"),
        hospital_id: text("hospital_id"),
        age_years: if age.is_empty() {
            None
        } else {
            Some(age.parse().map_err(|_| format!("invalid age_years `{age}`"))?)
        },
        treatment_group: treatment,
        hormone_therapy: hormone,
        tumor_t_stage: parse_code(raw, row, "tumor_t_stage", false)?,
        tumor_n_stage: if n_stage.is_empty() {
            NStage::default()
        } else {
            n_stage.parse().map_err(|e: crate::model::ModelError| e.to_string())?
        },
        psa_at_diagnosis: if psa.is_empty() {
            None
        } else {
            Some(psa.parse().map_err(|_| format!("invalid psa_at_diagnosis `{psa}`"))?)
        },
        isup_grade_group: parse_code(raw, row, "isup_grade_group", true)?,
        cvd: parse_code(raw, row, "cvd", false)?,
        diabetes: parse_code(raw, row, "diabetes", false)?,
        charlson_simplified: parse_code(raw, row, "charlson_simplified", true)?,
        smoking: parse_code(raw, row, "smoking", true)?,
        alcohol: parse_code(raw, row, "alcohol", true)?,
        erection_frequency_baseline: parse_code(raw, row, "erection_frequency_baseline", true)?,
        erection_quality_baseline: parse_code(raw, row, "erection_quality_baseline", true)?,
        lack_of_energy: parse_code(raw, row, "lack_of_energy", true)?,
        abd_pelvic_rectal_pain: parse_code(raw, row, "abd_pelvic_rectal_pain", true)?,
        outcome_1y: optional_outcome("outcome_1y")?,
        outcome_2y: optional_outcome("outcome_2y")?,
    };
    if record.patient_id.is_empty() {
        return Err("missing patient_id".into());
    }
    if record.hospital_id.is_empty() {
        return Err("missing hospital_id".into());
    }
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Maps treatments and parses every row into validated records.
///
/// Rows that cannot be mapped or parsed (and duplicate patient ids) become
/// exclusions; malformed rows are excluded with their line number.
pub fn read_cohort(raw: &RawCohort, horizon: Horizon) -> Result<Cohort, CohortError> {
    let mapping = map_treatments(raw);
    let mut exclusions: Vec<Exclusion> = raw
        .malformed
        .iter()
        .map(|m| Exclusion { patient_id: format!("line {}", m.line), reason: m.reason.clone() })
        .collect();
    exclusions.extend(mapping.exclusions.iter().cloned());

    let mut records = Vec::with_capacity(raw.rows.len());
    let mut ids = BTreeSet::new();
    for (row, assignment) in raw.rows.iter().zip(&mapping.assignments) {
        let Some((treatment, hormone)) = *assignment else { continue };
        match parse_record(raw, row, treatment, hormone) {
            Ok(record) => {
                if ids.insert(record.patient_id.clone()) {
                    records.push(record);
                } else {
                    exclusions.push(Exclusion {
                        patient_id: record.patient_id,
                        reason: "duplicate patient_id".into(),
                    });
                }
            }
            Err(reason) => exclusions.push(Exclusion {
                patient_id: raw.field(row, "patient_id").unwrap_or("").to_string(),
                reason,
            }),
        }
    }
    Ok(Cohort { records, horizon, exclusions, dropped_variables: Vec::new() })
}

/// Writes records in the cohort CSV schema. `treatment_text`, when given,
/// replaces the numeric treatment column row by row.
pub fn write_cohort_csv(
    records: &[PatientRecord],
    treatment_text: Option<&[String]>,
    writer: impl Write,
) -> Result<(), CohortError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(COHORT_COLUMNS)?;
    let opt = |v: Option<u8>| v.map_or(String::new(), |x| x.to_string());
    for (i, r) in records.iter().enumerate() {
        let treatment = match treatment_text {
            Some(texts) => texts[i].clone(),
            None => r.treatment_group.to_string(),
        };
        csv.write_record([
            r.patient_id.clone(),
            r.hospital_id.clone(),
            r.age_years.map_or(String::new(), |a| a.to_string()),
            treatment,
            r.hormone_therapy.to_string(),
            r.tumor_t_stage.to_string(),
            r.tumor_n_stage.as_str().to_string(),
            r.psa_at_diagnosis.map_or(String::new(), |p| format!("{p:.1}")),
            r.isup_grade_group.to_string(),
            r.cvd.to_string(),
            r.diabetes.to_string(),
            r.charlson_simplified.to_string(),
            r.smoking.to_string(),
            r.alcohol.to_string(),
            r.erection_frequency_baseline.to_string(),
            r.erection_quality_baseline.to_string(),
            r.lack_of_energy.to_string(),
            r.abd_pelvic_rectal_pain.to_string(),
            opt(r.outcome_1y),
            opt(r.outcome_2y),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
