use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError, Exclusion, Horizon};
use crate::model::{PatientRecord, Variable};

/// Variables with more than this share missing are dropped.
pub const DEFAULT_VARIABLE_MISSING_THRESHOLD: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OutcomeClass {
    /// EPIC-26 Q10 answer 1: never an erection when wanted.
    Ed,
    /// Answers 2..5.
    Function,
    Missing,
}

/// Binary outcome at `horizon`.
pub fn binarize_outcome(record: &PatientRecord, horizon: Horizon) -> Result<OutcomeClass, CohortError> {
    match horizon.outcome(record) {
        None => Ok(OutcomeClass::Missing),
        Some(1) => Ok(OutcomeClass::Ed),
        Some(2..=5) => Ok(OutcomeClass::Function),
        Some(other) => Err(CohortError::OutOfRangeAnswer(other)),
    }
}

/// Nearest-rank percentile: the smallest value with at least `pct`% of the
/// sample at or below it.
pub fn nearest_rank_percentile(values: &[usize], pct: f64) -> usize {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Number of missing values among `variables` for one record.
pub fn missing_count(record: &PatientRecord, variables: &[Variable]) -> usize {
    variables.iter().filter(|&&v| v.has_missing_code() && record.is_missing(v)).count()
}

/// Removes missing data without imputing it.
///
/// First drops patients without an outcome at `horizon`. Then, until nothing
/// changes: drops variables whose missing share exceeds `var_threshold`, and
/// excludes patients whose missing count exceeds the nearest-rank 95th
/// percentile of the per-patient missing counts.
pub fn apply_missingness_policy(
    cohort: &Cohort,
    var_threshold: f64,
    horizon: Horizon,
) -> Result<Cohort, CohortError> {
    if !(var_threshold > 0.0 && var_threshold <= 1.0) {
        return Err(CohortError::InvalidArgument(format!(
            "variable missing threshold must be in (0, 1], got {var_threshold}"
        )));
    }
    let mut out = Cohort {
        records: Vec::with_capacity(cohort.records.len()),
        horizon,
        exclusions: cohort.exclusions.clone(),
        dropped_variables: cohort.dropped_variables.clone(),
    };
    for record in &cohort.records {
        match binarize_outcome(record, horizon)? {
            OutcomeClass::Missing => out.exclusions.push(Exclusion {
                patient_id: record.patient_id.clone(),
                reason: format!("missing outcome at {} months", horizon.months()),
            }),
            _ => out.records.push(record.clone()),
        }
    }

    loop {
        if out.records.is_empty() {
            return Err(CohortError::AllPatientsExcluded);
        }
        let n = out.records.len() as f64;
        let mut changed = false;

        for variable in out.active_variables() {
            if !variable.has_missing_code() {
                continue;
            }
            let missing = out.records.iter().filter(|r| r.is_missing(variable)).count();
            if missing as f64 / n > var_threshold {
                out.dropped_variables.push(variable);
                changed = true;
            }
        }

        let active = out.active_variables();
        let counts: Vec<usize> = out.records.iter().map(|r| missing_count(r, &active)).collect();
        let cutoff = nearest_rank_percentile(&counts, 95.0);
        if counts.iter().any(|&c| c > cutoff) {
            let records = std::mem::take(&mut out.records);
            for (record, count) in records.into_iter().zip(counts) {
                if count > cutoff {
                    out.exclusions.push(Exclusion {
                        patient_id: record.patient_id,
                        reason: format!("{count} missing values (95th percentile {cutoff})"),
                    });
                } else {
                    out.records.push(record);
                }
            }
            changed = true;
        }

        if !changed {
            break;
        }
    }
    out.dropped_variables.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(id: usize) -> PatientRecord {
        PatientRecord {
            patient_id: format!("P{id}"),
            hospital_id: "H1".into(),
            age_years: Some(65),
            treatment_group: 1,
            tumor_t_stage: 1,
            psa_at_diagnosis: Some(5.0),
            isup_grade_group: 1,
            charlson_simplified: 1,
            smoking: 1,
            alcohol: 1,
            erection_frequency_baseline: 3,
            erection_quality_baseline: 3,
            lack_of_energy: 1,
            abd_pelvic_rectal_pain: 1,
            outcome_1y: Some(2),
            outcome_2y: Some(1),
            ..Default::default()
        }
    }

    fn cohort(records: Vec<PatientRecord>) -> Cohort {
        Cohort::new(records, Horizon::OneYear).unwrap()
    }

    #[test]
    fn binarize_partitions_answers() {
        let mut r = complete(1);
        for (answer, class) in [(1, OutcomeClass::Ed), (3, OutcomeClass::Function), (5, OutcomeClass::Function)] {
            r.outcome_1y = Some(answer);
            assert_eq!(binarize_outcome(&r, Horizon::OneYear).unwrap(), class);
        }
        r.outcome_1y = None;
        assert_eq!(binarize_outcome(&r, Horizon::OneYear).unwrap(), OutcomeClass::Missing);
        r.outcome_1y = Some(6);
        assert!(matches!(binarize_outcome(&r, Horizon::OneYear), Err(CohortError::OutOfRangeAnswer(6))));
    }

    #[test]
    fn fully_missing_variable_is_dropped() {
        let records: Vec<_> = (0..20)
            .map(|i| PatientRecord { smoking: 0, ..complete(i) })
            .collect();
        let out = apply_missingness_policy(&cohort(records), 0.3, Horizon::OneYear).unwrap();
        assert_eq!(out.dropped_variables, vec![Variable::Smoking]);
        assert_eq!(out.records.len(), 20);
    }

    #[test]
    fn high_missing_patients_excluded() {
        let mut records: Vec<_> = (0..95).map(complete).collect();
        for i in 95..100 {
            // ten missing values each
            records.push(PatientRecord {
                age_years: None,
                psa_at_diagnosis: None,
                isup_grade_group: 0,
                charlson_simplified: 0,
                smoking: 0,
                alcohol: 0,
                erection_frequency_baseline: 0,
                erection_quality_baseline: 0,
                lack_of_energy: 0,
                abd_pelvic_rectal_pain: 0,
                ..complete(i)
            });
        }
        assert_eq!(missing_count(&records[99], &Variable::ALL), 10);
        let counts: Vec<usize> = records.iter().map(|r| missing_count(r, &Variable::ALL)).collect();
        assert_eq!(nearest_rank_percentile(&counts, 95.0), 0);
        let out = apply_missingness_policy(&cohort(records), 0.3, Horizon::OneYear).unwrap();
        assert_eq!(out.records.len(), 95);
        assert!(out.dropped_variables.is_empty());
        assert_eq!(out.exclusions.len(), 5);
    }

    #[test]
    fn complete_cohort_unchanged() {
        let records: Vec<_> = (0..30).map(complete).collect();
        let c = cohort(records.clone());
        let out = apply_missingness_policy(&c, 0.3, Horizon::OneYear).unwrap();
        assert_eq!(out.records, records);
        assert!(out.exclusions.is_empty());
    }

    #[test]
    fn missing_outcomes_are_excluded_per_horizon() {
        let mut records: Vec<_> = (0..10).map(complete).collect();
        records[3].outcome_2y = None;
        let out = apply_missingness_policy(&cohort(records.clone()), 0.3, Horizon::TwoYears).unwrap();
        assert_eq!(out.records.len(), 9);
        assert_eq!(out.horizon, Horizon::TwoYears);
        let out = apply_missingness_policy(&cohort(records), 0.3, Horizon::OneYear).unwrap();
        assert_eq!(out.records.len(), 10);
    }

    #[test]
    fn all_excluded() {
        let records: Vec<_> = (0..3).map(|i| PatientRecord { outcome_1y: None, ..complete(i) }).collect();
        assert!(matches!(
            apply_missingness_policy(&cohort(records), 0.3, Horizon::OneYear),
            Err(CohortError::AllPatientsExcluded)
        ));
    }

    #[test]
    fn nearest_rank() {
        assert_eq!(nearest_rank_percentile(&[5], 95.0), 5);
        let v: Vec<usize> = (1..=20).collect();
        assert_eq!(nearest_rank_percentile(&v, 95.0), 19);
        assert_eq!(nearest_rank_percentile(&v, 100.0), 20);
    }
}
