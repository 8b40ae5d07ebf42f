use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Numeric patient variables that can enter a model card or a design matrix.
///
/// Every variable is a single ordinal (or continuous) code. For ordinals the
/// missing value is the code `0` where the variable declares one; age and PSA
/// are carried as optional reals instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    AgeYears,
    TreatmentGroup,
    HormoneTherapy,
    TumorTStage,
    PsaAtDiagnosis,
    IsupGradeGroup,
    Cvd,
    Diabetes,
    CharlsonSimplified,
    Smoking,
    Alcohol,
    ErectionFrequencyBaseline,
    ErectionQualityBaseline,
    LackOfEnergy,
    AbdPelvicRectalPain,
}

/// How a variable is coded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coding {
    /// Integer codes in `min..=max`; `missing` is the code meaning "not recorded".
    Ordinal { min: i64, max: i64, missing: Option<i64> },
    /// Non-negative real, missing is an absent value.
    Continuous { min: f64, max: f64 },
}

impl Variable {
    pub const ALL: [Variable; 15] = [
        Variable::AgeYears,
        Variable::TreatmentGroup,
        Variable::HormoneTherapy,
        Variable::TumorTStage,
        Variable::PsaAtDiagnosis,
        Variable::IsupGradeGroup,
        Variable::Cvd,
        Variable::Diabetes,
        Variable::CharlsonSimplified,
        Variable::Smoking,
        Variable::Alcohol,
        Variable::ErectionFrequencyBaseline,
        Variable::ErectionQualityBaseline,
        Variable::LackOfEnergy,
        Variable::AbdPelvicRectalPain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::AgeYears => "age_years",
            Variable::TreatmentGroup => "treatment_group",
            Variable::HormoneTherapy => "hormone_therapy",
            Variable::TumorTStage => "tumor_t_stage",
            Variable::PsaAtDiagnosis => "psa_at_diagnosis",
            Variable::IsupGradeGroup => "isup_grade_group",
            Variable::Cvd => "cvd",
            Variable::Diabetes => "diabetes",
            Variable::CharlsonSimplified => "charlson_simplified",
            Variable::Smoking => "smoking",
            Variable::Alcohol => "alcohol",
            Variable::ErectionFrequencyBaseline => "erection_frequency_baseline",
            Variable::ErectionQualityBaseline => "erection_quality_baseline",
            Variable::LackOfEnergy => "lack_of_energy",
            Variable::AbdPelvicRectalPain => "abd_pelvic_rectal_pain",
        }
    }

    pub fn from_name(name: &str) -> Option<Variable> {
        Variable::ALL.iter().copied().find(|v| v.name() == name)
    }

    pub fn coding(self) -> Coding {
        use Coding::*;
        match self {
            Variable::AgeYears => Continuous { min: 0.0, max: 120.0 },
            Variable::PsaAtDiagnosis => Continuous { min: 0.0, max: 10_000.0 },
            Variable::TreatmentGroup => Ordinal { min: 1, max: 4, missing: None },
            Variable::HormoneTherapy | Variable::Cvd | Variable::Diabetes => {
                Ordinal { min: 0, max: 1, missing: None }
            }
            Variable::TumorTStage => Ordinal { min: 1, max: 3, missing: None },
            Variable::IsupGradeGroup => Ordinal { min: 0, max: 5, missing: Some(0) },
            Variable::CharlsonSimplified | Variable::Smoking | Variable::Alcohol => {
                Ordinal { min: 0, max: 3, missing: Some(0) }
            }
            Variable::ErectionFrequencyBaseline
            | Variable::LackOfEnergy
            | Variable::AbdPelvicRectalPain => Ordinal { min: 0, max: 5, missing: Some(0) },
            Variable::ErectionQualityBaseline => Ordinal { min: 0, max: 4, missing: Some(0) },
        }
    }

    /// Answer labels for each code, as printed on the nomogram legends.
    pub fn labels(self) -> &'static [(i64, &'static str)] {
        match self {
            Variable::TreatmentGroup => &[
                (1, "radical prostatectomy (RP)"),
                (2, "external beam radiotherapy (EBRT)"),
                (3, "brachytherapy (BT)"),
                (4, "no active therapy (NAT)"),
            ],
            Variable::HormoneTherapy | Variable::Cvd | Variable::Diabetes => {
                &[(0, "no"), (1, "yes")]
            }
            Variable::TumorTStage => &[(1, "T1"), (2, "T2"), (3, "T3")],
            Variable::IsupGradeGroup => &[
                (0, "missing value"),
                (1, "grade group 1"),
                (2, "grade group 2"),
                (3, "grade group 3"),
                (4, "grade group 4"),
                (5, "grade group 5"),
            ],
            Variable::CharlsonSimplified => &[
                (0, "missing value"),
                (1, "no comorbidities"),
                (2, "1 point"),
                (3, ">=2 point"),
            ],
            Variable::Smoking => &[(0, "missing"), (1, "never"), (2, "former"), (3, "current")],
            Variable::Alcohol => &[(0, "missing"), (1, "no"), (2, "previously"), (3, "yes")],
            Variable::ErectionFrequencyBaseline => &[
                (0, "missing value"),
                (1, "never had an erection when wanted"),
                (2, "less than half the time"),
                (3, "about half the time"),
                (4, "more than half the time"),
                (5, "whenever wanted"),
            ],
            Variable::ErectionQualityBaseline => &[
                (0, "missing value"),
                (1, "none at all"),
                (2, "not firm enough for sexual activity"),
                (3, "firm enough for masturbation/foreplay"),
                (4, "firm enough for intercourse"),
            ],
            Variable::LackOfEnergy | Variable::AbdPelvicRectalPain => &[
                (0, "missing value"),
                (1, "no problem"),
                (2, "very small problem"),
                (3, "small problem"),
                (4, "moderate problem"),
                (5, "big problem"),
            ],
            Variable::AgeYears | Variable::PsaAtDiagnosis => &[],
        }
    }

    /// True when `value` is the declared missing code (ordinals only).
    pub fn is_missing_code(self, value: f64) -> bool {
        matches!(self.coding(), Coding::Ordinal { missing: Some(m), .. } if value == m as f64)
    }

    pub fn has_missing_code(self) -> bool {
        matches!(
            self.coding(),
            Coding::Ordinal { missing: Some(_), .. } | Coding::Continuous { .. }
        )
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::from_name(s).ok_or_else(|| ModelError::UnknownVariable(s.to_string()))
    }
}

/// Clinical N stage. Descriptive only, never a model input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NStage {
    /// N0 (also accepts the "N1" label used in some registry exports).
    #[default]
    N0,
    NX,
}

impl NStage {
    pub fn as_str(self) -> &'static str {
        match self {
            NStage::N0 => "N0",
            NStage::NX => "NX",
        }
    }
}

impl FromStr for NStage {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N0" | "N1" => Ok(NStage::N0),
            "NX" => Ok(NStage::NX),
            _ => Err(ModelError::InvalidValue {
                field: "tumor_n_stage".into(),
                value: s.into(),
            }),
        }
    }
}

/// One patient's baseline clinical and PROM variables with observed outcomes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub hospital_id: String,
    pub age_years: Option<u32>,
    pub treatment_group: u8,
    pub hormone_therapy: u8,
    pub tumor_t_stage: u8,
    pub tumor_n_stage: NStage,
    pub psa_at_diagnosis: Option<f64>,
    pub isup_grade_group: u8,
    pub cvd: u8,
    pub diabetes: u8,
    pub charlson_simplified: u8,
    pub smoking: u8,
    pub alcohol: u8,
    pub erection_frequency_baseline: u8,
    pub erection_quality_baseline: u8,
    pub lack_of_energy: u8,
    pub abd_pelvic_rectal_pain: u8,
    /// EPIC-26 question 10 answer (1..5) at 12 months.
    pub outcome_1y: Option<u8>,
    /// EPIC-26 question 10 answer (1..5) at 24 months.
    pub outcome_2y: Option<u8>,
}

impl PatientRecord {
    /// Value of a numeric variable; `None` only for absent age or PSA.
    pub fn get(&self, variable: Variable) -> Option<f64> {
        let code = |c: u8| Some(c as f64);
        match variable {
            Variable::AgeYears => self.age_years.map(f64::from),
            Variable::PsaAtDiagnosis => self.psa_at_diagnosis,
            Variable::TreatmentGroup => code(self.treatment_group),
            Variable::HormoneTherapy => code(self.hormone_therapy),
            Variable::TumorTStage => code(self.tumor_t_stage),
            Variable::IsupGradeGroup => code(self.isup_grade_group),
            Variable::Cvd => code(self.cvd),
            Variable::Diabetes => code(self.diabetes),
            Variable::CharlsonSimplified => code(self.charlson_simplified),
            Variable::Smoking => code(self.smoking),
            Variable::Alcohol => code(self.alcohol),
            Variable::ErectionFrequencyBaseline => code(self.erection_frequency_baseline),
            Variable::ErectionQualityBaseline => code(self.erection_quality_baseline),
            Variable::LackOfEnergy => code(self.lack_of_energy),
            Variable::AbdPelvicRectalPain => code(self.abd_pelvic_rectal_pain),
        }
    }

    /// Sets an ordinal variable. Continuous variables accept any non-negative value.
    pub fn set(&mut self, variable: Variable, value: f64) {
        let code = value as u8;
        match variable {
            Variable::AgeYears => self.age_years = Some(value as u32),
            Variable::PsaAtDiagnosis => self.psa_at_diagnosis = Some(value),
            Variable::TreatmentGroup => self.treatment_group = code,
            Variable::HormoneTherapy => self.hormone_therapy = code,
            Variable::TumorTStage => self.tumor_t_stage = code,
            Variable::IsupGradeGroup => self.isup_grade_group = code,
            Variable::Cvd => self.cvd = code,
            Variable::Diabetes => self.diabetes = code,
            Variable::CharlsonSimplified => self.charlson_simplified = code,
            Variable::Smoking => self.smoking = code,
            Variable::Alcohol => self.alcohol = code,
            Variable::ErectionFrequencyBaseline => self.erection_frequency_baseline = code,
            Variable::ErectionQualityBaseline => self.erection_quality_baseline = code,
            Variable::LackOfEnergy => self.lack_of_energy = code,
            Variable::AbdPelvicRectalPain => self.abd_pelvic_rectal_pain = code,
        }
    }

    /// True when the variable holds its missing code (or is absent).
    pub fn is_missing(&self, variable: Variable) -> bool {
        match self.get(variable) {
            None => true,
            Some(v) => variable.is_missing_code(v),
        }
    }

    /// Checks every declared range.
    pub fn validate(&self) -> Result<(), ModelError> {
        for variable in Variable::ALL {
            if let Some(value) = self.get(variable) {
                check_range(variable, value)?;
            }
        }
        for (field, outcome) in [("outcome_1y", self.outcome_1y), ("outcome_2y", self.outcome_2y)] {
            if let Some(answer) = outcome {
                if !(1..=5).contains(&answer) {
                    return Err(ModelError::OutOfRangeCode {
                        variable: field.into(),
                        value: answer as f64,
                        min: 1,
                        max: 5,
                    });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_range(variable: Variable, value: f64) -> Result<(), ModelError> {
    let ok = match variable.coding() {
        Coding::Ordinal { min, max, missing } => {
            value.fract() == 0.0
                && ((min as f64..=max as f64).contains(&value)
                    || missing.is_some_and(|m| m as f64 == value))
        }
        Coding::Continuous { min, max } => value.is_finite() && (min..=max).contains(&value),
    };
    if ok {
        Ok(())
    } else {
        let (min, max) = match variable.coding() {
            Coding::Ordinal { min, max, .. } => (min, max),
            Coding::Continuous { min, max } => (min as i64, max as i64),
        };
        Err(ModelError::OutOfRangeCode { variable: variable.name().into(), value, min, max })
    }
}

/// Source of variable values for model evaluation.
pub trait Covariates {
    /// Value of the named variable, or `None` when the source does not carry it.
    fn value(&self, variable: &str) -> Option<f64>;
}

impl Covariates for PatientRecord {
    fn value(&self, variable: &str) -> Option<f64> {
        Variable::from_name(variable).and_then(|v| self.get(v))
    }
}

impl Covariates for BTreeMap<String, f64> {
    fn value(&self, variable: &str) -> Option<f64> {
        self.get(variable).copied()
    }
}

impl<T: Covariates + ?Sized> Covariates for &T {
    fn value(&self, variable: &str) -> Option<f64> {
        (**self).value(variable)
    }
}
