use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nomogram::PointScale;
use super::record::{Covariates, Variable};
use super::ModelError;

/// What the model's probability refers to.
pub const OUTCOME_SEMANTICS: &str =
    "probability of retained erectile function (EPIC-26 Q10 answer 2–5)";

const ED_1Y_JSON: &str = include_str!("../../cards/ed-1y.json");
const ED_2Y_JSON: &str = include_str!("../../cards/ed-2y.json");

/// One variable of a linear model card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub variable: String,
    pub coefficient: f64,
    pub min_code: i64,
    pub max_code: i64,
    #[serde(default)]
    pub missing_code: Option<i64>,
}

impl Term {
    pub fn span(&self) -> f64 {
        (self.max_code - self.min_code) as f64
    }

    /// Code at which this term contributes least to the linear predictor.
    pub fn reference_code(&self) -> i64 {
        if self.coefficient >= 0.0 {
            self.min_code
        } else {
            self.max_code
        }
    }

    fn check_value(&self, value: f64) -> Result<(), ModelError> {
        let in_range = value >= self.min_code as f64 && value <= self.max_code as f64;
        let is_missing = self.missing_code.is_some_and(|m| m as f64 == value);
        if value.is_finite() && (in_range || is_missing) {
            Ok(())
        } else {
            Err(ModelError::OutOfRangeCode {
                variable: self.variable.clone(),
                value,
                min: self.min_code,
                max: self.max_code,
            })
        }
    }
}

/// A named, versioned logistic model over patient variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: String,
    pub horizon_months: u32,
    pub intercept: f64,
    #[serde(default)]
    pub calibration_offset: f64,
    /// Intercept update from recalibration in the large; only applied on request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recalibrated_offset: Option<f64>,
    pub terms: Vec<Term>,
}

fn default_version() -> String {
    "1.0.0".to_string()
}

/// Output of evaluating a card on one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub eta: f64,
    pub p_retained: f64,
    pub p_ed: f64,
    pub points: Vec<VariablePoints>,
    pub total_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariablePoints {
    pub variable: String,
    pub points: f64,
}

/// Numerically stable logistic function.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl ModelCard {
    /// The published 12-month model.
    pub fn ed_1y() -> ModelCard {
        ModelCard::from_json(ED_1Y_JSON).expect("bundled ed-1y card is valid")
    }

    /// The published 24-month model.
    pub fn ed_2y() -> ModelCard {
        ModelCard::from_json(ED_2Y_JSON).expect("bundled ed-2y card is valid")
    }

    pub fn bundled() -> Vec<ModelCard> {
        vec![ModelCard::ed_1y(), ModelCard::ed_2y()]
    }

    /// Raw JSON text of a bundled card, by name.
    pub fn bundled_source(name: &str) -> Option<&'static str> {
        match name {
            "ed-1y" => Some(ED_1Y_JSON),
            "ed-2y" => Some(ED_2Y_JSON),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<ModelCard, ModelError> {
        let card: ModelCard =
            serde_json::from_str(text).map_err(|e| ModelError::InvalidCard(e.to_string()))?;
        card.validate()?;
        Ok(card)
    }

    pub fn load(path: &Path) -> Result<ModelCard, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::InvalidCard(format!("{}: {e}", path.display())))?;
        ModelCard::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("card serializes")
    }

    pub fn outcome_semantics(&self) -> &'static str {
        OUTCOME_SEMANTICS
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon_months != 12 && self.horizon_months != 24 {
            return Err(ModelError::InvalidCard(format!(
                "horizon_months must be 12 or 24, got {}",
                self.horizon_months
            )));
        }
        if !self.intercept.is_finite() || !self.calibration_offset.is_finite() {
            return Err(ModelError::InvalidCard("non-finite intercept or offset".into()));
        }
        let mut seen = BTreeSet::new();
        for term in &self.terms {
            if Variable::from_name(&term.variable).is_none() {
                return Err(ModelError::UnknownVariable(term.variable.clone()));
            }
            if !seen.insert(term.variable.as_str()) {
                return Err(ModelError::InvalidCard(format!(
                    "duplicate term {}",
                    term.variable
                )));
            }
            if term.min_code > term.max_code {
                return Err(ModelError::InvalidCard(format!(
                    "{}: min_code > max_code",
                    term.variable
                )));
            }
            if term.missing_code.is_some_and(|m| m != 0) {
                return Err(ModelError::InvalidCard(format!(
                    "{}: missing_code must be 0",
                    term.variable
                )));
            }
            if !term.coefficient.is_finite() {
                return Err(ModelError::InvalidCard(format!(
                    "{}: non-finite coefficient",
                    term.variable
                )));
            }
        }
        Ok(())
    }

    /// Linear predictor: intercept + calibration offset + Σ coefficient·code.
    pub fn linear_predictor(&self, record: &impl Covariates) -> Result<f64, ModelError> {
        let mut eta = self.intercept + self.calibration_offset;
        for term in &self.terms {
            eta += term.coefficient * self.term_value(term, record)?;
        }
        Ok(eta)
    }

    fn term_value(&self, term: &Term, record: &impl Covariates) -> Result<f64, ModelError> {
        let value = record
            .value(&term.variable)
            .ok_or_else(|| ModelError::UnknownVariable(term.variable.clone()))?;
        term.check_value(value)?;
        Ok(value)
    }

    /// Evaluates the card on one record.
    pub fn evaluate(&self, record: &impl Covariates) -> Result<Prediction, ModelError> {
        let eta = self.linear_predictor(record)?;
        let p_retained = sigmoid(eta);
        let scale = PointScale::for_card(self);
        let mut points = Vec::with_capacity(self.terms.len());
        let mut total_points = 0.0;
        for term in &self.terms {
            let value = self.term_value(term, record)?;
            let p = scale.points(term, value);
            total_points += p;
            points.push(VariablePoints { variable: term.variable.clone(), points: p });
        }
        Ok(Prediction { eta, p_retained, p_ed: 1.0 - p_retained, points, total_points })
    }

    /// Copy of the card with its calibration offset replaced by `delta`.
    pub fn apply_calibration_offset(&self, delta: f64) -> Result<ModelCard, ModelError> {
        if !delta.is_finite() {
            return Err(ModelError::NonFiniteDelta(delta));
        }
        Ok(ModelCard { calibration_offset: delta, ..self.clone() })
    }

    /// Copy with the stored recalibration offset switched on (0 if the card has none).
    pub fn with_recalibration(&self) -> ModelCard {
        ModelCard {
            calibration_offset: self.recalibrated_offset.unwrap_or(0.0),
            ..self.clone()
        }
    }

    pub fn term(&self, variable: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.variable == variable)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.variable.as_str())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::PatientRecord;

    fn zero_map(card: &ModelCard) -> BTreeMap<String, f64> {
        card.terms.iter().map(|t| (t.variable.clone(), 0.0)).collect()
    }

    #[test]
    fn all_zero_codes_give_intercept_only() {
        let card = ModelCard::ed_1y();
        let p = card.evaluate(&zero_map(&card)).unwrap();
        assert_eq!(p.eta, -2.081);
        assert_eq!(p.p_ed + p.p_retained, 1.0);
    }

    #[test]
    fn null_card_is_one_half() {
        let card = ModelCard {
            name: "null".into(),
            version: "0".into(),
            horizon_months: 12,
            intercept: 0.0,
            calibration_offset: 0.0,
            recalibrated_offset: None,
            terms: vec![Term {
                variable: "cvd".into(),
                coefficient: 0.0,
                min_code: 0,
                max_code: 1,
                missing_code: None,
            }],
        };
        let r = PatientRecord { treatment_group: 2, tumor_t_stage: 1, cvd: 1, ..Default::default() };
        let p = card.evaluate(&r).unwrap();
        assert_eq!(p.eta, 0.0);
        assert_eq!(p.p_retained, 0.5);
        assert_eq!(p.total_points, 0.0);
    }

    #[test]
    fn unknown_variable_and_range_errors() {
        let card = ModelCard::ed_1y();
        let mut map = BTreeMap::new();
        map.insert("treatment_group".to_string(), 1.0);
        match card.evaluate(&map) {
            Err(ModelError::UnknownVariable(v)) => assert_eq!(v, "erection_quality_baseline"),
            other => panic!("unexpected {other:?}"),
        }
        let r = PatientRecord {
            treatment_group: 1,
            tumor_t_stage: 1,
            erection_quality_baseline: 9,
            ..Default::default()
        };
        assert!(matches!(card.evaluate(&r), Err(ModelError::OutOfRangeCode { .. })));
        let mut map = zero_map(&card);
        map.insert("treatment_group".into(), 5.0);
        assert!(matches!(card.evaluate(&map), Err(ModelError::OutOfRangeCode { .. })));
        map.insert("treatment_group".into(), 2.5);
        assert!(card.evaluate(&map).is_ok(), "real values inside the range are accepted");
    }

    #[test]
    fn card_validation() {
        let mut card = ModelCard::ed_1y();
        card.horizon_months = 18;
        assert!(card.validate().is_err());
        let mut card = ModelCard::ed_1y();
        card.terms.push(card.terms[0].clone());
        assert!(card.validate().is_err());
        let mut card = ModelCard::ed_1y();
        card.terms[0].variable = "bmi".into();
        assert!(matches!(card.validate(), Err(ModelError::UnknownVariable(_))));
        let mut card = ModelCard::ed_1y();
        card.terms[1].missing_code = Some(9);
        assert!(card.validate().is_err());
    }

    #[test]
    fn offset_rejects_non_finite() {
        let card = ModelCard::ed_1y();
        assert!(matches!(
            card.apply_calibration_offset(f64::NAN),
            Err(ModelError::NonFiniteDelta(_))
        ));
        let shifted = card.apply_calibration_offset(0.25).unwrap();
        assert_eq!(card.calibration_offset, 0.0);
        assert_eq!(shifted.calibration_offset, 0.25);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((logit(sigmoid(1.7)) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let card = ModelCard::ed_2y();
        let back = ModelCard::from_json(&card.to_json_pretty()).unwrap();
        assert_eq!(card, back);
    }
}
