//! JSON requests against a card, and the nomogram as CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ModelCard, ModelError, NomogramTable, Variable, VariablePoints};
use crate::report::fmt_num;

/// Record fields that are accepted but play no part in prediction.
const PASSIVE_FIELDS: [&str; 5] = ["patient_id", "hospital_id", "tumor_n_stage", "outcome_1y", "outcome_2y"];

#[derive(Debug, Clone, Deserialize)]
pub struct PredictRequest {
    pub model: String,
    pub record: Map<String, Value>,
    #[serde(default)]
    pub apply_calibration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model_name: String,
    pub model_version: String,
    pub horizon_months: u32,
    pub eta: f64,
    pub p_retained: f64,
    pub p_ed: f64,
    pub points: Vec<VariablePoints>,
    pub total_points: f64,
    pub calibration_applied: bool,
}

/// Flat JSON object → variable values. Every term of `card` must be
/// present; unknown names are rejected.
pub fn record_from_json(card: &ModelCard, record: &Map<String, Value>) -> Result<BTreeMap<String, f64>, ModelError> {
    let mut values = BTreeMap::new();
    for (name, value) in record {
        if PASSIVE_FIELDS.contains(&name.as_str()) {
            continue;
        }
        if Variable::from_name(name).is_none() {
            return Err(ModelError::UnknownVariable(name.clone()));
        }
        let x = match value {
            Value::Null => continue,
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        };
        match x {
            Some(x) if x.is_finite() => {
                values.insert(name.clone(), x);
            }
            _ => {
                return Err(ModelError::InvalidValue { field: name.clone(), value: value.to_string() })
            }
        }
    }
    if let Some(missing) = card.variables().find(|v| !values.contains_key(*v)) {
        return Err(ModelError::MissingField(missing.to_string()));
    }
    Ok(values)
}

/// Evaluates `card`, with its stored recalibration offset when asked.
pub fn predict_json(
    card: &ModelCard,
    record: &Map<String, Value>,
    apply_calibration: bool,
) -> Result<PredictResponse, ModelError> {
    let values = record_from_json(card, record)?;
    let card = if apply_calibration { card.with_recalibration() } else { card.clone() };
    let p = card.evaluate(&values)?;
    Ok(PredictResponse {
        model_name: card.name.clone(),
        model_version: card.version.clone(),
        horizon_months: card.horizon_months,
        eta: p.eta,
        p_retained: p.p_retained,
        p_ed: p.p_ed,
        points: p.points,
        total_points: p.total_points,
        calibration_applied: apply_calibration,
    })
}

/// `kind,variable,code,points,eta,p_retained`: one `axis` row per code of
/// every variable, then the `total` points-to-probability rows.
pub fn nomogram_csv(table: &NomogramTable) -> String {
    let mut out = String::from("kind,variable,code,points,eta,p_retained\n");
    for axis in &table.axes {
        for tick in &axis.ticks {
            let _ = writeln!(out, "axis,{},{},{},,", axis.variable, tick.code, fmt_num(tick.points));
        }
    }
    for row in &table.total_points {
        let _ = writeln!(
            out,
            "total,,,{},{},{}",
            fmt_num(row.total_points),
            fmt_num(row.eta),
            fmt_num(row.p_retained)
        );
    }
    out
}
