//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON text. Errors come back as a thrown
//! JS `Error` whose message is `{"error": {"kind", "field", "message"}}`.

use ed_predict::model::{nomogram, predict_json, NomogramTable, PredictResponse};
use ed_predict::report::to_json_compact;
use ed_predict::{ModelCard, ModelError, Variable};
use serde::Serialize;
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

fn card(name: &str) -> Result<ModelCard, ModelError> {
    ModelCard::bundled()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| ModelError::InvalidCard(format!("no bundled model named `{name}`")))
}

fn parse_record(record: &str) -> Result<Map<String, Value>, ModelError> {
    match serde_json::from_str::<Value>(record) {
        Ok(Value::Object(map)) => Ok(map),
        _ => Err(ModelError::InvalidValue { field: "record".into(), value: record.chars().take(40).collect() }),
    }
}

pub fn error_json(e: &ModelError) -> String {
    json!({"error": {"kind": e.kind(), "field": e.field(), "message": e.to_string()}}).to_string()
}

#[derive(Serialize)]
struct VariableForm {
    name: String,
    min_code: i64,
    max_code: i64,
    labels: Vec<(i64, &'static str)>,
}

#[derive(Serialize)]
struct ModelForm {
    name: String,
    horizon_months: u32,
    variables: Vec<VariableForm>,
}

/// Bundled cards and the inputs each one needs.
pub fn models() -> String {
    let forms: Vec<ModelForm> = ModelCard::bundled()
        .into_iter()
        .map(|c| ModelForm {
            name: c.name.clone(),
            horizon_months: c.horizon_months,
            variables: c
                .terms
                .iter()
                .map(|t| VariableForm {
                    name: t.variable.clone(),
                    min_code: t.min_code,
                    max_code: t.max_code,
                    labels: Variable::from_name(&t.variable).map_or_else(Vec::new, |v| v.labels().to_vec()),
                })
                .collect(),
        })
        .collect();
    to_json_compact(&forms)
}

pub fn predict(model: &str, record: &str, apply_calibration: bool) -> Result<PredictResponse, ModelError> {
    predict_json(&card(model)?, &parse_record(record)?, apply_calibration)
}

pub fn nomogram_table(model: &str) -> Result<NomogramTable, ModelError> {
    nomogram(&card(model)?)
}

/// One cell of the treatment × hormone therapy grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioCell {
    pub treatment_group: i64,
    pub treatment_label: &'static str,
    pub hormone_therapy: i64,
    pub p_retained: f64,
    pub p_ed: f64,
}

/// The patient's record re-evaluated under every treatment group, with and
/// without hormone therapy. Other fields are kept as given.
pub fn scenario_grid(model: &str, record: &str, apply_calibration: bool) -> Result<Vec<ScenarioCell>, ModelError> {
    let card = card(model)?;
    let base = parse_record(record)?;
    let treatment = card.term("treatment_group").ok_or_else(|| ModelError::UnknownVariable("treatment_group".into()))?;
    let labels = Variable::from_name("treatment_group").map_or_else(Vec::new, |v| v.labels().to_vec());
    let mut cells = Vec::new();
    for code in treatment.min_code..=treatment.max_code {
        for hormone in [0, 1] {
            let mut r = base.clone();
            r.insert("treatment_group".into(), json!(code));
            r.insert("hormone_therapy".into(), json!(hormone));
            let p = predict_json(&card, &r, apply_calibration)?;
            cells.push(ScenarioCell {
                treatment_group: code,
                treatment_label: labels.iter().find(|l| l.0 == code).map_or("", |l| l.1),
                hormone_therapy: hormone,
                p_retained: p.p_retained,
                p_ed: p.p_ed,
            });
        }
    }
    Ok(cells)
}

fn js<T: Serialize>(r: Result<T, ModelError>) -> Result<String, JsError> {
    r.map(|v| to_json_compact(&v)).map_err(|e| JsError::new(&error_json(&e)))
}

#[wasm_bindgen(js_name = models)]
pub fn models_js() -> String {
    models()
}

#[wasm_bindgen(js_name = predict)]
pub fn predict_js(model: &str, record: &str, apply_calibration: bool) -> Result<String, JsError> {
    js(predict(model, record, apply_calibration))
}

#[wasm_bindgen(js_name = nomogram)]
pub fn nomogram_js(model: &str) -> Result<String, JsError> {
    js(nomogram_table(model))
}

#[wasm_bindgen(js_name = scenarioGrid)]
pub fn scenario_grid_js(model: &str, record: &str, apply_calibration: bool) -> Result<String, JsError> {
    js(scenario_grid(model, record, apply_calibration))
}
