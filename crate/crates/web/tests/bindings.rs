use ed_predict_web::{error_json, models, nomogram_table, predict, scenario_grid};
use serde_json::Value;

const ZERO_1Y: &str = include_str!("../../cli/tests/fixtures/zero_record.json");

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

#[test]
fn predict_zero_record() {
    let p = predict("ed-1y", ZERO_1Y, false).unwrap();
    assert_eq!(p.eta, -2.081);
    assert!((p.p_retained - logistic(-2.081)).abs() < 1e-15);
}

#[test]
fn errors_carry_kind_and_field() {
    let e = predict("ed-1y", r#"{"treatment_group": 2}"#, false).unwrap_err();
    let v: Value = serde_json::from_str(&error_json(&e)).unwrap();
    assert_eq!(v["error"]["kind"], "MissingField");
    assert!(predict("ed-1y", "[1, 2]", false).is_err());
    assert!(predict("ed-3y", ZERO_1Y, false).is_err());
}

#[test]
fn scenario_grid_cells() {
    // other fields all zero: eta = intercept + 0.900 t - 0.696 h
    let cells = scenario_grid("ed-1y", ZERO_1Y, false).unwrap();
    assert_eq!(cells.len(), 8);
    for c in &cells {
        let eta = -2.081 + 0.900 * c.treatment_group as f64 - 0.696 * c.hormone_therapy as f64;
        assert!((c.p_retained - logistic(eta)).abs() < 1e-12, "{c:?}");
        assert!((c.p_ed + c.p_retained - 1.0).abs() < 1e-12);
        assert!(!c.treatment_label.is_empty());
    }
    let calibrated = scenario_grid("ed-1y", ZERO_1Y, true).unwrap();
    let eta = -2.081 + 0.900 + 0.05485955;
    assert!((calibrated[0].p_retained - logistic(eta)).abs() < 1e-12);
}

#[test]
fn models_and_nomogram() {
    let v: Value = serde_json::from_str(&models()).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ed-1y", "ed-2y"]);
    let table = nomogram_table("ed-2y").unwrap();
    assert_eq!(table.axes.len(), 9);
}
