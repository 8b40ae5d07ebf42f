//! Stable text output: JSON and CSV numbers at 10 significant digits.

use serde::Serialize;
use serde_json::Value;

/// Significant digits kept in serialized numbers.
pub const SIGNIFICANT_DIGITS: usize = 10;

/// Rounds `x` to 10 significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest decimal text of `round_sig(x)`; integers print without a point.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r.is_nan() {
        return "NaN".into();
    }
    serde_json::Number::from_f64(r).map_or_else(|| r.to_string(), |n| n.to_string())
}

/// Rounds every float in a JSON tree in place.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with rounded numbers and a trailing newline.
pub fn to_json(value: &impl Serialize) -> String {
    let mut v = serde_json::to_value(value).expect("value serializes");
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

/// Compact single-line variant of [`to_json`], without the newline.
pub fn to_json_compact(value: &impl Serialize) -> String {
    let mut v = serde_json::to_value(value).expect("value serializes");
    round_json(&mut v);
    serde_json::to_string(&v).expect("value serializes")
}
