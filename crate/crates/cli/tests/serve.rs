use axum::body::Body;
use axum::http::{Request, StatusCode};
use ed_predict_cli::serve::router;
use ed_predict_cli::CardStore;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn zero_record() -> Value {
    serde_json::from_str(include_str!("fixtures/zero_record.json")).unwrap()
}

async fn call(req: Request<Body>) -> (StatusCode, String) {
    let resp = router(CardStore::bundled()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn post(body: &Value) -> Request<Body> {
    Request::post("/api/v1/predict")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn predict_zero_record() {
    let (status, body) = call(post(&json!({"model": "ed-1y", "record": zero_record()}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    let eta: f64 = -2.081;
    let p = 1.0 / (1.0 + (-eta).exp());
    assert!((v["p_retained"].as_f64().unwrap() - p).abs() < 1e-9);
    assert!((v["p_retained"].as_f64().unwrap() - 0.1110).abs() < 5e-5);
    assert_eq!(v["calibration_applied"], false);
    assert_eq!(v["horizon_months"], 12);
    assert_eq!(v["points"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn predict_with_calibration() {
    let (_, plain) = call(post(&json!({"model": "ed-1y", "record": zero_record()}))).await;
    let (status, body) =
        call(post(&json!({"model": "ed-1y", "record": zero_record(), "apply_calibration": true}))).await;
    assert_eq!(status, StatusCode::OK);
    let a: Value = serde_json::from_str(&plain).unwrap();
    let b: Value = serde_json::from_str(&body).unwrap();
    let shift = b["eta"].as_f64().unwrap() - a["eta"].as_f64().unwrap();
    assert!((shift - 0.05485955).abs() < 1e-8, "{shift}");
    assert_eq!(b["calibration_applied"], true);
}

#[tokio::test]
async fn models_lists_both_cards() {
    let (status, body) = call(get("/api/v1/models")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    let by_name: Vec<(String, u64)> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|m| (m["name"].as_str().unwrap().to_string(), m["horizon_months"].as_u64().unwrap()))
        .collect();
    assert!(by_name.contains(&("ed-1y".into(), 12)));
    assert!(by_name.contains(&("ed-2y".into(), 24)));
    let one = v.as_array().unwrap().iter().find(|m| m["name"] == "ed-1y").unwrap();
    let quality = one["variables"].as_array().unwrap().iter().find(|t| t["name"] == "erection_quality_baseline").unwrap();
    assert!(quality["max_code"].as_i64().unwrap() < 9);
    assert!(!quality["labels"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn out_of_range_code_is_400() {
    let mut record = zero_record();
    record["erection_quality_baseline"] = json!(9);
    let (status, body) = call(post(&json!({"model": "ed-1y", "record": record}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"]["kind"], "OutOfRangeCode");
    assert_eq!(v["error"]["field"], "erection_quality_baseline");
}

#[tokio::test]
async fn missing_field_and_bad_body() {
    let mut record = zero_record();
    record.as_object_mut().unwrap().remove("diabetes");
    let (status, body) = call(post(&json!({"model": "ed-1y", "record": record}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"]["kind"], "MissingField");
    assert_eq!(v["error"]["field"], "diabetes");

    let req = Request::post("/api/v1/predict")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let (status, body) = call(req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body.contains("InvalidInput"));
}

#[tokio::test]
async fn unknown_model_is_404() {
    let (status, body) = call(post(&json!({"model": "ed-5y", "record": zero_record()}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body.contains("UnknownModel"));
    // a file path is not a model name over HTTP
    let (status, _) = call(post(&json!({"model": "/etc/passwd", "record": {}}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(get("/api/v1/nomogram/nope")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn nomogram_and_health() {
    let (status, body) = call(get("/api/v1/nomogram/ed-2y")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v.is_object());
    let (status, body) = call(get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, "ok");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let app = router(CardStore::bundled());
    let body = json!({"model": "ed-2y", "record": {
        "treatment_group": 2, "erection_quality_baseline": 3, "erection_frequency_baseline": 2,
        "isup_grade_group": 3, "tumor_t_stage": 2, "charlson_simplified": 1, "hormone_therapy": 1,
        "diabetes": 1, "abd_pelvic_rectal_pain": 2,
    }});
    let handles: Vec<_> = (0..32)
        .map(|_| {
            let app = app.clone();
            let req = post(&body);
            tokio::spawn(async move {
                let resp = app.oneshot(req).await.unwrap();
                assert_eq!(resp.status(), StatusCode::OK);
                resp.into_body().collect().await.unwrap().to_bytes()
            })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        bodies.push(h.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
