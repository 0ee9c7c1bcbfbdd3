use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use qpdesign_service::{router, ServeConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(method: &str, path: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let app = router(&ServeConfig::default());
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn post(path: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = call("POST", path, &body.to_string()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn oscillator_q() -> Value {
    json!({"n": 2, "m": 0, "a": [39.47841760435743, 0.0], "b": [-33.81318677463476], "tau": 0.12})
}

#[tokio::test]
async fn health_reports_version() {
    let (status, bytes) = call("GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn generic_mid_examples() {
    let (s, v) = post("/design/generic-mid", json!({"n":1,"m":0,"tau":1,"s0":0})).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["quasipolynomial"]["a"][0].as_f64().unwrap() + 1.0).abs() < 1e-10);
    assert!((v["quasipolynomial"]["b"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let (s, v) = post("/design/generic-mid", json!({"n":2,"m":0,"tau":1,"s0":0})).await;
    assert_eq!(s, StatusCode::OK);
    let a: Vec<f64> = serde_json::from_value(v["quasipolynomial"]["a"].clone()).unwrap();
    assert!((a[0] - 2.0).abs() < 1e-10 && (a[1] + 2.0).abs() < 1e-10);

    let (s, v) = post("/design/generic-mid", json!({"n":0,"m":0,"tau":1,"s0":0})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "bad_input");
}

#[tokio::test]
async fn crrid_examples() {
    let (s, a) = post("/design/generic-crrid", json!({"n":1,"m":0,"tau":1,"roots":[-1,-2]})).await;
    assert_eq!(s, StatusCode::OK);
    assert!((a["quasipolynomial"]["b"][0].as_f64().unwrap() - 0.21409).abs() < 1e-5);
    let (_, b) = post("/design/generic-crrid", json!({"n":1,"m":0,"tau":1,"roots":[-2,-1]})).await;
    assert_eq!(a, b);
    let (s, v) = post("/design/generic-crrid", json!({"n":1,"m":0,"tau":1,"roots":[-1]})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "bad_input");
}

#[tokio::test]
async fn control_mid_examples() {
    let (s, v) = post("/design/control-mid", json!({"n":2,"m":0,"a":[39.478,0],"given":{"tau":0.12}})).await;
    assert_eq!(s, StatusCode::OK);
    let first = &v[0];
    assert!((first["assigned_root"].as_f64().unwrap() + 2.859).abs() < 5e-3);
    assert!((first["quasipolynomial"]["b"][0].as_f64().unwrap() + 33.81).abs() < 5e-2);

    let (s, v) = post("/design/control-mid", json!({"n":2,"m":0,"a":[39.478,0],"given":{"tau":0.2}})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "no_admissible_point");

    let (s, v) = post("/design/control-mid", json!({"n":2,"m":0,"a":[39.478,0],"given":{"s0":-2.859}})).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v[0]["solved_parameter"].as_f64().unwrap() - 0.12).abs() < 1e-3);
}

#[tokio::test]
async fn admissibility_examples() {
    let body = json!({"n":2,"m":1,"a":[1,1],"s0_min":-10,"tau_max":3,"grid":[200,200]});
    let (s, v) = post("/admissibility", body).await;
    assert_eq!(s, StatusCode::OK);
    let max_tau = v["polylines"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|l| l.as_array().unwrap())
        .map(|p| p[1].as_f64().unwrap())
        .fold(f64::MIN, f64::max);
    assert!((max_tau - 1.6).abs() < 0.1, "{max_tau}");
    assert_eq!(v["grid"].as_array().unwrap().len(), 200 * 200);

    let (s, v) = post("/admissibility", json!({"n":2,"m":1,"a":[1,1],"s0_min":-10,"tau_max":-1})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "bad_input");
}

#[tokio::test]
async fn roots_sensitivity_and_simulation() {
    let triple = json!({"n":2,"m":0,"a":[2,-2],"b":[-2],"tau":1});
    let rect = json!({"x_min":-1,"x_max":1,"y_min":-1,"y_max":1});
    let (s, v) = post("/roots", json!({"q": triple, "rect": rect})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["roots"].as_array().unwrap().len(), 1);
    assert_eq!(v["roots"][0][2], 3);
    assert_eq!(v["winding_count"], 3);

    let near = json!({"x_min":-6,"x_max":-0.5,"y_min":-3,"y_max":3});
    let (s, v) = post("/sensitivity", json!({"q": oscillator_q(), "epsilon": 0.001, "K": 3, "rect": near})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["per_k"].as_object().unwrap().len(), 7);

    let (s, v) = post(
        "/simulate",
        json!({"q": oscillator_q(), "ic": {"constant": 1}, "T": 5, "steps": 1000}),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let y = v["y"].as_array().unwrap();
    assert!(y.last().unwrap().as_f64().unwrap().abs() < 0.1);
    assert_eq!(v["t"][0].as_f64().unwrap(), -0.12);
}

#[tokio::test]
async fn roots_with_dominance_check() {
    let rect = json!({"x_min":-500,"x_max":500,"y_min":-500,"y_max":500});
    let (s, v) = post("/roots", json!({"q": oscillator_q(), "rect": rect, "s0": -2.8592099477962956})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["dominance"]["dominant"], true);
}

#[tokio::test]
async fn malformed_json_is_400_and_schema_errors_422() {
    let (status, bytes) = call("POST", "/design/generic-mid", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["code"], "bad_input");

    let (s, v) = post("/design/generic-mid", json!({"n":"two"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "bad_input");
}

#[tokio::test]
async fn domain_errors_map_to_codes() {
    let q = json!({"n":1,"m":0,"a":[-800],"b":[0],"tau":1});
    let (s, v) = post("/simulate", json!({"q": q, "ic": {"constant": 1}, "T": 10, "steps": 100})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "blow_up");
    assert!(v["details"]["time"].as_f64().unwrap() > 0.0);

    let rect = json!({"x_min":-1,"x_max":1,"y_min":-1,"y_max":1});
    let (s, v) = post("/sensitivity", json!({"q": oscillator_q(), "epsilon": 0.1, "K": 2, "rect": rect})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_perturbation");
}

#[tokio::test]
async fn expired_deadline_is_408_with_progress() {
    let body = json!({"n":2,"m":1,"a":[1,1],"s0_min":-10,"tau_max":3,"grid":[4000,4000],"deadline_ms":1});
    let (s, v) = post("/admissibility", body).await;
    assert_eq!(s, StatusCode::REQUEST_TIMEOUT);
    assert_eq!(v["code"], "deadline_exceeded");
    assert!(v["details"]["total"].as_u64().is_some());
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let body = json!({"q": oscillator_q(), "rect": {"x_min":-100,"x_max":10,"y_min":-100,"y_max":100}}).to_string();
    let (_, a) = call("POST", "/roots", &body).await;
    let (_, b) = call("POST", "/roots", &body).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn report_bundles_design_roots_and_trajectory() {
    let body = json!({
        "design": {"mode": "control-mid", "n": 2, "m": 0, "a": [39.478, 0], "given": {"tau": 0.12}},
        "rect": {"x_min": -100, "x_max": 10, "y_min": -100, "y_max": 100},
        "simulation": {"ic": {"constant": 1}, "T": 2}
    });
    let (s, v) = post("/report", body).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["dominance"]["dominant"], true);
    assert!(v["trajectory"]["t"].as_array().unwrap().len() > 1000);
}
