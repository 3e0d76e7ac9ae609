mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{bowl, service};
use monobo_campaign::http::router;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn create_body() -> Value {
    json!({
        "name": "bowl",
        "dimensions": [
            {"label": "temperature", "unit": "C", "lower": 0.0, "upper": 5.0},
            {"label": "time", "lower": 0.0, "upper": 5.0}
        ],
        "target": 1.5,
        "declarations": [{"dim": 0, "direction": "decreasing"}],
        "algo": "bo_mg",
        "seed": 11
    })
}

#[tokio::test]
async fn full_session() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(service(dir.path())));

    let (s, created) = call_json(&app, "POST", "/campaigns", Some(create_body())).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    let (s, list) = call_json(&app, "GET", "/campaigns", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(list[0]["id"], id);

    for i in 0..5 {
        let (s, t) = call_json(&app, "POST", &format!("/campaigns/{id}/suggest"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(t["initial_design"], json!(i < 3));
        assert_eq!(t["labeled"][0]["unit"], "C");
        let x: Vec<f64> = serde_json::from_value(t["x"].clone()).unwrap();
        let body = json!({"ticket_id": t["id"], "y": bowl(&x)});
        let (s, v) = call_json(&app, "POST", &format!("/campaigns/{id}/observe"), Some(body.clone())).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["observations"], i + 1);

        let (s, e) = call_json(&app, "POST", &format!("/campaigns/{id}/observe"), Some(body)).await;
        assert_eq!(s, StatusCode::CONFLICT);
        assert_eq!(e["error"], "conflict");
    }

    let (s, view) = call_json(&app, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(view["history"].as_array().unwrap().len(), 5);

    let (s, csv) = call(&app, "GET", &format!("/campaigns/{id}/export?format=csv"), None).await;
    assert_eq!(s, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("t,temperature,time,y,g,best_g,alpha_or_beta,algo,seed\n"));
    assert_eq!(csv.lines().count(), 6);

    let (s, slice) = call_json(&app, "GET", &format!("/campaigns/{id}/slice?dim=0&resolution=7&fixed=1,2"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(slice["model_ready"], true);
    assert_eq!(slice["points"].as_array().unwrap().len(), 7);

    let (s, v) = call_json(&app, "PUT", &format!("/campaigns/{id}/config"), Some(json!({"num_candidates": 100}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["config"]["num_candidates"], 100);
}

#[tokio::test]
async fn error_responses_are_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(service(dir.path())));

    let mut bad = create_body();
    bad["dimensions"][0]["lower"] = json!(9.0);
    let (s, e) = call_json(&app, "POST", "/campaigns", Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"], "validation");
    assert_eq!(e["fields"][0]["field"], "dimensions[0].upper");

    let (s, e) = call_json(&app, "POST", "/campaigns", Some(json!({"name": 3}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["fields"][0]["field"], "body");

    let (s, e) = call_json(&app, "GET", "/campaigns/nosuch", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["error"], "not_found");
    let (s, _) = call_json(&app, "GET", "/campaigns/..%2Fetc", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, created) = call_json(&app, "POST", "/campaigns", Some(create_body())).await;
    let id = created["id"].as_str().unwrap();
    let (s, e) = call_json(&app, "GET", &format!("/campaigns/{id}/export?format=xml"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["error"], "unsupported_format");
    let (s, e) = call_json(&app, "GET", &format!("/campaigns/{id}/slice?dim=0&fixed=a,b"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["fields"][0]["field"], "fixed");
}
