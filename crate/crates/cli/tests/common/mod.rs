//! Helpers shared by the cli crate's integration tests.

#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use glassbox::{schemas, ServiceConfig, Workbench};

pub fn workbench(root: &Path) -> Arc<Workbench> {
    let config = ServiceConfig {
        workers: 2,
        lime_samples: 300,
        ..ServiceConfig::default()
    };
    Workbench::open(root, config).unwrap()
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

/// Schema violations of `value`, empty when it conforms.
pub fn violations(schema_name: &str, value: &Value) -> Vec<String> {
    let text = schemas::schema(schema_name).unwrap_or_else(|| panic!("no schema {schema_name}"));
    let schema: Value = serde_json::from_str(text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(value).map(|e| format!("{schema_name}: {e} at {}", e.instance_path())).collect()
}

pub fn assert_schema(schema_name: &str, value: &Value) {
    let v = violations(schema_name, value);
    assert!(v.is_empty(), "{v:#?}\n{value:#}");
}

/// Polls a job until it leaves the queue or `limit` passes.
pub async fn wait_job(app: &Router, id: &str, limit: Duration) -> Value {
    let start = Instant::now();
    loop {
        let (status, job) = call(app, "GET", &format!("/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{job}");
        let state = job["state"].as_str().unwrap().to_string();
        if state == "done" || state == "error" || start.elapsed() > limit {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}
