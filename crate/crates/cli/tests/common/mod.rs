#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use psm_cli::http::router;
use psm_cli::store::Store;
use psm_core::session::{EventBody, RevisionPolicy};
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Api {
    pub router: Router,
    pub dir: tempfile::TempDir,
}

impl Api {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::new(dir.path(), RevisionPolicy::default()).unwrap());
        Api { router: router(store), dir }
    }

    pub async fn send(&self, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, Body::from))
            .unwrap();
        let response = self.router.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        let (status, text) = self.send("GET", uri, None).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        let (status, text) = self.send("POST", uri, Some(body.to_string())).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub async fn create(&self, id: &str) {
        let (status, body) = self.post("/sessions", json!({ "id": id })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
    }

    pub async fn submit(&self, id: &str, body: &EventBody) -> (StatusCode, Value) {
        let request = json!({ "kind": body.kind(), "actor": "facilitator", "payload": body.payload() });
        self.post(&format!("/sessions/{id}/events"), request).await
    }

    /// Opens a stream and returns a reader over its messages.
    pub async fn stream(&self, uri: &str, last_event_id: Option<u64>) -> SseReader {
        let mut builder = Request::builder().uri(uri);
        if let Some(last) = last_event_id {
            builder = builder.header("last-event-id", last.to_string());
        }
        let response = self.router.clone().oneshot(builder.body(Body::empty()).unwrap()).await.unwrap();
        assert_eq!(response.status(), StatusCode::OK);
        assert_eq!(response.headers()["content-type"], "text/event-stream");
        SseReader { body: response.into_body(), buffer: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: u64,
    pub data: Value,
}

pub struct SseReader {
    body: Body,
    buffer: String,
}

impl SseReader {
    /// Next event message, or `None` if nothing arrives within `wait`.
    pub async fn next(&mut self, wait: Duration) -> Option<Message> {
        loop {
            if let Some(end) = self.buffer.find("\n\n") {
                let block: String = self.buffer.drain(..end + 2).collect();
                let (mut id, mut data) = (None, None);
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("id:") {
                        id = Some(v.trim().parse().unwrap());
                    } else if let Some(v) = line.strip_prefix("data:") {
                        data = Some(serde_json::from_str(v.trim_start()).unwrap());
                    }
                }
                if let (Some(id), Some(data)) = (id, data) {
                    return Some(Message { id, data });
                }
                continue;
            }
            let frame = tokio::time::timeout(wait, self.body.frame()).await.ok()??.ok()?;
            if let Ok(bytes) = frame.into_data() {
                self.buffer.push_str(std::str::from_utf8(&bytes).unwrap());
            }
        }
    }

    pub async fn take(&mut self, n: usize) -> Vec<Message> {
        let mut out = Vec::new();
        while out.len() < n {
            match self.next(Duration::from_secs(5)).await {
                Some(m) => out.push(m),
                None => break,
            }
        }
        out
    }
}
