//! Drives the annotation API in process: one coder works through a small
//! queue, then the store is reopened from its log.
//!
//! cargo run -p vocalcode-service --example annotation_session

use std::f64::consts::TAU;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vocalcode::audio_io::write_wav;
use vocalcode::{AudioBuffer, Segment};
use vocalcode_service::api::{router, AnalysisSources, AppState};
use vocalcode_service::audio::AudioLibrary;
use vocalcode_service::store::Store;

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (u16, Value) {
    let builder = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = builder.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let is_wav = res.headers().get("content-type").is_some_and(|v| v == "audio/wav");
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if is_wav { json!({"wav_bytes": bytes.len()}) } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn app(dir: &std::path::Path, segments: &[Segment]) -> Router {
    router(AppState {
        store: Arc::new(Store::open(dir.join("annotations.jsonl"), 4).unwrap()),
        library: Arc::new(AudioLibrary::new(segments, dir)),
        analysis: Arc::new(AnalysisSources { segments: segments.to_vec(), f0: vec![], groups_csv: None }),
    })
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let sr = 16_000u32;
    let samples = (0..sr * 2).map(|i| (0.4 * (TAU * 350.0 * i as f64 / sr as f64).sin()) as f32).collect();
    write_wav(&AudioBuffer::new(samples, sr).unwrap(), dir.path().join("baby01.wav")).unwrap();
    let segments: Vec<Segment> = (0..4)
        .map(|i| Segment {
            id: format!("baby01_{i:05}"),
            source: "baby01".into(),
            start_ms: 450.0 * i as f64,
            end_ms: 450.0 * i as f64 + 300.0,
        })
        .collect();

    let api = app(dir.path(), &segments);
    let (status, created) = send(
        &api,
        "POST",
        "/sessions",
        Some(json!({"session_id": "demo", "coder_id": "coder-1", "queue": {"n_duplicates": 1, "rng_seed": 7}})),
    )
    .await;
    println!("create -> {status} {created}");

    for class in [1, 4, 5] {
        let (_, next) = send(&api, "GET", "/sessions/demo/next", None).await;
        let item = next["queue_item_id"].as_str().unwrap().to_string();
        for _ in 0..2 {
            let (status, clip) = send(&api, "POST", &format!("/sessions/demo/items/{item}/play"), None).await;
            println!("play {item} -> {status} {clip}");
        }
        let (status, ack) =
            send(&api, "POST", &format!("/sessions/demo/items/{item}/label"), Some(json!({"class": class}))).await;
        println!("label {item} as {class} -> {status} {ack}");
    }
    let (status, err) = send(&api, "POST", "/sessions/demo/items/item-000000/label", Some(json!({"class": 2}))).await;
    println!("relabel -> {status} {err}");
    drop(api);

    // A fresh store rebuilds the session from the log alone.
    let api = app(dir.path(), &segments);
    println!("after reopen next -> {}", send(&api, "GET", "/sessions/demo/next", None).await.1);
    println!("stats -> {}", send(&api, "GET", "/sessions/demo/stats", None).await.1);
}
