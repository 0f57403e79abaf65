use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vocalcode::audio_io::{decode_wav_bytes, write_wav};
use vocalcode::{AudioBuffer, Segment};
use vocalcode_service::api::{router, AnalysisSources, AppState};
use vocalcode_service::audio::AudioLibrary;
use vocalcode_service::store::Store;

const SEGMENTS: usize = 6;

fn fixture(dir: &Path) -> Vec<Segment> {
    let sr = 8_000;
    let samples = (0..sr * 3).map(|i| (0.3 * (TAU * 220.0 * i as f64 / sr as f64).sin()) as f32).collect();
    write_wav(&AudioBuffer::new(samples, sr as u32).unwrap(), dir.join("rec.wav")).unwrap();
    (0..SEGMENTS)
        .map(|i| Segment {
            id: format!("rec_{i:05}"),
            source: "rec".into(),
            start_ms: i as f64 * 400.0,
            end_ms: i as f64 * 400.0 + 250.0,
        })
        .collect()
}

fn app(dir: &Path, segments: &[Segment]) -> Router {
    let store = Store::open(dir.join("log.jsonl"), 3).unwrap();
    std::fs::write(dir.join("groups.csv"), "recording_id,sex\nrec,f\n").unwrap();
    router(AppState {
        store: Arc::new(store),
        library: Arc::new(AudioLibrary::new(segments, dir)),
        analysis: Arc::new(AnalysisSources {
            segments: segments.to_vec(),
            f0: vec![],
            groups_csv: Some(dir.join("groups.csv")),
        }),
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let remaining = res.headers().get("x-remaining-plays").map(|v| v.to_str().unwrap().to_string());
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, remaining)
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes, _) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn start(app: &Router, id: &str, coder: &str) -> Value {
    let (status, v) = json_call(
        app,
        "POST",
        "/sessions",
        Some(json!({"session_id": id, "coder_id": coder, "queue": {"n_duplicates": 2, "rng_seed": 11}})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v
}

async fn current(app: &Router, id: &str) -> String {
    let (_, v) = json_call(app, "GET", &format!("/sessions/{id}/next"), None).await;
    v["queue_item_id"].as_str().expect("session has a current item").to_string()
}

#[tokio::test]
async fn play_budget_and_sequencing_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &fixture(dir.path()));
    let created = start(&app, "s1", "coder-a").await;
    assert_eq!(created["total_items"], SEGMENTS + 2);

    let item = current(&app, "s1").await;
    assert_eq!(item, "item-000000");
    let label_uri = format!("/sessions/s1/items/{item}/label");
    let (status, err) = json_call(&app, "POST", &label_uri, Some(json!({"class": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "out_of_sequence");

    let play_uri = format!("/sessions/s1/items/{item}/play");
    for expected in ["2", "1", "0"] {
        let (status, bytes, remaining) = call(&app, "POST", &play_uri, None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(remaining.as_deref(), Some(expected));
        let clip = decode_wav_bytes(&bytes).unwrap();
        assert_eq!(clip.len(), 2000);
    }
    let (status, err) = json_call(&app, "POST", &play_uri, None).await;
    assert_eq!(status, StatusCode::TOO_MANY_REQUESTS);
    assert_eq!(err["code"], "play_budget_exhausted");

    let (status, _) = json_call(&app, "POST", "/sessions/s1/items/item-000003/play", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = json_call(&app, "POST", &label_uri, Some(json!({"class": 9}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, err) = json_call(&app, "POST", &label_uri, Some(json!({"klass": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "bad_request");
    let (status, err) = json_call(&app, "GET", "/sessions/nope/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_session");

    let (status, ack) = json_call(&app, "POST", &label_uri, Some(json!({"class": 5}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["next"]["queue_item_id"], "item-000001");
    let (status, _) = json_call(&app, "POST", &label_uri, Some(json!({"class": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn responses_do_not_reveal_segments_or_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &fixture(dir.path()));
    let (_, created, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"session_id": "s", "coder_id": "c", "queue": {"n_duplicates": 2, "rng_seed": 1}})),
    )
    .await;
    let mut seen = vec![created];
    for _ in 0..SEGMENTS + 2 {
        let (_, next, _) = call(&app, "GET", "/sessions/s/next", None).await;
        let item = serde_json::from_slice::<Value>(&next).unwrap()["queue_item_id"].as_str().unwrap().to_string();
        seen.push(next);
        call(&app, "POST", &format!("/sessions/s/items/{item}/play"), None).await;
        let (_, ack, _) = call(&app, "POST", &format!("/sessions/s/items/{item}/label"), Some(json!({"class": 1}))).await;
        seen.push(ack);
    }
    let (_, done, _) = call(&app, "GET", "/sessions/s/next", None).await;
    let done_json: Value = serde_json::from_slice(&done).unwrap();
    assert_eq!(done_json["done"], true);
    assert_eq!(done_json["labeled"], SEGMENTS + 2);
    seen.push(done);
    seen.push(call(&app, "GET", "/sessions/s/stats", None).await.1);
    for body in seen {
        let text = String::from_utf8(body).unwrap();
        assert!(!text.contains("rec_"), "{text}");
        assert!(!text.contains("duplicate"), "{text}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_share_the_last_play() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &fixture(dir.path()));
    start(&app, "s", "c").await;
    let item = current(&app, "s").await;
    let uri = format!("/sessions/s/items/{item}/play");
    for _ in 0..2 {
        assert_eq!(call(&app, "POST", &uri, None).await.0, StatusCode::OK);
    }
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move { call(&app, "POST", &uri, None).await.0 })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::TOO_MANY_REQUESTS).count(), 7);
}

#[tokio::test]
async fn restart_resumes_at_the_same_item_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let segments = fixture(dir.path());
    {
        let app = app(dir.path(), &segments);
        start(&app, "s", "c").await;
        for class in [1, 4] {
            let item = current(&app, "s").await;
            call(&app, "POST", &format!("/sessions/s/items/{item}/play"), None).await;
            call(&app, "POST", &format!("/sessions/s/items/{item}/label"), Some(json!({"class": class}))).await;
        }
        let item = current(&app, "s").await;
        call(&app, "POST", &format!("/sessions/s/items/{item}/play"), None).await;
        call(&app, "POST", &format!("/sessions/s/items/{item}/play"), None).await;
    }
    let app = app(dir.path(), &segments);
    let (_, next) = json_call(&app, "GET", "/sessions/s/next", None).await;
    assert_eq!(next["queue_item_id"], "item-000002");
    assert_eq!(next["remaining_plays"], 1);
    let (_, stats) = json_call(&app, "GET", "/sessions/s/stats", None).await;
    assert_eq!(stats["labeled"], 2);
    assert_eq!(stats["plays"], 4);
    // Creating the same session again resumes it.
    let (status, again) = json_call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"session_id": "s", "coder_id": "c", "queue": {"n_duplicates": 2, "rng_seed": 11}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["created"], false);
}

#[tokio::test]
async fn reports_over_two_coders() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &fixture(dir.path()));
    for (session, coder) in [("sa", "a"), ("sb", "b")] {
        start(&app, session, coder).await;
        let mut n = 0;
        loop {
            let (_, next) = json_call(&app, "GET", &format!("/sessions/{session}/next"), None).await;
            let Some(item) = next["queue_item_id"].as_str() else { break };
            call(&app, "POST", &format!("/sessions/{session}/items/{item}/play"), None).await;
            let class = if coder == "b" && n == 0 { 4 } else { 1 + n % 2 };
            call(&app, "POST", &format!("/sessions/{session}/items/{item}/label"), Some(json!({"class": class}))).await;
            n += 1;
        }
    }
    let (status, rel) = json_call(&app, "GET", "/reports/reliability?a=a&b=b&exclude_class=5", None).await;
    assert_eq!(status, StatusCode::OK, "{rel}");
    assert_eq!(rel["compared"], SEGMENTS);
    assert!(rel["kappa"]["kappa"].as_f64().unwrap() <= 1.0);

    let (status, body) = json_call(&app, "GET", "/reports/analytics?metric=duration&group_by=sex", None).await;
    // Every recording belongs to one group, so the comparison is refused.
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert!(body["message"].as_str().unwrap().contains("exactly two groups"));
    let (status, _) = json_call(&app, "GET", "/reports/analytics?metric=loudness&group_by=sex", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
