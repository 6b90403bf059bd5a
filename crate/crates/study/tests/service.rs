use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dissent_core::Explanation;
use dissent_study::bundle::BUNDLE_SCHEMA_VERSION;
use dissent_study::{router, AppState, SessionStore, StudyBundle, StudyInstance};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn exp(id: &str, label: u8) -> Explanation {
    let w = if label == 1 { 0.4 } else { -0.4 };
    Explanation {
        example_id: id.into(),
        model_fingerprint: "m".into(),
        predicted_label: label,
        k: 15,
        intercept: 0.0,
        attributions: vec![(0, w), (1, -w / 2.0)],
    }
}

/// Four items: f wrong on the first two; g contradicts f everywhere.
fn bundle() -> StudyBundle {
    let truth = [1, 0, 1, 0];
    let f = [0, 1, 1, 0];
    let instances = (0..4)
        .map(|i| {
            let id = format!("r{i}");
            StudyInstance {
                example_id: id.clone(),
                display_text: "The room was clean and the staff friendly.".into(),
                true_label: truth[i],
                f_prediction: f[i],
                f_explanation: exp(&id, f[i]),
                g_prediction: 1 - f[i],
                g_explanation: exp(&id, 1 - f[i]),
                attention: false,
            }
        })
        .collect();
    StudyBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        instructions: "Decide which reviews are real.".into(),
        label_names: ["deceptive".into(), "real".into()],
        terms: [(0, "clean".into()), (1, "staff".into())].into(),
        instances,
    }
}

fn app(dir: &tempfile::TempDir, b: StudyBundle) -> Router {
    let store = SessionStore::open(dir.path().join("answers.jsonl"), b.len()).unwrap();
    router(AppState::new(b, store), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn session(app: &Router, condition: &str) -> String {
    let (s, v) = call(app, "POST", "/sessions", Some(json!({ "condition": condition }))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn full_session_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, bundle());
    let (s, meta) = call(&app, "GET", "/study", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(meta["total"], 4);

    let id = session(&app, "C2").await;
    let (s, item) = call(&app, "GET", &format!("/sessions/{id}/items/0"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(item["second_statement"], "Another model predicts that this review is real.");
    assert!(item.get("true_label").is_none());

    let (s, _) = call(&app, "GET", &format!("/sessions/{id}/results"), None).await;
    assert_eq!(s, StatusCode::TOO_EARLY);

    // Copy f everywhere.
    for (n, label) in [0, 1, 1, 0].into_iter().enumerate() {
        let (s, v) = call(&app, "POST", &format!("/sessions/{id}/items/{n}/answer"), Some(json!({ "label": label }))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
    }
    let (s, r) = call(&app, "GET", &format!("/sessions/{id}/results"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["accuracy"], 0.5);
    assert_eq!(r["overreliance"], 1.0);
    assert_eq!(r["kappa"], 1.0);
    assert_eq!(r["n_model_wrong"], 2);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, bundle());
    let id = session(&app, "C1").await;
    let answer = |n: &str| format!("/sessions/{id}/items/{n}/answer");

    assert_eq!(call(&app, "GET", "/sessions/nope/items/0", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/items/4"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/items/x"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/nope/results", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "POST", &answer("9"), Some(json!({ "label": 1 }))).await.0, StatusCode::NOT_FOUND);

    assert_eq!(call(&app, "POST", &answer("0"), Some(json!({ "label": 2 }))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, "POST", &answer("0"), Some(json!({ "label": "1" }))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, "POST", &answer("0"), Some(json!({}))).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(call(&app, "POST", &answer("0"), None).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "condition": "C9" }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    assert_eq!(call(&app, "POST", &answer("0"), Some(json!({ "label": 1 }))).await.0, StatusCode::OK);
    let (s, v) = call(&app, "POST", &answer("0"), Some(json!({ "label": 0 }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("already answered"));
}

#[tokio::test]
async fn c2_needs_dissent() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = bundle();
    b.instances[0].g_prediction = b.instances[0].f_prediction;
    let app = app(&dir, b);
    let (s, _) = call(&app, "POST", "/sessions", Some(json!({ "condition": "C2" }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    session(&app, "C0").await;
}

#[tokio::test]
async fn attention_items_are_not_scored() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = bundle();
    b.insert_attention_check(2, "check", "Please answer real for this item.", 1).unwrap();
    let app = app(&dir, b);
    let id = session(&app, "C3").await;
    let (_, item) = call(&app, "GET", &format!("/sessions/{id}/items/2"), None).await;
    assert_eq!(item["spans"], json!([]));
    // Truth on scored items, the wrong answer on the check.
    for (n, label) in [1, 0, 0, 1, 0].into_iter().enumerate() {
        call(&app, "POST", &format!("/sessions/{id}/items/{n}/answer"), Some(json!({ "label": label }))).await;
    }
    let (_, r) = call(&app, "GET", &format!("/sessions/{id}/results"), None).await;
    assert_eq!(r["n_items"], 5);
    assert_eq!(r["n_scored"], 4);
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["overreliance"], 0.0);
}

#[tokio::test]
async fn restart_keeps_answers() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(&dir, bundle());
    let id = session(&first, "C0").await;
    call(&first, "POST", &format!("/sessions/{id}/items/0/answer"), Some(json!({ "label": 1 }))).await;
    drop(first);

    let second = app(&dir, bundle());
    let (s, _) = call(&second, "POST", &format!("/sessions/{id}/items/0/answer"), Some(json!({ "label": 1 }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&second, "POST", &format!("/sessions/{id}/items/1/answer"), Some(json!({ "label": 0 }))).await;
    assert_eq!(s, StatusCode::OK);
    let log = std::fs::read_to_string(dir.path().join("answers.jsonl")).unwrap();
    let lines: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["n"], 0);
    assert_eq!(lines[2]["label"], 0);
    assert!(lines[2]["ts"].as_str().unwrap().ends_with('Z'));
}
