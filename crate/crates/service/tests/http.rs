use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use ferrovia_core::session::SessionEnvelope;
use ferrovia_core::trial::MetricsReport;
use ferrovia_core::{ActKind, ClosingReason, DialogueEvent};
use ferrovia_service::{router, AppState, ErrorBody, Health};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => request
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn create(app: &Router, options: Option<Value>) -> SessionEnvelope {
    let (status, body) = call(app, Method::POST, "/v1/sessions", options).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

async fn say(app: &Router, id: &str, input: Value) -> SessionEnvelope {
    let (status, body) = call(app, Method::POST, &format!("/v1/sessions/{id}/utterances"), Some(input)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

#[tokio::test]
async fn health_reports_schema_and_sessions() {
    let app = router(AppState::default());
    create(&app, None).await;
    let (status, body) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    let health: Health = serde_json::from_slice(&body).unwrap();
    assert_eq!(health.schema_version, "1");
    assert_eq!(health.sessions, 1);
}

#[tokio::test]
async fn substitution_repair_over_http() {
    let app = router(AppState::default());
    let env = create(&app, None).await;
    assert!(env.text.starts_with("Automatic Railway Information System"));
    let id = env.session_id;
    let env = say(
        &app,
        &id,
        json!({"text": "to Roma", "corrupt": {"kind": "substitute", "from": "ROMA", "to": "ARONA"}}),
    )
    .await;
    assert_eq!(env.text, "To Arona. What is your point of departure?");
    let env = say(&app, &id, json!({"text": "I said Roma"})).await;
    assert!(matches!(env.state.last_event, Some(DialogueEvent::ImplicatureRepair { .. })));
    assert_eq!(env.text, "Are you going to Roma?");
    let env = say(&app, &id, json!({"text": "yes"})).await;
    let arrival = env.state.slots.iter().find(|r| r.slot == ferrovia_core::Slot::ArrivalCity).unwrap();
    assert_eq!(arrival.status, ferrovia_core::SlotStatus::Confirmed(ferrovia_core::Value::new("ROMA")));
}

#[tokio::test]
async fn get_is_read_only_and_post_increments_turn() {
    let app = router(AppState::default());
    let id = create(&app, None).await.session_id;
    let uri = format!("/v1/sessions/{id}");
    let a = call(&app, Method::GET, &uri, None).await;
    let b = call(&app, Method::GET, &uri, None).await;
    let c = call(&app, Method::GET, &uri, None).await;
    assert_eq!(a, b);
    assert_eq!(b, c);
    let before: SessionEnvelope = serde_json::from_slice(&a.1).unwrap();
    let after = say(&app, &id, json!({"frame": {"departure-city": "MILANO", "arrival-city": "ROMA"}})).await;
    assert_eq!(after.turn, before.turn + 1);
    let trace = after.state.last_trace.as_ref().unwrap();
    assert_eq!(trace.turn, after.turn);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = router(AppState::new(1));
    let id = create(&app, None).await.session_id;

    let (status, body) = call(&app, Method::POST, "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let err: ErrorBody = serde_json::from_slice(&body).unwrap();
    assert_eq!(err.error, "capacity_exceeded");

    let (status, _) = call(&app, Method::GET, "/v1/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let bad = json!({"frame": {"arrival-city": "TOMORROW"}});
    let (status, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/utterances"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/utterances"), Some(json!({"bogus": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let env = say(&app, &id, json!({"text": "blah blah"})).await;
    assert!(matches!(env.act.kind, ActKind::InformNonUnderstandingAndRequest { .. }));

    let (status, body) = call(&app, Method::DELETE, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let closed: SessionEnvelope = serde_json::from_slice(&body).unwrap();
    assert_eq!(closed.closed, Some(ClosingReason::HungUp));
    let (status, _) = call(&app, Method::GET, &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    create(&app, None).await;
}

#[tokio::test]
async fn closed_session_rejects_posts() {
    let app = router(AppState::default());
    let id = create(&app, None).await.session_id;
    say(&app, &id, json!({"text": "from Milano to Roma in the evening at eight"})).await;
    say(&app, &id, json!({"text": "yes"})).await;
    let env = say(&app, &id, json!({"text": "yes"})).await;
    assert_eq!(env.closed, Some(ClosingReason::Served));
    let (status, body) = call(&app, Method::POST, &format!("/v1/sessions/{id}/utterances"), Some(json!({"text": "yes"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let err: ErrorBody = serde_json::from_slice(&body).unwrap();
    assert_eq!(err.error, "closed_session");
}

#[tokio::test]
async fn forced_failure_session() {
    let app = router(AppState::default());
    let id = create(&app, Some(json!({"p_fail": 1.0}))).await.session_id;
    for _ in 0..5 {
        let env = say(&app, &id, json!({"text": "from Milano to Roma"})).await;
        assert_eq!(env.state.last_event, Some(DialogueEvent::NonUnderstanding));
    }
}

#[tokio::test]
async fn transcript_is_json_lines() {
    let app = router(AppState::default());
    let id = create(&app, None).await.session_id;
    say(&app, &id, json!({"text": "from Milano to Roma"})).await;
    let (status, body) = call(&app, Method::GET, &format!("/v1/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(body).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["speaker"], "user");
    assert_eq!(lines[1]["event"]["kind"], "new_info");
}

#[tokio::test]
async fn trials_run_over_http() {
    let app = router(AppState::default());
    let (status, body) = call(&app, Method::POST, "/v1/trials", Some(json!({"n": 24, "channel": "noiseless"}))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let report: MetricsReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(report.successes, 24);
    let (status, _) = call(&app, Method::POST, "/v1/trials", Some(json!({"n": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::POST, "/v1/trials", Some(json!({"n": 5, "channel": "loud"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn concurrent_sessions_stay_isolated() {
    let app = router(AppState::default());
    let a = create(&app, None).await.session_id;
    let b = create(&app, None).await.session_id;
    let (ra, rb) = tokio::join!(
        say(&app, &a, json!({"text": "from Milano to Roma"})),
        say(&app, &b, json!({"text": "from Pisa Aeroporto"}))
    );
    assert_eq!(ra.text, "Do you want to travel from Milano to Roma?");
    assert_eq!(rb.text, "From Pisa Aeroporto. Where are you going to?");
    let (_, body) = call(&app, Method::GET, &format!("/v1/sessions/{a}"), None).await;
    let again: SessionEnvelope = serde_json::from_slice(&body).unwrap();
    assert_eq!(again, ra);
}
