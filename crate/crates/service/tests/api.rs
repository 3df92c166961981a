mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use linkrisk_core::corpus::PrivacyDictionary;
use linkrisk_service::snapshot::Snapshot;
use linkrisk_service::{router, AppState, Config};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_in(cache: &std::path::Path) -> Router {
    let cfg = Config {
        cache_dir: cache.to_path_buf(),
        ..Config::default()
    };
    let snapshot = Snapshot::new(common::corpus()).unwrap();
    router(Arc::new(AppState::new(
        cfg,
        snapshot,
        PrivacyDictionary::default_preset(),
    )))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn wait_for_grouping(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (status, body) = call(app, Method::GET, &format!("/groupings/{id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        if body["status"] != "running" {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("grouping {id} never finished");
}

#[tokio::test]
async fn corpus_filters() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let (status, all) = call(&app, Method::GET, "/corpus", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all.as_array().unwrap().len(), 8);
    let (_, police) = call(
        &app,
        Method::GET,
        "/corpus?tags=Police&granularity=individual",
        None,
    )
    .await;
    let ids: Vec<&str> = police
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["arrests", "field_interviews", "traffic_citations"]);
    let (status, err) = call(&app, Method::GET, "/corpus?granularity=weekly", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "InvalidFilter");
    let (_, session) = call(&app, Method::GET, "/session", None).await;
    // a rejected query leaves the previous filters in place
    assert_eq!(session["filters"]["granularity"], "Individual");
    assert_eq!(session["filters"]["tags"], json!(["police"]));
}

#[tokio::test]
async fn seven_ids_give_21_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let ids = [
        "arrests",
        "field_interviews",
        "lead_program",
        "traffic_citations",
        "building_permits",
        "inspections",
        "budget",
    ];
    let (status, body) = call(
        &app,
        Method::POST,
        "/pairs",
        Some(json!({ "dataset_ids": ids })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let pairs = body["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 21);
    assert_eq!(
        (pairs[0]["a"].as_str(), pairs[0]["b"].as_str()),
        (Some("arrests"), Some("field_interviews"))
    );
    assert_eq!(pairs[0]["risk"], 152.0);

    let (status, err) = call(
        &app,
        Method::POST,
        "/pairs",
        Some(json!({ "dataset_ids": ["arrests", "nope"] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "UnknownDataset");
}

#[tokio::test]
async fn join_rejects_key_missing_from_b() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let req = json!({ "a": "arrests", "b": "lead_program", "key": ["age", "location"] });
    let (status, err) = call(&app, Method::POST, "/join", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "InvalidKey");
    assert!(err["message"].as_str().unwrap().contains("location"));

    let (status, err) = call(&app, Method::POST, "/join", Some(json!({ "a": "arrests" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "InvalidBody");
}

#[tokio::test]
async fn join_then_record_detail() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let key = ["age", "sex", "race", "date", "location"];
    let req = json!({ "a": "arrests", "b": "field_interviews", "key": key });
    let (status, body) = call(&app, Method::POST, "/join", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["outcome"]["match_count"], 1);
    assert_eq!(body["suggestions"], Value::Null);
    let m = &body["outcome"]["matches"][0];
    assert_eq!(
        (m["row_index_a"].as_u64(), m["row_index_b"].as_u64()),
        (
            Some(common::PLANTED_A as u64),
            Some(common::PLANTED_B as u64)
        )
    );

    let id = body["id"].as_str().unwrap();
    let (status, detail) = call(&app, Method::GET, &format!("/join/{id}/match/0"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(detail["full_row_a"][5], json!(["charge", "trespass"]));
    assert_eq!(detail["full_row_b"][5], json!(["reason", "stop"]));
    let (status, err) = call(&app, Method::GET, &format!("/join/{id}/match/4"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "MatchOutOfRange");
    let (status, _) = call(&app, Method::GET, "/join/unknown/match/0", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // same request, same id
    let (_, again) = call(&app, Method::POST, "/join", Some(req)).await;
    assert_eq!(again["id"], body["id"]);

    let (_, pairs) = call(
        &app,
        Method::POST,
        "/pairs",
        Some(json!({ "dataset_ids": ["field_interviews", "arrests"] })),
    )
    .await;
    assert_eq!(pairs["pairs"][0]["last_used_key"], json!(key));
}

#[tokio::test]
async fn wide_join_returns_suggestions() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let req = json!({ "a": "arrests", "b": "field_interviews", "key": ["sex"] });
    let (status, body) = call(&app, Method::POST, "/join", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let count = body["outcome"]["match_count"].as_u64().unwrap();
    assert!(count > 2);
    let ribbons_total: u64 = body["outcome"]["stacks"][0]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["count"].as_u64().unwrap())
        .sum();
    assert_eq!(ribbons_total, count);
    let from_a = body["suggestions"]["from_a"].as_array().unwrap();
    assert!(!from_a.is_empty() && from_a.len() <= 5);
}

#[tokio::test]
async fn vulnerability_and_relevance() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let (status, prof) = call(&app, Method::GET, "/datasets/arrests/vulnerability", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(prof["threshold"], 4);
    assert!(prof["vulnerable"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["c"].as_u64().unwrap() <= 4));

    let (status, err) = call(&app, Method::GET, "/datasets/budget/vulnerability", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "NoPrivacyAttributes");
    let (status, _) = call(&app, Method::GET, "/datasets/missing/vulnerability", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, rel) = call(
        &app,
        Method::POST,
        "/relevance",
        Some(json!({ "vulnerable_id": "arrests" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{rel}");
    let ranking = rel["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 7);
    let scores: Vec<f64> = ranking
        .iter()
        .map(|r| r["score"].as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(rel["vulnerable"][0]["v"], "native");
    assert_eq!(
        (
            ranking[0]["dataset_id"].as_str(),
            ranking[0]["score"].as_f64()
        ),
        (Some("field_interviews"), Some(1.0))
    );
    assert_eq!(ranking.last().unwrap()["score"], 0.0);
}

#[tokio::test]
async fn dictionary_edit_makes_grouping_stale() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let (status, started) =
        call(&app, Method::POST, "/groupings", Some(json!({ "seed": 7 }))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{started}");
    let id = started["id"].as_str().unwrap().to_string();
    let (_, again) = call(&app, Method::POST, "/groupings", Some(json!({ "seed": 7 }))).await;
    assert_eq!(again["id"], started["id"]);

    let done = wait_for_grouping(&app, &id).await;
    assert_eq!(done["status"], "done", "{done}");
    assert!(!done["result"]["groups"].as_array().unwrap().is_empty());

    let (status, dict) = call(
        &app,
        Method::PUT,
        "/dictionary",
        Some(json!({ "attributes": ["age", "sex", "victim_age"] })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(dict["version"].as_u64().unwrap() > started["dictionary_version"].as_u64().unwrap());
    let (status, err) = call(&app, Method::GET, &format!("/groupings/{id}"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "StaleDictionary");

    let (status, err) = call(
        &app,
        Method::PUT,
        "/dictionary",
        Some(json!({ "attributes": ["!!"] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "InvalidAttributeName");
    let (status, _) = call(&app, Method::GET, "/groupings/doesnotexist", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn grouping_errors_surface_as_failed_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path());
    let (status, started) = call(
        &app,
        Method::POST,
        "/groupings",
        Some(json!({ "dataset_ids": ["arrests", "budget"] })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let done = wait_for_grouping(&app, started["id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "failed");
    assert_eq!(done["error"]["code"], "TooFewDatasets");
}

#[tokio::test]
async fn snapshot_round_trip_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.json");
    let snapshot = Snapshot::new(common::corpus()).unwrap();
    snapshot.save(&path).unwrap();
    let reloaded = Snapshot::load(&path).unwrap();
    assert_eq!(reloaded.id(), snapshot.id());

    let mut results = Vec::new();
    for (i, snap) in [snapshot, reloaded].into_iter().enumerate() {
        let cfg = Config {
            cache_dir: dir.path().join(format!("cache{i}")),
            ..Config::default()
        };
        let app = router(Arc::new(AppState::new(
            cfg,
            snap,
            PrivacyDictionary::default_preset(),
        )));
        let (_, started) = call(&app, Method::POST, "/groupings", None).await;
        let done = wait_for_grouping(&app, started["id"].as_str().unwrap()).await;
        let (_, pairs) = call(
            &app,
            Method::POST,
            "/pairs",
            Some(json!({ "dataset_ids": ["arrests", "lead_program", "payroll"] })),
        )
        .await;
        results.push((
            done["result"].to_string(),
            pairs.to_string(),
            started["id"].clone(),
        ));
    }
    assert_eq!(results[0], results[1]);
}

#[tokio::test]
async fn cached_grouping_is_reused_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let first = app_in(dir.path());
    let (_, started) = call(&first, Method::POST, "/groupings", None).await;
    let id = started["id"].as_str().unwrap().to_string();
    let done = wait_for_grouping(&first, &id).await;

    let second = app_in(dir.path());
    let (status, hit) = call(&second, Method::POST, "/groupings", None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(hit["status"], "done");
    assert_eq!(hit["result"], done["result"]);
}
