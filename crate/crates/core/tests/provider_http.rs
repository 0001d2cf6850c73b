use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};

use archivesearch_core::SystemClock;
use archivesearch_core::search_gateway::{
    search, BingProvider, FixtureProvider, ProviderRequest, SearchError, SearchProvider, SearchQuery,
};

type Seen = Arc<Mutex<Vec<(Option<String>, HashMap<String, String>)>>>;

async fn bing(
    State(seen): State<Seen>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> (StatusCode, Json<Value>) {
    let key = headers
        .get("Ocp-Apim-Subscription-Key")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    seen.lock().unwrap().push((key.clone(), q.clone()));
    if key.as_deref() != Some("secret") {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad key"})));
    }
    let offset: usize = q["offset"].parse().unwrap();
    let count: usize = q["count"].parse().unwrap();
    let value: Vec<Value> = (offset..offset + count)
        .map(|i| json!({"url": format!("https://example.org/{i}"), "name": format!("Page {i}"), "snippet": "s"}))
        .collect();
    (StatusCode::OK, Json(json!({"webPages": {"value": value}})))
}

async fn serve(seen: Seen) -> String {
    let app = Router::new().route("/search", get(bing)).with_state(seen);
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/search")
}

#[tokio::test]
async fn bing_request_and_mapping() {
    let seen = Seen::default();
    let endpoint = serve(seen.clone()).await;
    let provider = BingProvider::new(&endpoint, "secret", Duration::from_secs(5)).unwrap();
    let query = SearchQuery::new("Angela Merkel", "de", 3).unwrap();
    let set = search(&query, &provider, &SystemClock).await.unwrap();
    let ranks: Vec<u32> = set.results.iter().map(|r| r.rank).collect();
    assert_eq!(ranks, (21..=30).collect::<Vec<_>>());
    assert_eq!(set.results[0].url, "https://example.org/20");

    let seen = seen.lock().unwrap();
    let (_, params) = &seen[0];
    assert_eq!(params["q"], "Angela Merkel");
    assert_eq!(params["mkt"], "de-DE");
    assert_eq!(params["offset"], "20");
    assert_eq!(params["count"], "10");
}

#[tokio::test]
async fn bing_errors_carry_status() {
    let endpoint = serve(Seen::default()).await;
    let provider = BingProvider::new(&endpoint, "wrong", Duration::from_secs(5)).unwrap();
    let q = SearchQuery::new("x", "en", 1).unwrap();
    match provider.fetch(&ProviderRequest::page(&q)).await {
        Err(SearchError::Provider { status, .. }) => assert_eq!(status, 401),
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn unreachable_provider_is_a_transport_error() {
    let provider = BingProvider::new("http://127.0.0.1:9/search", "k", Duration::from_millis(500)).unwrap();
    let q = SearchQuery::new("x", "en", 1).unwrap();
    assert!(matches!(
        provider.fetch(&ProviderRequest::page(&q)).await,
        Err(SearchError::Transport(_))
    ));
}

#[tokio::test]
async fn bundled_recordings_load() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/demo/results");
    let provider = FixtureProvider::from_dir(dir).unwrap();
    assert!(provider.recording_count() >= 6);
    let q = SearchQuery::new("angela merkel", "de", 1).unwrap();
    let set = search(&q, &provider, &SystemClock).await.unwrap();
    assert_eq!(set.results.len(), 10);
    assert_eq!(set.results[0].url, "https://de.wikipedia.org/wiki/Angela_Merkel");
}
