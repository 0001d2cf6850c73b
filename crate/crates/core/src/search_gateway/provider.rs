use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::Deserialize;

use super::results_tsv::parse_results_tsv;
use super::{validate_results, SearchError, SearchQuery, SearchResult, RESULTS_PER_PAGE};
use crate::entity_index::case_fold;

/// A window of ranked results for one entity query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderRequest {
    pub entity_title: String,
    pub language: String,
    pub market: String,
    /// Number of leading results to skip.
    pub offset: usize,
    pub count: usize,
}

impl ProviderRequest {
    pub fn page(query: &SearchQuery) -> Self {
        Self {
            entity_title: query.entity_title.clone(),
            language: query.language.clone(),
            market: query.market.clone(),
            offset: query.offset(),
            count: RESULTS_PER_PAGE,
        }
    }
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    /// Identifier stored alongside cached snapshots.
    fn id(&self) -> &str;

    /// Results ranked `offset + 1 ..= offset + count` (fewer when the
    /// provider has fewer). An unknown query is an empty list.
    async fn fetch(&self, request: &ProviderRequest) -> Result<Vec<SearchResult>, SearchError>;
}

fn entity_key(title: &str) -> String {
    case_fold(&title.trim().replace('_', " "))
}

/// Split `<entity>__<lang>__<date>.tsv` into its parts. The date is
/// `YYYY-MM-DD` or `YYYY-MM-DDTHHMMSSZ`.
pub fn parse_fixture_name(file_name: &str) -> Option<(String, String, DateTime<Utc>)> {
    let stem = file_name.strip_suffix(".tsv")?;
    let mut parts = stem.rsplitn(3, "__");
    let date = parts.next()?;
    let lang = parts.next()?;
    let entity = parts.next()?;
    if entity.is_empty() || lang.is_empty() {
        return None;
    }
    let when = if let Ok(dt) = NaiveDateTime::parse_from_str(date, "%Y-%m-%dT%H%M%S%.fZ") {
        dt.and_utc()
    } else {
        NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .ok()?
            .and_hms_opt(0, 0, 0)?
            .and_utc()
    };
    Some((entity.replace('_', " "), lang.to_owned(), when))
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct FixtureError {
    pub path: String,
    pub message: String,
}

/// Serves recorded result sets from `<entity>__<lang>__<date>.tsv` files.
///
/// With several recordings for one query, the newest one not after `as_of`
/// (or simply the newest) is served. Every `fetch` is counted.
type Recordings = Vec<(DateTime<Utc>, Vec<SearchResult>)>;

#[derive(Debug, Default)]
pub struct FixtureProvider {
    sets: HashMap<(String, String), Recordings>,
    as_of: Option<DateTime<Utc>>,
    calls: AtomicUsize,
}

impl FixtureProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let dir = dir.as_ref();
        let fail = |path: &Path, message: String| FixtureError {
            path: path.display().to_string(),
            message,
        };
        let mut provider = Self::new();
        let entries = fs::read_dir(dir).map_err(|e| fail(dir, e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| fail(dir, e.to_string()))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some((entity, lang, when)) = parse_fixture_name(name) else {
                continue;
            };
            let file = File::open(&path).map_err(|e| fail(&path, e.to_string()))?;
            let results =
                parse_results_tsv(BufReader::new(file)).map_err(|e| fail(&path, e.to_string()))?;
            provider
                .insert(&entity, &lang, when, results)
                .map_err(|e| fail(&path, e))?;
        }
        Ok(provider)
    }

    /// Add a recording. Ranks must run 1, 2, 3, ...
    pub fn insert(
        &mut self,
        entity: &str,
        lang: &str,
        when: DateTime<Utc>,
        results: Vec<SearchResult>,
    ) -> Result<(), String> {
        validate_results(&results, 1)?;
        let list = self
            .sets
            .entry((entity_key(entity), lang.to_owned()))
            .or_default();
        list.push((when, results));
        list.sort_by_key(|(t, _)| *t);
        Ok(())
    }

    pub fn with_as_of(mut self, as_of: DateTime<Utc>) -> Self {
        self.as_of = Some(as_of);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn recording_count(&self) -> usize {
        self.sets.values().map(Vec::len).sum()
    }
}

#[async_trait]
impl SearchProvider for FixtureProvider {
    fn id(&self) -> &str {
        "fixture"
    }

    async fn fetch(&self, request: &ProviderRequest) -> Result<Vec<SearchResult>, SearchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = (entity_key(&request.entity_title), request.language.clone());
        let Some(recordings) = self.sets.get(&key) else {
            return Ok(Vec::new());
        };
        let chosen = recordings
            .iter()
            .rev()
            .find(|(t, _)| self.as_of.is_none_or(|as_of| *t <= as_of));
        Ok(chosen
            .map(|(_, results)| {
                results
                    .iter()
                    .skip(request.offset)
                    .take(request.count)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }
}

/// Environment variable holding the live provider's subscription key.
pub const PROVIDER_KEY_ENV: &str = "ARCHIVESEARCH_PROVIDER_KEY";

/// Adapter for a Bing-compatible web search endpoint (web results only).
#[derive(Debug, Clone)]
pub struct BingProvider {
    endpoint: String,
    key: String,
    http: reqwest::Client,
}

#[derive(Deserialize)]
struct BingResponse {
    #[serde(rename = "webPages")]
    web_pages: Option<BingWebPages>,
}

#[derive(Deserialize)]
struct BingWebPages {
    #[serde(default)]
    value: Vec<BingWebPage>,
}

#[derive(Deserialize)]
struct BingWebPage {
    url: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    snippet: String,
}

impl BingProvider {
    pub fn new(endpoint: &str, key: &str, timeout: Duration) -> Result<Self, SearchError> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SearchError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.to_owned(),
            key: key.to_owned(),
            http,
        })
    }

    /// Read the key from [`PROVIDER_KEY_ENV`].
    pub fn from_env(endpoint: &str, timeout: Duration) -> Result<Self, SearchError> {
        let key = std::env::var(PROVIDER_KEY_ENV).map_err(|_| {
            SearchError::InvalidQuery(format!("{PROVIDER_KEY_ENV} is not set"))
        })?;
        Self::new(endpoint, &key, timeout)
    }
}

#[async_trait]
impl SearchProvider for BingProvider {
    fn id(&self) -> &str {
        "bing"
    }

    async fn fetch(&self, request: &ProviderRequest) -> Result<Vec<SearchResult>, SearchError> {
        let response = self
            .http
            .get(&self.endpoint)
            .header("Ocp-Apim-Subscription-Key", &self.key)
            .query(&[
                ("q", request.entity_title.as_str()),
                ("mkt", request.market.as_str()),
                ("count", &request.count.to_string()),
                ("offset", &request.offset.to_string()),
                ("responseFilter", "Webpages"),
            ])
            .send()
            .await
            .map_err(|e| SearchError::Transport(e.to_string()))?;

        let status = response.status();
        let body = response
            .text()
            .await
            .map_err(|e| SearchError::Transport(e.to_string()))?;
        if !status.is_success() {
            let detail: String = body.chars().take(300).collect();
            return Err(SearchError::Provider {
                status: status.as_u16(),
                detail,
            });
        }
        let parsed: BingResponse =
            serde_json::from_str(&body).map_err(|e| SearchError::InvalidResults(e.to_string()))?;
        let pages = parsed.web_pages.map(|w| w.value).unwrap_or_default();
        Ok(pages
            .into_iter()
            .take(request.count)
            .enumerate()
            .map(|(i, p)| SearchResult {
                rank: (request.offset + i + 1) as u32,
                url: p.url,
                title: p.name,
                snippet: p.snippet,
            })
            .collect())
    }
}
