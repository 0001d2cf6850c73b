//! JSON endpoints under `/api`, plus `/healthz` and the static UI.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use archivesearch_core::entity_graph::RelatednessScore;
use archivesearch_core::entity_index::{EntityId, Suggestion};
use archivesearch_core::result_cache::CachedSearchError;
use archivesearch_core::search_gateway::{
    archive_span, captures_around, link_results, normalize_url, parse_cdx_timestamp, ArchiveError,
    ArchiveSpan, LinkOptions, LinkedResult, SearchError, TemporalIntent, MAX_PAGE,
    RESULTS_PER_PAGE,
};

use crate::state::AppState;

const MAX_LIMIT: usize = 100;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    fn bad_gateway(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_GATEWAY,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

impl From<ArchiveError> for ApiError {
    fn from(e: ArchiveError) -> Self {
        match e {
            ArchiveError::InvalidUrl(_) | ArchiveError::InvalidWindow => Self::bad_request(e.to_string()),
            _ => Self::bad_gateway(e.to_string()),
        }
    }
}

impl From<CachedSearchError> for ApiError {
    fn from(e: CachedSearchError) -> Self {
        match e {
            CachedSearchError::Search(SearchError::InvalidQuery(m)) => Self::bad_request(m),
            CachedSearchError::Search(e) => Self::bad_gateway(e.to_string()),
            CachedSearchError::Cache(e) => Self::internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn required<'a>(value: &'a Option<String>, name: &str) -> Result<&'a str, ApiError> {
    value
        .as_deref()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::bad_request(format!("missing parameter {name}")))
}

fn limit(value: &Option<String>, default: usize) -> Result<usize, ApiError> {
    match value.as_deref() {
        None => Ok(default),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if (1..=MAX_LIMIT).contains(&n) => Ok(n),
            _ => Err(ApiError::bad_request(format!("limit must be between 1 and {MAX_LIMIT}"))),
        },
    }
}

fn language<'a>(state: &AppState, value: &'a Option<String>) -> Result<&'a str, ApiError> {
    let lang = required(value, "lang")?;
    if state.config.languages.iter().any(|l| l == lang) {
        Ok(lang)
    } else {
        Err(ApiError::bad_request(format!("unsupported language {lang:?}")))
    }
}

/// `YYYY`, `YYYY-MM`, `YYYY-MM-DD`, RFC 3339 or a 14-digit timestamp.
pub fn parse_timepoint(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if s.len() == 14 {
        return parse_cdx_timestamp(s);
    }
    let date = match s.len() {
        4 => NaiveDate::parse_from_str(&format!("{s}-01-01"), "%Y-%m-%d").ok()?,
        7 => NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").ok()?,
        10 => NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?,
        _ => return None,
    };
    Some(date.and_hms_opt(0, 0, 0)?.and_utc())
}

fn window(state: &AppState, value: &Option<String>) -> Result<Duration, ApiError> {
    match value.as_deref() {
        None => Ok(Duration::days(state.config.archive.window_days)),
        Some(v) => match v.trim().parse::<i64>() {
            Ok(d) if (1..=36_500).contains(&d) => Ok(Duration::days(d)),
            _ => Err(ApiError::bad_request("window must be a positive number of days")),
        },
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/suggest", get(suggest))
        .route("/api/search", get(search))
        .route("/api/related", get(related))
        .route("/api/archive", get(archive))
        .route("/api/interlanguage", get(interlanguage))
        .route("/healthz", get(healthz));
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.with_state(state)
}

#[derive(Deserialize)]
pub struct SuggestParams {
    q: Option<String>,
    lang: Option<String>,
    limit: Option<String>,
}

#[derive(Serialize)]
pub struct SuggestResponse {
    query: String,
    language: String,
    suggestions: Vec<Suggestion>,
}

async fn suggest(State(state): State<Arc<AppState>>, Query(p): Query<SuggestParams>) -> ApiResult<SuggestResponse> {
    let q = p
        .q
        .as_deref()
        .filter(|q| !q.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("missing parameter q"))?;
    let lang = language(&state, &p.lang)?;
    let limit = limit(&p.limit, state.config.suggest_limit)?;
    let catalog = state.catalog.load();
    let data = catalog
        .languages
        .get(lang)
        .ok_or_else(|| ApiError::bad_request(format!("unsupported language {lang:?}")))?;
    Ok(Json(SuggestResponse {
        query: q.to_owned(),
        language: lang.to_owned(),
        suggestions: data.index.suggest(q, limit),
    }))
}

#[derive(Deserialize)]
pub struct SearchParams {
    entity: Option<String>,
    lang: Option<String>,
    page: Option<String>,
    timepoint: Option<String>,
    window: Option<String>,
}

#[derive(Serialize)]
pub struct SearchResponse {
    entity: String,
    language: String,
    page: u32,
    retrieved_at: DateTime<Utc>,
    from_cache: bool,
    provider: String,
    total_results: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    timepoint: Option<DateTime<Utc>>,
    results: Vec<LinkedResult>,
}

async fn search(State(state): State<Arc<AppState>>, Query(p): Query<SearchParams>) -> ApiResult<SearchResponse> {
    let entity = required(&p.entity, "entity")?;
    let lang = language(&state, &p.lang)?;
    let page = match p.page.as_deref() {
        None => 1,
        Some(v) => v
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|n| (1..=MAX_PAGE).contains(n))
            .ok_or_else(|| ApiError::bad_request(format!("page must be between 1 and {MAX_PAGE}")))?,
    };
    let timepoint = match p.timepoint.as_deref() {
        None => None,
        Some(t) => Some(parse_timepoint(t).ok_or_else(|| ApiError::bad_request(format!("bad timepoint {t:?}")))?),
    };
    let window = window(&state, &p.window)?;

    // query the provider with the canonical title when the entity is known
    let title = {
        let catalog = state.catalog.load();
        catalog
            .languages
            .get(lang)
            .and_then(|d| d.index.find_title(entity).map(|id| d.title(id)))
            .unwrap_or_else(|| entity.to_owned())
    };
    let lookup = state.search.get(&title, lang).await?;
    let snapshot = lookup.snapshot;
    let first = (page as usize - 1) * RESULTS_PER_PAGE;
    let page_results: Vec<_> = snapshot
        .results
        .iter()
        .skip(first)
        .take(RESULTS_PER_PAGE)
        .cloned()
        .collect();
    let options = LinkOptions {
        temporal: timepoint.map(|timepoint| TemporalIntent { timepoint, window }),
        ..state.link_options.clone()
    };
    let results = link_results(&page_results, state.archive.as_ref(), &options).await;
    Ok(Json(SearchResponse {
        entity: title,
        language: lang.to_owned(),
        page,
        retrieved_at: snapshot.retrieved_at,
        from_cache: lookup.from_cache,
        provider: snapshot.provider_id,
        total_results: snapshot.results.len(),
        timepoint,
        results,
    }))
}

#[derive(Deserialize)]
pub struct RelatedParams {
    entity: Option<String>,
    lang: Option<String>,
    limit: Option<String>,
}

#[derive(Serialize)]
pub struct RelatedEntity {
    entity_id: EntityId,
    title: String,
    score: RelatednessScore,
    cumulative_views: u64,
}

#[derive(Serialize)]
pub struct RelatedResponse {
    entity_id: EntityId,
    title: String,
    language: String,
    related: Vec<RelatedEntity>,
}

async fn related(State(state): State<Arc<AppState>>, Query(p): Query<RelatedParams>) -> ApiResult<RelatedResponse> {
    let entity = required(&p.entity, "entity")?;
    let lang = language(&state, &p.lang)?;
    let limit = limit(&p.limit, state.config.related_limit)?;
    let catalog = state.catalog.load();
    let not_found = || ApiError::not_found(format!("entity {entity:?} is not in the {lang} link graph"));
    let data = catalog.languages.get(lang).ok_or_else(not_found)?;
    let graph = data.graph.as_ref().ok_or_else(not_found)?;
    let id = data.resolve(entity).filter(|id| graph.contains(id)).ok_or_else(not_found)?;
    let related = graph
        .related_entities(&id, limit, &data.popularity)
        .map_err(|e| ApiError::internal(e.to_string()))?
        .into_iter()
        .map(|(rid, score)| RelatedEntity {
            title: data.title(&rid),
            cumulative_views: data.popularity.get(&rid).copied().unwrap_or(0),
            entity_id: rid,
            score,
        })
        .collect();
    Ok(Json(RelatedResponse {
        title: data.title(&id),
        entity_id: id,
        language: lang.to_owned(),
        related,
    }))
}

#[derive(Deserialize)]
pub struct ArchiveParams {
    url: Option<String>,
    timepoint: Option<String>,
    window: Option<String>,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum ArchiveResponse {
    Span(ArchiveSpan),
    Captures {
        url: String,
        timepoint: DateTime<Utc>,
        window_days: i64,
        captures: Vec<DateTime<Utc>>,
    },
}

async fn archive(State(state): State<Arc<AppState>>, Query(p): Query<ArchiveParams>) -> ApiResult<ArchiveResponse> {
    let url = required(&p.url, "url")?;
    normalize_url(url).map_err(|e| ApiError::bad_request(e.to_string()))?;
    match p.timepoint.as_deref() {
        None => {
            if p.window.is_some() {
                return Err(ApiError::bad_request("window requires a timepoint"));
            }
            let span = archive_span(url, state.archive.as_ref()).await?;
            Ok(Json(ArchiveResponse::Span(span)))
        }
        Some(t) => {
            let timepoint = parse_timepoint(t).ok_or_else(|| ApiError::bad_request(format!("bad timepoint {t:?}")))?;
            let window = window(&state, &p.window)?;
            let captures = captures_around(url, timepoint, window, state.archive.as_ref()).await?;
            Ok(Json(ArchiveResponse::Captures {
                url: url.to_owned(),
                timepoint,
                window_days: window.num_days(),
                captures,
            }))
        }
    }
}

#[derive(Deserialize)]
pub struct InterlanguageParams {
    title: Option<String>,
    from: Option<String>,
    to: Option<String>,
}

#[derive(Serialize)]
pub struct InterlanguageResponse {
    title: String,
    from: String,
    to: String,
    /// Title in the target language, or null when unmapped.
    redirect: Option<String>,
}

async fn interlanguage(
    State(state): State<Arc<AppState>>,
    Query(p): Query<InterlanguageParams>,
) -> ApiResult<InterlanguageResponse> {
    let title = required(&p.title, "title")?;
    let from = language(&state, &p.from)?;
    let to = language(&state, &p.to)?;
    let catalog = state.catalog.load();
    let redirect = catalog.interlang.lookup(title, from, to).map(str::to_owned);
    Ok(Json(InterlanguageResponse {
        title: title.to_owned(),
        from: from.to_owned(),
        to: to.to_owned(),
        redirect,
    }))
}

#[derive(Serialize)]
pub struct LanguageHealth {
    entities: usize,
    graph_articles: Option<usize>,
}

#[derive(Serialize)]
pub struct Health {
    status: &'static str,
    languages: BTreeMap<String, LanguageHealth>,
    interlanguage_links: usize,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    let catalog = state.catalog.load();
    Json(Health {
        status: "ok",
        languages: catalog
            .languages
            .iter()
            .map(|(lang, d)| {
                (
                    lang.clone(),
                    LanguageHealth {
                        entities: d.index.len(),
                        graph_articles: d.graph.as_ref().map(|g| g.article_count()),
                    },
                )
            })
            .collect(),
        interlanguage_links: catalog.interlang.len(),
    })
}
