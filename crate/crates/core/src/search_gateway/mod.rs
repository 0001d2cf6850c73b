//! Web results for an entity query, linked to their archived versions.
//!
//! A [`SearchProvider`] supplies the ranked live results; an
//! [`ArchiveClient`] answers capture-date questions about each result URL.
//! Both have a deterministic fixture implementation and an HTTP one.

mod archive;
mod linking;
mod provider;
mod results_tsv;
mod url;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;

pub use self::url::{normalize_url, UrlError};
pub use archive::{
    archive_span, captures_around, format_cdx_timestamp, parse_cdx_timestamp, ArchiveClient,
    ArchiveError, ArchiveSpan, CdxClient, CdxConfig, FixtureArchive,
};
pub use linking::{link_results, ArchiveStatus, LinkOptions, LinkedResult, TemporalIntent};
pub use provider::{
    parse_fixture_name, BingProvider, FixtureProvider, ProviderRequest, SearchProvider,
};
pub use results_tsv::{parse_results_tsv, write_results_tsv};

pub const RESULTS_PER_PAGE: usize = 10;
pub const MAX_PAGE: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("search provider unreachable: {0}")]
    Transport(String),
    #[error("search provider rejected the query (status {status}): {detail}")]
    Provider { status: u16, detail: String },
    #[error("search provider returned an invalid result set: {0}")]
    InvalidResults(String),
}

/// Market hint sent to the provider for a Wikipedia language.
pub fn default_market(language: &str) -> String {
    match language {
        "en" => "en-US".to_owned(),
        "de" => "de-DE".to_owned(),
        other => format!("{other}-{}", other.to_uppercase()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub entity_title: String,
    pub language: String,
    pub market: String,
    pub page: u32,
}

impl SearchQuery {
    pub fn new(entity_title: &str, language: &str, page: u32) -> Result<Self, SearchError> {
        let query = Self {
            entity_title: entity_title.trim().to_owned(),
            language: language.to_owned(),
            market: default_market(language),
            page,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.entity_title.is_empty() {
            return Err(SearchError::InvalidQuery("empty entity title".into()));
        }
        if !(1..=MAX_PAGE).contains(&self.page) {
            return Err(SearchError::InvalidQuery(format!(
                "page {} outside 1..={MAX_PAGE}",
                self.page
            )));
        }
        Ok(())
    }

    /// Rank offset of the first result on this page.
    pub fn offset(&self) -> usize {
        (self.page as usize - 1) * RESULTS_PER_PAGE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub rank: u32,
    pub url: String,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultSet {
    pub entity_title: String,
    pub language: String,
    pub retrieved_at: DateTime<Utc>,
    pub results: Vec<SearchResult>,
}

/// Check that ranks run consecutively from `first_rank` and every URL is an
/// absolute URL.
pub fn validate_results(results: &[SearchResult], first_rank: u32) -> Result<(), String> {
    for (i, r) in results.iter().enumerate() {
        let expected = first_rank + i as u32;
        if r.rank != expected {
            return Err(format!("rank {} at position {i}, expected {expected}", r.rank));
        }
        normalize_url(&r.url).map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// One page of results for `query`, stamped with the retrieval time.
pub async fn search(
    query: &SearchQuery,
    provider: &dyn SearchProvider,
    clock: &dyn Clock,
) -> Result<SearchResultSet, SearchError> {
    query.validate()?;
    let request = ProviderRequest::page(query);
    let results = provider.fetch(&request).await?;
    if results.len() > RESULTS_PER_PAGE {
        return Err(SearchError::InvalidResults(format!(
            "{} results for a {RESULTS_PER_PAGE}-result page",
            results.len()
        )));
    }
    validate_results(&results, query.offset() as u32 + 1).map_err(SearchError::InvalidResults)?;
    Ok(SearchResultSet {
        entity_title: query.entity_title.clone(),
        language: query.language.clone(),
        retrieved_at: clock.now(),
        results,
    })
}
