//! Append-only store of timestamped search-result snapshots.
//!
//! Every retrieval is kept; nothing is overwritten or evicted, so the cache
//! doubles as a longitudinal corpus of past result lists.

mod cached_search;
mod export;
mod memory;
mod sqlite;

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::entity_index::case_fold;
use crate::search_gateway::{validate_results, SearchResult};

pub use cached_search::{CachedSearch, CachedSearchError, Lookup, FILL_COUNT};
pub use export::{
    export_snapshots, load_manifest, read_manifest, snapshot_file_name, ManifestEntry,
    ManifestError, MANIFEST_FILE,
};
pub use memory::MemoryStore;
pub use sqlite::SqliteStore;

/// Cache key: the normalized entity title plus language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryKey {
    pub title: String,
    pub language: String,
}

impl QueryKey {
    /// Case-folds the title, treats `_` as a space and collapses runs of
    /// whitespace.
    pub fn new(title: &str, language: &str) -> Self {
        let spaced = title.replace('_', " ");
        let collapsed = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
        Self {
            title: case_fold(&collapsed),
            language: language.trim().to_owned(),
        }
    }
}

impl fmt::Display for QueryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.language, self.title)
    }
}

pub type SnapshotId = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedResultSet {
    pub query_key: QueryKey,
    pub retrieved_at: DateTime<Utc>,
    pub results: Vec<SearchResult>,
    pub provider_id: String,
}

impl CachedResultSet {
    pub fn validate(&self) -> Result<(), CacheError> {
        if self.query_key.title.is_empty() {
            return Err(CacheError::Invalid("empty query title".into()));
        }
        let first = self.results.first().map_or(1, |r| r.rank.max(1));
        validate_results(&self.results, first).map_err(CacheError::Invalid)
    }

    /// Whether this snapshot is at most `interval` old at `now`.
    pub fn is_fresh(&self, now: DateTime<Utc>, interval: Duration) -> bool {
        now - self.retrieved_at <= interval
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("a snapshot for {key} at {retrieved_at} already exists")]
    Conflict {
        key: QueryKey,
        retrieved_at: DateTime<Utc>,
    },
    #[error("invalid snapshot: {0}")]
    Invalid(String),
    #[error("cache storage error: {0}")]
    Storage(String),
}

impl From<rusqlite::Error> for CacheError {
    fn from(e: rusqlite::Error) -> Self {
        CacheError::Storage(e.to_string())
    }
}

/// Storage contract for snapshots. Implementations never delete or modify a
/// stored snapshot.
pub trait SnapshotStore: Send + Sync {
    fn put_snapshot(&self, set: &CachedResultSet) -> Result<SnapshotId, CacheError>;

    /// The snapshot with the greatest `retrieved_at` for `key`.
    fn get_latest(&self, key: &QueryKey) -> Result<Option<CachedResultSet>, CacheError>;

    /// All snapshots for `key`, oldest first.
    fn list_snapshots(&self, key: &QueryKey) -> Result<Vec<CachedResultSet>, CacheError>;

    /// Every key with at least one snapshot, sorted.
    fn keys(&self) -> Result<Vec<QueryKey>, CacheError>;
}

#[derive(Debug, Clone)]
pub struct RefreshPolicy {
    pub interval: Duration,
    pub seeds: Vec<QueryKey>,
    /// Also refresh every key already in the cache (queries users issued).
    pub include_cached_queries: bool,
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        Self {
            interval: Duration::days(30),
            seeds: Vec::new(),
            include_cached_queries: true,
        }
    }
}

impl RefreshPolicy {
    pub fn new(interval: Duration, seeds: Vec<QueryKey>) -> Result<Self, CacheError> {
        if interval <= Duration::zero() {
            return Err(CacheError::Invalid("refresh interval must be positive".into()));
        }
        Ok(Self {
            interval,
            seeds,
            include_cached_queries: true,
        })
    }
}

/// Keys whose newest snapshot is older than the policy interval, or that
/// were never fetched. Seeds come first, in seed order.
pub fn refresh_due(
    store: &dyn SnapshotStore,
    policy: &RefreshPolicy,
    now: DateTime<Utc>,
) -> Result<Vec<QueryKey>, CacheError> {
    let mut candidates = policy.seeds.clone();
    if policy.include_cached_queries {
        candidates.extend(store.keys()?);
    }
    let mut seen = HashSet::new();
    let mut due = Vec::new();
    for key in candidates {
        if !seen.insert(key.clone()) {
            continue;
        }
        let stale = match store.get_latest(&key)? {
            None => true,
            Some(latest) => !latest.is_fresh(now, policy.interval),
        };
        if stale {
            due.push(key);
        }
    }
    Ok(due)
}
