use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::Duration;

use super::{CacheError, CachedResultSet, QueryKey, SnapshotStore};
use crate::clock::Clock;
use crate::search_gateway::{
    default_market, validate_results, ProviderRequest, SearchError, SearchProvider, MAX_PAGE,
    RESULTS_PER_PAGE,
};

/// Results fetched per provider call: every page a user can reach.
pub const FILL_COUNT: usize = RESULTS_PER_PAGE * MAX_PAGE as usize;

#[derive(Debug, thiserror::Error)]
pub enum CachedSearchError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone)]
pub struct Lookup {
    pub snapshot: CachedResultSet,
    pub from_cache: bool,
}

/// Cache-first search: serves the newest snapshot while it is younger than
/// the refresh interval, and otherwise fetches all reachable pages in one
/// provider call and appends them as a new snapshot.
///
/// Concurrent misses on the same key wait for a single fetch.
pub struct CachedSearch {
    store: Arc<dyn SnapshotStore>,
    provider: Arc<dyn SearchProvider>,
    clock: Arc<dyn Clock>,
    interval: Duration,
    in_flight: Mutex<HashMap<QueryKey, Arc<tokio::sync::Mutex<()>>>>,
}

impl CachedSearch {
    pub fn new(
        store: Arc<dyn SnapshotStore>,
        provider: Arc<dyn SearchProvider>,
        clock: Arc<dyn Clock>,
        interval: Duration,
    ) -> Self {
        Self {
            store,
            provider,
            clock,
            interval,
            in_flight: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &Arc<dyn SnapshotStore> {
        &self.store
    }

    pub fn provider(&self) -> &Arc<dyn SearchProvider> {
        &self.provider
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    fn key_lock(&self, key: &QueryKey) -> Arc<tokio::sync::Mutex<()>> {
        let mut map = self.in_flight.lock().expect("in-flight map poisoned");
        map.entry(key.clone()).or_default().clone()
    }

    fn fresh(&self, key: &QueryKey) -> Result<Option<CachedResultSet>, CacheError> {
        let now = self.clock.now();
        Ok(self
            .store
            .get_latest(key)?
            .filter(|s| s.is_fresh(now, self.interval)))
    }

    pub async fn get(&self, entity_title: &str, language: &str) -> Result<Lookup, CachedSearchError> {
        let key = QueryKey::new(entity_title, language);
        if key.title.is_empty() {
            return Err(SearchError::InvalidQuery("empty entity title".into()).into());
        }
        if let Some(snapshot) = self.fresh(&key)? {
            return Ok(Lookup {
                snapshot,
                from_cache: true,
            });
        }
        let lock = self.key_lock(&key);
        let _guard = lock.lock().await;
        // another request may have filled it while we waited
        if let Some(snapshot) = self.fresh(&key)? {
            return Ok(Lookup {
                snapshot,
                from_cache: true,
            });
        }
        let snapshot = self.fetch_and_store(&key, entity_title).await?;
        Ok(Lookup {
            snapshot,
            from_cache: false,
        })
    }

    /// Fetch and store a new snapshot regardless of freshness.
    pub async fn refresh(&self, key: &QueryKey) -> Result<CachedResultSet, CachedSearchError> {
        let lock = self.key_lock(key);
        let _guard = lock.lock().await;
        self.fetch_and_store(key, &key.title).await
    }

    async fn fetch_and_store(
        &self,
        key: &QueryKey,
        entity_title: &str,
    ) -> Result<CachedResultSet, CachedSearchError> {
        let request = ProviderRequest {
            entity_title: entity_title.trim().replace('_', " "),
            language: key.language.clone(),
            market: default_market(&key.language),
            offset: 0,
            count: FILL_COUNT,
        };
        let results = self.provider.fetch(&request).await?;
        if results.len() > FILL_COUNT {
            return Err(SearchError::InvalidResults(format!(
                "{} results for a request of {FILL_COUNT}",
                results.len()
            ))
            .into());
        }
        validate_results(&results, 1).map_err(SearchError::InvalidResults)?;
        let snapshot = CachedResultSet {
            query_key: key.clone(),
            retrieved_at: self.clock.now(),
            results,
            provider_id: self.provider.id().to_owned(),
        };
        self.store.put_snapshot(&snapshot)?;
        tracing::info!(key = %key, results = snapshot.results.len(), "stored snapshot");
        Ok(snapshot)
    }
}
