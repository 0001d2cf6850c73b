use std::collections::BTreeMap;
use std::sync::RwLock;

use chrono::{DateTime, Utc};

use super::{CacheError, CachedResultSet, QueryKey, SnapshotId, SnapshotStore};

#[derive(Debug, Default)]
struct Inner {
    by_key: BTreeMap<QueryKey, BTreeMap<DateTime<Utc>, CachedResultSet>>,
    next_id: SnapshotId,
}

/// Non-persistent store, mainly for tests.
#[derive(Debug, Default)]
pub struct MemoryStore {
    inner: RwLock<Inner>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SnapshotStore for MemoryStore {
    fn put_snapshot(&self, set: &CachedResultSet) -> Result<SnapshotId, CacheError> {
        set.validate()?;
        let mut inner = self.inner.write().map_err(|_| CacheError::Storage("poisoned".into()))?;
        let slot = inner.by_key.entry(set.query_key.clone()).or_default();
        if slot.contains_key(&set.retrieved_at) {
            return Err(CacheError::Conflict {
                key: set.query_key.clone(),
                retrieved_at: set.retrieved_at,
            });
        }
        slot.insert(set.retrieved_at, set.clone());
        inner.next_id += 1;
        Ok(inner.next_id)
    }

    fn get_latest(&self, key: &QueryKey) -> Result<Option<CachedResultSet>, CacheError> {
        let inner = self.inner.read().map_err(|_| CacheError::Storage("poisoned".into()))?;
        Ok(inner
            .by_key
            .get(key)
            .and_then(|s| s.values().next_back())
            .cloned())
    }

    fn list_snapshots(&self, key: &QueryKey) -> Result<Vec<CachedResultSet>, CacheError> {
        let inner = self.inner.read().map_err(|_| CacheError::Storage("poisoned".into()))?;
        Ok(inner
            .by_key
            .get(key)
            .map(|s| s.values().cloned().collect())
            .unwrap_or_default())
    }

    fn keys(&self) -> Result<Vec<QueryKey>, CacheError> {
        let inner = self.inner.read().map_err(|_| CacheError::Storage("poisoned".into()))?;
        Ok(inner.by_key.keys().cloned().collect())
    }
}
