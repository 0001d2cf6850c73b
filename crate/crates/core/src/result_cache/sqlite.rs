use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, ErrorCode, OptionalExtension};

use super::{CacheError, CachedResultSet, QueryKey, SnapshotId, SnapshotStore};
use crate::search_gateway::SearchResult;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS snapshots (
    id              INTEGER PRIMARY KEY,
    title           TEXT    NOT NULL,
    language        TEXT    NOT NULL,
    retrieved_secs  INTEGER NOT NULL,
    retrieved_nanos INTEGER NOT NULL,
    provider_id     TEXT    NOT NULL,
    UNIQUE (title, language, retrieved_secs, retrieved_nanos)
);
CREATE TABLE IF NOT EXISTS results (
    snapshot_id INTEGER NOT NULL REFERENCES snapshots(id),
    rank        INTEGER NOT NULL,
    url         TEXT    NOT NULL,
    title       TEXT    NOT NULL,
    snippet     TEXT    NOT NULL,
    PRIMARY KEY (snapshot_id, rank)
);
CREATE TRIGGER IF NOT EXISTS snapshots_no_update BEFORE UPDATE ON snapshots
    BEGIN SELECT RAISE(ABORT, 'snapshots are append-only'); END;
CREATE TRIGGER IF NOT EXISTS snapshots_no_delete BEFORE DELETE ON snapshots
    BEGIN SELECT RAISE(ABORT, 'snapshots are append-only'); END;
CREATE TRIGGER IF NOT EXISTS results_no_update BEFORE UPDATE ON results
    BEGIN SELECT RAISE(ABORT, 'results are append-only'); END;
CREATE TRIGGER IF NOT EXISTS results_no_delete BEFORE DELETE ON results
    BEGIN SELECT RAISE(ABORT, 'results are append-only'); END;
";

/// SQLite-backed store: a snapshot header table and a result row table.
/// Writes go through a single connection.
pub struct SqliteStore {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for SqliteStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteStore").finish_non_exhaustive()
    }
}

struct Header {
    id: i64,
    key: QueryKey,
    retrieved_at: DateTime<Utc>,
    provider_id: String,
}

impl SqliteStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, CacheError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, CacheError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    fn lock(&self) -> Result<std::sync::MutexGuard<'_, Connection>, CacheError> {
        self.conn
            .lock()
            .map_err(|_| CacheError::Storage("connection mutex poisoned".into()))
    }

    fn headers(conn: &Connection, key: &QueryKey, latest_only: bool) -> Result<Vec<Header>, CacheError> {
        let sql = if latest_only {
            "SELECT id, retrieved_secs, retrieved_nanos, provider_id FROM snapshots
             WHERE title = ?1 AND language = ?2
             ORDER BY retrieved_secs DESC, retrieved_nanos DESC LIMIT 1"
        } else {
            "SELECT id, retrieved_secs, retrieved_nanos, provider_id FROM snapshots
             WHERE title = ?1 AND language = ?2
             ORDER BY retrieved_secs ASC, retrieved_nanos ASC"
        };
        let mut stmt = conn.prepare_cached(sql)?;
        let rows = stmt.query_map(params![key.title, key.language], |row| {
            Ok((
                row.get::<_, i64>(0)?,
                row.get::<_, i64>(1)?,
                row.get::<_, u32>(2)?,
                row.get::<_, String>(3)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, secs, nanos, provider_id) = row?;
            let retrieved_at = DateTime::from_timestamp(secs, nanos)
                .ok_or_else(|| CacheError::Storage(format!("bad timestamp in snapshot {id}")))?;
            out.push(Header {
                id,
                key: key.clone(),
                retrieved_at,
                provider_id,
            });
        }
        Ok(out)
    }

    fn hydrate(conn: &Connection, header: Header) -> Result<CachedResultSet, CacheError> {
        let mut stmt = conn.prepare_cached(
            "SELECT rank, url, title, snippet FROM results WHERE snapshot_id = ?1 ORDER BY rank",
        )?;
        let results = stmt
            .query_map([header.id], |row| {
                Ok(SearchResult {
                    rank: row.get(0)?,
                    url: row.get(1)?,
                    title: row.get(2)?,
                    snippet: row.get(3)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CachedResultSet {
            query_key: header.key,
            retrieved_at: header.retrieved_at,
            results,
            provider_id: header.provider_id,
        })
    }
}

impl SnapshotStore for SqliteStore {
    fn put_snapshot(&self, set: &CachedResultSet) -> Result<SnapshotId, CacheError> {
        set.validate()?;
        let mut conn = self.lock()?;
        let tx = conn.transaction()?;
        let inserted = tx.execute(
            "INSERT INTO snapshots (title, language, retrieved_secs, retrieved_nanos, provider_id)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                set.query_key.title,
                set.query_key.language,
                set.retrieved_at.timestamp(),
                set.retrieved_at.timestamp_subsec_nanos(),
                set.provider_id,
            ],
        );
        match inserted {
            Err(rusqlite::Error::SqliteFailure(e, _)) if e.code == ErrorCode::ConstraintViolation => {
                return Err(CacheError::Conflict {
                    key: set.query_key.clone(),
                    retrieved_at: set.retrieved_at,
                });
            }
            other => {
                other?;
            }
        }
        let id = tx.last_insert_rowid();
        {
            let mut stmt = tx.prepare_cached(
                "INSERT INTO results (snapshot_id, rank, url, title, snippet)
                 VALUES (?1, ?2, ?3, ?4, ?5)",
            )?;
            for r in &set.results {
                stmt.execute(params![id, r.rank, r.url, r.title, r.snippet])?;
            }
        }
        tx.commit()?;
        Ok(id)
    }

    fn get_latest(&self, key: &QueryKey) -> Result<Option<CachedResultSet>, CacheError> {
        let conn = self.lock()?;
        Self::headers(&conn, key, true)?
            .into_iter()
            .next()
            .map(|h| Self::hydrate(&conn, h))
            .transpose()
    }

    fn list_snapshots(&self, key: &QueryKey) -> Result<Vec<CachedResultSet>, CacheError> {
        let conn = self.lock()?;
        Self::headers(&conn, key, false)?
            .into_iter()
            .map(|h| Self::hydrate(&conn, h))
            .collect()
    }

    fn keys(&self) -> Result<Vec<QueryKey>, CacheError> {
        let conn = self.lock()?;
        let mut stmt = conn.prepare_cached(
            "SELECT DISTINCT title, language FROM snapshots ORDER BY title, language",
        )?;
        let keys = stmt
            .query_map([], |row| {
                Ok(QueryKey {
                    title: row.get(0)?,
                    language: row.get(1)?,
                })
            })?
            .collect::<Result<Vec<_>, _>>()?;
        let mut keys = keys;
        keys.sort();
        Ok(keys)
    }
}

impl SqliteStore {
    /// Id of the newest snapshot for `key`, without loading its rows.
    pub fn latest_id(&self, key: &QueryKey) -> Result<Option<SnapshotId>, CacheError> {
        let conn = self.lock()?;
        Ok(conn
            .query_row(
                "SELECT id FROM snapshots WHERE title = ?1 AND language = ?2
                 ORDER BY retrieved_secs DESC, retrieved_nanos DESC LIMIT 1",
                params![key.title, key.language],
                |row| row.get(0),
            )
            .optional()?)
    }
}
