//! Flat-file export of the cache: one results TSV per snapshot plus a
//! `manifest.tsv` listing `query, language, retrieved_at, file`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use super::{CacheError, CachedResultSet, QueryKey, SnapshotStore};
use crate::search_gateway::{parse_results_tsv, write_results_tsv, SearchResult};
use crate::tsv::{records, sanitize_cell, LineError};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub query: String,
    pub language: String,
    pub retrieved_at: DateTime<Utc>,
    /// Relative to the manifest's directory.
    pub file: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Malformed {
        path: String,
        #[source]
        source: LineError,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `<title>__<lang>__<YYYY-MM-DDTHHMMSS[.fff]Z>.tsv`, with spaces in the
/// title written as underscores.
pub fn snapshot_file_name(key: &QueryKey, at: &DateTime<Utc>) -> String {
    let title: String = key
        .title
        .chars()
        .map(|c| if c == ' ' || c == '/' || c == '\\' { '_' } else { c })
        .collect();
    format!(
        "{title}__{}__{}.tsv",
        key.language,
        at.format("%Y-%m-%dT%H%M%S%.fZ")
    )
}

/// Writes every snapshot in `store` under `dir` and returns the manifest
/// entries in the order written.
pub fn export_snapshots(store: &dyn SnapshotStore, dir: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for key in store.keys()? {
        for snap in store.list_snapshots(&key)? {
            let name = snapshot_file_name(&key, &snap.retrieved_at);
            let path = dir.join(&name);
            let file = File::create(&path).map_err(io_err(&path))?;
            let mut out = BufWriter::new(file);
            write_results_tsv(&mut out, &snap.results).map_err(io_err(&path))?;
            out.flush().map_err(io_err(&path))?;
            entries.push(ManifestEntry {
                query: key.title.clone(),
                language: key.language.clone(),
                retrieved_at: snap.retrieved_at,
                file: PathBuf::from(name),
            });
        }
    }
    let manifest = dir.join(MANIFEST_FILE);
    let file = File::create(&manifest).map_err(io_err(&manifest))?;
    let mut out = BufWriter::new(file);
    for e in &entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            sanitize_cell(&e.query),
            e.language,
            e.retrieved_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            e.file.display()
        )
        .map_err(io_err(&manifest))?;
    }
    out.flush().map_err(io_err(&manifest))?;
    Ok(entries)
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<ManifestEntry>, LineError> {
    let mut out = Vec::new();
    for rec in records(reader) {
        let (line, fields) = rec?;
        if fields.len() != 4 {
            return Err(LineError::new(line, format!("expected 4 fields, found {}", fields.len())));
        }
        let retrieved_at = DateTime::parse_from_rfc3339(&fields[2])
            .map_err(|e| LineError::new(line, format!("bad retrieved_at {:?}: {e}", fields[2])))?
            .with_timezone(&Utc);
        if fields[0].trim().is_empty() || fields[1].trim().is_empty() || fields[3].trim().is_empty() {
            return Err(LineError::new(line, "empty field"));
        }
        out.push(ManifestEntry {
            query: fields[0].clone(),
            language: fields[1].clone(),
            retrieved_at,
            file: PathBuf::from(&fields[3]),
        });
    }
    Ok(out)
}

/// Reads a manifest and every result file it lists.
pub fn load_manifest(manifest_path: &Path) -> Result<Vec<CachedResultSet>, ManifestError> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let file = File::open(manifest_path).map_err(io_err(manifest_path))?;
    let entries = read_manifest(BufReader::new(file)).map_err(|source| ManifestError::Malformed {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let path = base.join(&e.file);
        let file = File::open(&path).map_err(io_err(&path))?;
        let results: Vec<SearchResult> =
            parse_results_tsv(BufReader::new(file)).map_err(|source| ManifestError::Malformed {
                path: path.display().to_string(),
                source,
            })?;
        out.push(CachedResultSet {
            query_key: QueryKey::new(&e.query, &e.language),
            retrieved_at: e.retrieved_at,
            results,
            provider_id: "manifest".to_owned(),
        });
    }
    Ok(out)
}
