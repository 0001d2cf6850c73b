use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::archive::{archive_span, captures_around, format_cdx_timestamp, ArchiveClient, ArchiveSpan};
use super::SearchResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchiveStatus {
    Archived,
    NotArchived,
    /// The archive lookup failed; see `warning`.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedResult {
    pub result: SearchResult,
    /// Link to the live page.
    pub live_link: String,
    /// Link into the archive; present exactly when the URL is archived.
    pub archive_link: Option<String>,
    pub archive_status: ArchiveStatus,
    pub span: Option<ArchiveSpan>,
    /// Captures near the requested timepoint, when one was given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub captures_near: Vec<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalIntent {
    pub timepoint: DateTime<Utc>,
    pub window: Duration,
}

#[derive(Debug, Clone)]
pub struct LinkOptions {
    /// Archive lookups in flight at once for one result set.
    pub concurrency: usize,
    /// Upper bound for all lookups of a single row.
    pub row_timeout: StdDuration,
    /// Prefix of archive replay links; the 14-digit capture time and the
    /// live URL are appended.
    pub replay_base: String,
    pub temporal: Option<TemporalIntent>,
}

impl Default for LinkOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            row_timeout: StdDuration::from_secs(15),
            replay_base: "https://web.archive.org/web/".to_owned(),
            temporal: None,
        }
    }
}

fn replay_link(base: &str, capture: &DateTime<Utc>, url: &str) -> String {
    format!("{base}{}/{url}", format_cdx_timestamp(capture))
}

/// The capture nearest to `timepoint`; the earlier one on a tie.
fn nearest(captures: &[DateTime<Utc>], timepoint: DateTime<Utc>) -> Option<DateTime<Utc>> {
    captures
        .iter()
        .min_by_key(|t| ((**t - timepoint).abs(), **t))
        .copied()
}

async fn link_one(result: SearchResult, client: &dyn ArchiveClient, options: &LinkOptions) -> LinkedResult {
    let unknown = |result: SearchResult, warning: String| LinkedResult {
        live_link: result.url.clone(),
        result,
        archive_link: None,
        archive_status: ArchiveStatus::Unknown,
        span: None,
        captures_near: Vec::new(),
        warning: Some(warning),
    };

    let lookup = async {
        let span = archive_span(&result.url, client).await?;
        let near = match (&options.temporal, span.archived) {
            (Some(intent), true) => {
                Some(captures_around(&result.url, intent.timepoint, intent.window, client).await)
            }
            _ => None,
        };
        Ok::<_, super::ArchiveError>((span, near))
    };
    let (span, near) = match tokio::time::timeout(options.row_timeout, lookup).await {
        Err(_) => return unknown(result, "archive lookup timed out".to_owned()),
        Ok(Err(e)) => return unknown(result, e.to_string()),
        Ok(Ok(found)) => found,
    };

    let mut warning = None;
    let mut captures_near = Vec::new();
    let archive_link = span.last_capture.map(|latest| {
        let chosen = match (near, &options.temporal) {
            (Some(Ok(captures)), Some(intent)) => {
                let pick = nearest(&captures, intent.timepoint).unwrap_or(latest);
                captures_near = captures;
                pick
            }
            (Some(Err(e)), _) => {
                warning = Some(e.to_string());
                latest
            }
            _ => latest,
        };
        replay_link(&options.replay_base, &chosen, &result.url)
    });

    LinkedResult {
        live_link: result.url.clone(),
        archive_status: if span.archived {
            ArchiveStatus::Archived
        } else {
            ArchiveStatus::NotArchived
        },
        archive_link,
        span: Some(span),
        captures_near,
        warning,
        result,
    }
}

/// Pair every result with its archive span, keeping input order. A failed
/// lookup marks only its own row as [`ArchiveStatus::Unknown`].
pub async fn link_results(
    results: &[SearchResult],
    client: &dyn ArchiveClient,
    options: &LinkOptions,
) -> Vec<LinkedResult> {
    stream::iter(results.iter().cloned())
        .map(|r| link_one(r, client, options))
        .buffered(options.concurrency.max(1))
        .collect()
        .await
}
