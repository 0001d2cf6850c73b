use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration as StdDuration;

use async_trait::async_trait;
use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::url::normalize_url;
use crate::tsv::{records, LineError};

const CDX_FORMAT: &str = "%Y%m%d%H%M%S";

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ArchiveError {
    #[error("archive lookup for {url} failed: {detail}")]
    Transport { url: String, detail: String },
    #[error("archive returned a malformed response for {url}: {detail}")]
    Protocol { url: String, detail: String },
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("capture window must be positive")]
    InvalidWindow,
}

/// Parse a 14-digit `YYYYMMDDhhmmss` capture timestamp.
pub fn parse_cdx_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if s.len() != 14 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    NaiveDateTime::parse_from_str(s, CDX_FORMAT)
        .ok()
        .map(|t| t.and_utc())
}

pub fn format_cdx_timestamp(t: &DateTime<Utc>) -> String {
    t.format(CDX_FORMAT).to_string()
}

/// Capture-date queries against a web archive.
#[async_trait]
pub trait ArchiveClient: Send + Sync {
    async fn earliest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError>;

    async fn latest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError>;

    /// Captures in `[from, to]`, in any order.
    async fn captures_between(
        &self,
        url: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<DateTime<Utc>>, ArchiveError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveSpan {
    pub url: String,
    pub first_capture: Option<DateTime<Utc>>,
    pub last_capture: Option<DateTime<Utc>>,
    pub archived: bool,
}

/// First and last capture of `url`, using exactly two upstream lookups.
pub async fn archive_span(url: &str, client: &dyn ArchiveClient) -> Result<ArchiveSpan, ArchiveError> {
    normalize_url(url).map_err(|_| ArchiveError::InvalidUrl(url.to_owned()))?;
    let (first, last) = futures::try_join!(client.earliest_capture(url), client.latest_capture(url))?;
    match (first, last) {
        (None, None) => Ok(ArchiveSpan {
            url: url.to_owned(),
            first_capture: None,
            last_capture: None,
            archived: false,
        }),
        (Some(f), Some(l)) if f <= l => Ok(ArchiveSpan {
            url: url.to_owned(),
            first_capture: Some(f),
            last_capture: Some(l),
            archived: true,
        }),
        (f, l) => Err(ArchiveError::Protocol {
            url: url.to_owned(),
            detail: format!("inconsistent span: earliest {f:?}, latest {l:?}"),
        }),
    }
}

/// Captures of `url` within `window` of `timepoint` (inclusive), ascending.
pub async fn captures_around(
    url: &str,
    timepoint: DateTime<Utc>,
    window: Duration,
    client: &dyn ArchiveClient,
) -> Result<Vec<DateTime<Utc>>, ArchiveError> {
    if window <= Duration::zero() {
        return Err(ArchiveError::InvalidWindow);
    }
    normalize_url(url).map_err(|_| ArchiveError::InvalidUrl(url.to_owned()))?;
    let (from, to) = (timepoint - window, timepoint + window);
    let mut captures: Vec<_> = client
        .captures_between(url, from, to)
        .await?
        .into_iter()
        .filter(|t| from <= *t && *t <= to)
        .collect();
    captures.sort();
    captures.dedup();
    Ok(captures)
}

#[derive(Debug, Clone)]
pub struct CdxConfig {
    /// Full URL of the CDX endpoint, e.g. `http://archive.example/cdx`.
    pub endpoint: String,
    pub timeout: StdDuration,
    pub retries: u32,
    /// Delay before the first retry; doubles on every further attempt.
    pub backoff: StdDuration,
}

impl CdxConfig {
    pub fn new(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.to_owned(),
            timeout: StdDuration::from_secs(5),
            retries: 1,
            backoff: StdDuration::from_millis(200),
        }
    }
}

/// HTTP client for a CDX-style endpoint answering with one 14-digit
/// timestamp per line.
#[derive(Debug, Clone)]
pub struct CdxClient {
    config: CdxConfig,
    http: reqwest::Client,
}

impl CdxClient {
    pub fn new(config: CdxConfig) -> Result<Self, ArchiveError> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ArchiveError::Transport {
                url: config.endpoint.clone(),
                detail: e.to_string(),
            })?;
        Ok(Self { config, http })
    }

    async fn get_once(&self, url: &str, params: &[(&str, String)]) -> Result<String, ArchiveError> {
        let transport = |detail: String| ArchiveError::Transport {
            url: url.to_owned(),
            detail,
        };
        let response = self
            .http
            .get(&self.config.endpoint)
            .query(params)
            .send()
            .await
            .map_err(|e| transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(transport(format!("status {status}")));
        }
        response.text().await.map_err(|e| transport(e.to_string()))
    }

    async fn get(&self, url: &str, params: &[(&str, String)]) -> Result<Vec<DateTime<Utc>>, ArchiveError> {
        let mut attempt = 0;
        let body = loop {
            match self.get_once(url, params).await {
                Ok(body) => break body,
                Err(e) if attempt >= self.config.retries => return Err(e),
                Err(e) => {
                    tracing::debug!(%url, attempt, error = %e, "retrying archive lookup");
                    tokio::time::sleep(self.config.backoff * 2u32.pow(attempt)).await;
                    attempt += 1;
                }
            }
        };
        body.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                parse_cdx_timestamp(l).ok_or_else(|| ArchiveError::Protocol {
                    url: url.to_owned(),
                    detail: format!("not a 14-digit timestamp: {l:?}"),
                })
            })
            .collect()
    }

    async fn single(&self, url: &str, order: &str) -> Result<Option<DateTime<Utc>>, ArchiveError> {
        let params = [
            ("url", url.to_owned()),
            ("order", order.to_owned()),
            ("limit", "1".to_owned()),
        ];
        let captures = self.get(url, &params).await?;
        if captures.len() > 1 {
            return Err(ArchiveError::Protocol {
                url: url.to_owned(),
                detail: format!("{} timestamps for a limit=1 query", captures.len()),
            });
        }
        Ok(captures.into_iter().next())
    }
}

#[async_trait]
impl ArchiveClient for CdxClient {
    async fn earliest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError> {
        self.single(url, "asc").await
    }

    async fn latest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError> {
        self.single(url, "desc").await
    }

    async fn captures_between(
        &self,
        url: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<DateTime<Utc>>, ArchiveError> {
        let params = [
            ("url", url.to_owned()),
            ("from", format_cdx_timestamp(&from)),
            ("to", format_cdx_timestamp(&to)),
        ];
        self.get(url, &params).await
    }
}

/// In-memory archive keyed by normalized URL. Counts every lookup and can
/// be told to fail for chosen URLs.
#[derive(Debug, Default)]
pub struct FixtureArchive {
    captures: HashMap<String, Vec<DateTime<Utc>>>,
    failing: HashSet<String>,
    requests: AtomicUsize,
}

impl FixtureArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load `url <TAB> YYYYMMDDhhmmss` lines.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, LineError> {
        let mut archive = Self::new();
        for row in records(reader) {
            let (line, f) = row?;
            if f.len() != 2 {
                return Err(LineError::new(line, "expected url and timestamp"));
            }
            let ts = parse_cdx_timestamp(f[1].trim())
                .ok_or_else(|| LineError::new(line, format!("bad timestamp {:?}", f[1])))?;
            normalize_url(f[0].trim()).map_err(|e| LineError::new(line, e.to_string()))?;
            archive.add_capture(f[0].trim(), ts);
        }
        Ok(archive)
    }

    fn key(url: &str) -> String {
        normalize_url(url).unwrap_or_else(|_| url.to_owned())
    }

    pub fn add_capture(&mut self, url: &str, at: DateTime<Utc>) {
        let list = self.captures.entry(Self::key(url)).or_default();
        if let Err(i) = list.binary_search(&at) {
            list.insert(i, at);
        }
    }

    pub fn fail_url(&mut self, url: &str) {
        self.failing.insert(Self::key(url));
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn lookup(&self, url: &str) -> Result<&[DateTime<Utc>], ArchiveError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let key = Self::key(url);
        if self.failing.contains(&key) {
            return Err(ArchiveError::Transport {
                url: url.to_owned(),
                detail: "injected failure".to_owned(),
            });
        }
        Ok(self.captures.get(&key).map(Vec::as_slice).unwrap_or(&[]))
    }
}

#[async_trait]
impl ArchiveClient for FixtureArchive {
    async fn earliest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError> {
        Ok(self.lookup(url)?.first().copied())
    }

    async fn latest_capture(&self, url: &str) -> Result<Option<DateTime<Utc>>, ArchiveError> {
        Ok(self.lookup(url)?.last().copied())
    }

    async fn captures_between(
        &self,
        url: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<DateTime<Utc>>, ArchiveError> {
        Ok(self
            .lookup(url)?
            .iter()
            .filter(|t| from <= **t && **t <= to)
            .copied()
            .collect())
    }
}
