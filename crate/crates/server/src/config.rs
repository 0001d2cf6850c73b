//! Service configuration.
//!
//! Values come from, in increasing precedence: built-in defaults, the TOML
//! file given with `--config`, environment variables, command-line flags.
//! Relative paths in the file are resolved against the file's directory.

use std::fs;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Read { path: String, detail: String },
    #[error("invalid config {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{what} does not exist: {path}")]
    MissingPath { what: &'static str, path: String },
    #[error("invalid setting {key}: {detail}")]
    Invalid { key: &'static str, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Fixture,
    Live,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Directory of `<entity>__<lang>__<date>.tsv` recordings.
    pub fixture_dir: PathBuf,
    pub endpoint: String,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Fixture,
            fixture_dir: PathBuf::from("data/fixtures"),
            endpoint: "https://api.bing.microsoft.com/v7.0/search".to_owned(),
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchiveConfig {
    /// CDX endpoint, or `file://<path>` for a `url <TAB> timestamp` capture
    /// list served offline.
    pub endpoint: String,
    pub replay_base: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub row_timeout_secs: u64,
    /// Half-width of the capture window around a requested timepoint.
    pub window_days: i64,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://web.archive.org/cdx/search/cdx".to_owned(),
            replay_base: "https://web.archive.org/web/".to_owned(),
            timeout_ms: 5000,
            retries: 1,
            backoff_ms: 200,
            concurrency: 4,
            row_timeout_secs: 15,
            window_days: 90,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefreshConfig {
    pub interval_days: i64,
    /// `title <TAB> language` lines always refreshed.
    pub seeds: Option<PathBuf>,
    /// Also refresh every query already in the cache.
    pub include_cached_queries: bool,
}

impl Default for RefreshConfig {
    fn default() -> Self {
        Self {
            interval_days: 30,
            seeds: None,
            include_cached_queries: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: IpAddr,
    pub port: u16,
    pub languages: Vec<String>,
    pub data_dir: PathBuf,
    pub cache_path: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub suggest_limit: usize,
    pub related_limit: usize,
    pub provider: ProviderConfig,
    pub archive: ArchiveConfig,
    pub refresh: RefreshConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            languages: vec!["en".to_owned(), "de".to_owned()],
            data_dir: PathBuf::from("data"),
            cache_path: PathBuf::from("data/cache.sqlite"),
            static_dir: None,
            suggest_limit: 10,
            related_limit: 8,
            provider: ProviderConfig::default(),
            archive: ArchiveConfig::default(),
            refresh: RefreshConfig::default(),
        }
    }
}

/// Values that override the file, already merged from environment and
/// flags by the argument parser.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub port: Option<u16>,
    pub languages: Option<Vec<String>>,
    pub provider: Option<ProviderKind>,
    pub archive_endpoint: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            detail: e.to_string().replace('\n', " "),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.data_dir);
        rebase(base, &mut cfg.cache_path);
        rebase(base, &mut cfg.provider.fixture_dir);
        if let Some(p) = cfg.static_dir.as_mut() {
            rebase(base, p);
        }
        if let Some(p) = cfg.refresh.seeds.as_mut() {
            rebase(base, p);
        }
        if let Some(rest) = cfg.archive.endpoint.strip_prefix("file://") {
            let mut p = PathBuf::from(rest);
            rebase(base, &mut p);
            cfg.archive.endpoint = format!("file://{}", p.display());
        }
        Ok(cfg)
    }

    /// Defaults, then the optional file, then `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(port) = o.port {
            self.port = port;
        }
        if let Some(langs) = &o.languages {
            self.languages = langs.iter().map(|l| l.trim().to_owned()).collect();
        }
        if let Some(kind) = o.provider {
            self.provider.kind = kind;
        }
        if let Some(endpoint) = &o.archive_endpoint {
            self.archive.endpoint = endpoint.clone();
        }
        if let Some(dir) = &o.data_dir {
            self.data_dir = dir.clone();
        }
        if let Some(path) = &o.cache_path {
            self.cache_path = path.clone();
        }
        if let Some(dir) = &o.static_dir {
            self.static_dir = Some(dir.clone());
        }
    }

    pub fn entities_path(&self, lang: &str) -> PathBuf {
        self.data_dir.join("entities").join(format!("{lang}.tsv"))
    }

    pub fn views_path(&self, lang: &str) -> PathBuf {
        self.data_dir.join("views").join(format!("{lang}.tsv"))
    }

    pub fn links_path(&self, lang: &str) -> PathBuf {
        self.data_dir.join("links").join(format!("{lang}.tsv"))
    }

    pub fn interlang_path(&self) -> PathBuf {
        self.data_dir.join("interlang.tsv")
    }

    pub fn archive_file(&self) -> Option<PathBuf> {
        self.archive.endpoint.strip_prefix("file://").map(PathBuf::from)
    }

    pub fn check_languages(&self) -> Result<(), ConfigError> {
        if self.languages.is_empty() {
            return Err(ConfigError::Invalid {
                key: "languages",
                detail: "at least one language is required".into(),
            });
        }
        for (i, l) in self.languages.iter().enumerate() {
            if l.len() != 2 || !l.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(ConfigError::Invalid {
                    key: "languages",
                    detail: format!("{l:?} is not a two-letter code"),
                });
            }
            if self.languages[..i].contains(l) {
                return Err(ConfigError::Invalid {
                    key: "languages",
                    detail: format!("{l} listed twice"),
                });
            }
        }
        Ok(())
    }

    /// Everything `serve` needs: languages, intervals and every referenced
    /// path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check_languages()?;
        let must_exist = |what: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    what,
                    path: p.display().to_string(),
                })
            }
        };
        must_exist("data directory", &self.data_dir)?;
        for lang in &self.languages {
            must_exist("entity file", &self.entities_path(lang))?;
        }
        if let Some(parent) = self.cache_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            must_exist("cache directory", parent)?;
        }
        if let Some(dir) = &self.static_dir {
            must_exist("static directory", dir)?;
        }
        if self.provider.kind == ProviderKind::Fixture {
            must_exist("fixture directory", &self.provider.fixture_dir)?;
        }
        if let Some(seeds) = &self.refresh.seeds {
            must_exist("seed file", seeds)?;
        }
        match self.archive_file() {
            Some(f) => must_exist("archive capture file", &f)?,
            None => {
                if !(self.archive.endpoint.starts_with("http://")
                    || self.archive.endpoint.starts_with("https://"))
                {
                    return Err(ConfigError::Invalid {
                        key: "archive.endpoint",
                        detail: format!("{:?} is neither http(s) nor file://", self.archive.endpoint),
                    });
                }
            }
        }
        let positive = |key: &'static str, v: i64| {
            if v > 0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key,
                    detail: "must be positive".into(),
                })
            }
        };
        positive("refresh.interval_days", self.refresh.interval_days)?;
        positive("archive.window_days", self.archive.window_days)?;
        positive("archive.concurrency", self.archive.concurrency as i64)?;
        positive("suggest_limit", self.suggest_limit as i64)?;
        positive("related_limit", self.related_limit as i64)?;
        Ok(())
    }
}
