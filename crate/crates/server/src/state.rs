use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration as StdDuration;

use anyhow::{bail, Context};
use arc_swap::ArcSwap;
use chrono::Duration;

use archivesearch_core::entity_graph::{load_graph, parse_interlanguage, InterLanguageMap, LinkGraph};
use archivesearch_core::entity_index::{
    parse_entities, parse_view_totals, EntityId, EntityIndex, EntityRecord,
};
use archivesearch_core::result_cache::{CachedSearch, SnapshotStore, SqliteStore};
use archivesearch_core::search_gateway::{
    ArchiveClient, BingProvider, CdxClient, CdxConfig, FixtureArchive, FixtureProvider,
    LinkOptions, SearchProvider,
};
use archivesearch_core::{Clock, SystemClock};

use crate::config::{ProviderKind, ServiceConfig};

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Entity records for `lang`, with staged view totals applied when present.
pub fn load_records(config: &ServiceConfig, lang: &str) -> anyhow::Result<Vec<EntityRecord>> {
    let path = config.entities_path(lang);
    let mut records =
        parse_entities(open(&path)?).with_context(|| path.display().to_string())?;
    if let Some(other) = records.iter().find(|r| r.language != lang) {
        bail!(
            "{}: entity {} has language {}",
            path.display(),
            other.entity_id,
            other.language
        );
    }
    let views_path = config.views_path(lang);
    if views_path.exists() {
        let views = parse_view_totals(open(&views_path)?)
            .with_context(|| views_path.display().to_string())?;
        for r in &mut records {
            r.cumulative_views = views.get(&r.entity_id).copied().unwrap_or(0);
        }
    }
    Ok(records)
}

pub struct LanguageData {
    pub index: EntityIndex,
    pub graph: Option<LinkGraph>,
    pub popularity: HashMap<EntityId, u64>,
}

impl LanguageData {
    pub fn new(index: EntityIndex, graph: Option<LinkGraph>) -> Self {
        let popularity = index.ranked_ids().map(|(id, v)| (id.clone(), v)).collect();
        Self {
            index,
            graph,
            popularity,
        }
    }

    /// An entity given by title, redirect-free id, or id with spaces.
    pub fn resolve(&self, entity: &str) -> Option<EntityId> {
        if let Some(id) = self.index.find_title(entity) {
            return Some(id.clone());
        }
        let trimmed = entity.trim();
        [trimmed.to_owned(), trimmed.replace(' ', "_")]
            .into_iter()
            .map(EntityId::new)
            .find(|id| self.index.contains(id) || self.graph.as_ref().is_some_and(|g| g.contains(id)))
    }

    pub fn title(&self, id: &EntityId) -> String {
        self.index
            .title_of(id)
            .map(str::to_owned)
            .unwrap_or_else(|| id.as_str().replace('_', " "))
    }
}

/// Immutable read side of the service; replaced wholesale on reload.
pub struct Catalog {
    pub languages: BTreeMap<String, LanguageData>,
    pub interlang: InterLanguageMap,
}

impl Catalog {
    pub fn load(config: &ServiceConfig) -> anyhow::Result<Self> {
        let mut languages = BTreeMap::new();
        for lang in &config.languages {
            let records = load_records(config, lang)?;
            let index = EntityIndex::build(&records)
                .with_context(|| config.entities_path(lang).display().to_string())?;
            let links = config.links_path(lang);
            let graph = if links.exists() {
                Some(load_graph(open(&links)?, lang).with_context(|| links.display().to_string())?)
            } else {
                tracing::warn!(lang, "no link graph; related entities unavailable");
                None
            };
            languages.insert(lang.clone(), LanguageData::new(index, graph));
        }
        let il = config.interlang_path();
        let interlang = if il.exists() {
            parse_interlanguage(open(&il)?).with_context(|| il.display().to_string())?
        } else {
            InterLanguageMap::new()
        };
        Ok(Self {
            languages,
            interlang,
        })
    }
}

pub fn build_provider(config: &ServiceConfig) -> anyhow::Result<Arc<dyn SearchProvider>> {
    Ok(match config.provider.kind {
        ProviderKind::Fixture => Arc::new(FixtureProvider::from_dir(&config.provider.fixture_dir)?),
        ProviderKind::Live => Arc::new(BingProvider::from_env(
            &config.provider.endpoint,
            StdDuration::from_secs(config.provider.timeout_secs),
        )?),
    })
}

pub fn build_archive(config: &ServiceConfig) -> anyhow::Result<Arc<dyn ArchiveClient>> {
    if let Some(path) = config.archive_file() {
        let archive = FixtureArchive::from_tsv(open(&path)?)
            .with_context(|| path.display().to_string())?;
        return Ok(Arc::new(archive));
    }
    let mut cdx = CdxConfig::new(&config.archive.endpoint);
    cdx.timeout = StdDuration::from_millis(config.archive.timeout_ms);
    cdx.retries = config.archive.retries;
    cdx.backoff = StdDuration::from_millis(config.archive.backoff_ms);
    Ok(Arc::new(CdxClient::new(cdx)?))
}

pub fn open_store(config: &ServiceConfig) -> anyhow::Result<Arc<dyn SnapshotStore>> {
    let store = SqliteStore::open(&config.cache_path)
        .with_context(|| format!("cache {}", config.cache_path.display()))?;
    Ok(Arc::new(store))
}

pub struct AppState {
    pub config: ServiceConfig,
    pub catalog: ArcSwap<Catalog>,
    pub search: CachedSearch,
    pub archive: Arc<dyn ArchiveClient>,
    pub link_options: LinkOptions,
}

impl AppState {
    pub fn new(
        config: ServiceConfig,
        catalog: Catalog,
        store: Arc<dyn SnapshotStore>,
        provider: Arc<dyn SearchProvider>,
        archive: Arc<dyn ArchiveClient>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let search = CachedSearch::new(
            store,
            provider,
            clock,
            Duration::days(config.refresh.interval_days),
        );
        let link_options = LinkOptions {
            concurrency: config.archive.concurrency,
            row_timeout: StdDuration::from_secs(config.archive.row_timeout_secs),
            replay_base: config.archive.replay_base.clone(),
            temporal: None,
        };
        Self {
            config,
            catalog: ArcSwap::from_pointee(catalog),
            search,
            archive,
            link_options,
        }
    }

    /// Validate `config` and build every component from it.
    pub fn from_config(config: ServiceConfig) -> anyhow::Result<Self> {
        config.validate()?;
        let catalog = Catalog::load(&config)?;
        let store = open_store(&config)?;
        let provider = build_provider(&config)?;
        let archive = build_archive(&config)?;
        Ok(Self::new(config, catalog, store, provider, archive, Arc::new(SystemClock)))
    }

    /// Rebuild indices and graphs from disk and swap them in. Requests in
    /// flight keep the catalog they started with.
    pub fn reload(&self) -> anyhow::Result<()> {
        let catalog = Catalog::load(&self.config)?;
        self.catalog.store(Arc::new(catalog));
        Ok(())
    }
}
