use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand};

use archivesearch_core::analytics::{
    aggregate_annotations, bucket_entities, category_overlap, coverage, parse_annotations,
    parse_archived_flags, write_annotations_tsv, write_coverage_full_tsv, write_coverage_tsv,
    write_overlap_tsv, DEFAULT_BUCKET_SIZE,
};
use archivesearch_core::entity_graph::{load_graph, parse_interlanguage};
use archivesearch_core::entity_index::{
    aggregate_page_views, parse_entities, parse_page_views, parse_view_totals, write_entities,
    write_view_totals, DateWindow, EntityIndex, EntityRecord, PageViewLedger,
};
use archivesearch_core::result_cache::{
    export_snapshots, load_manifest, refresh_due, CachedResultSet, CachedSearch, QueryKey,
    RefreshPolicy,
};
use archivesearch_core::tsv::{records, LineError};
use archivesearch_core::{Clock, SystemClock};

use crate::config::{Overrides, ProviderKind, ServiceConfig};
use crate::state::{build_provider, open_store, AppState};

#[derive(Debug, Parser)]
#[command(name = "archivesearch", version, about = "Entity-oriented web archive search gateway")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "ARCHIVESEARCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "ARCHIVESEARCH_PORT")]
    pub port: Option<u16>,
    /// Comma-separated language codes.
    #[arg(long, global = true, env = "ARCHIVESEARCH_LANGS", value_delimiter = ',')]
    pub lang: Option<Vec<String>>,
    #[arg(long, global = true, env = "ARCHIVESEARCH_PROVIDER")]
    pub provider: Option<ProviderKind>,
    /// CDX endpoint URL, or file://<path> for an offline capture list.
    #[arg(long, global = true, env = "ARCHIVESEARCH_ARCHIVE_ENDPOINT")]
    pub archive_endpoint: Option<String>,
    #[arg(long, global = true, env = "ARCHIVESEARCH_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// SQLite file holding cached result snapshots.
    #[arg(long, global = true, env = "ARCHIVESEARCH_CACHE")]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, env = "ARCHIVESEARCH_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            port: self.port,
            languages: self.lang.clone(),
            provider: self.provider,
            archive_endpoint: self.archive_endpoint.clone(),
            data_dir: self.data_dir.clone(),
            cache_path: self.cache.clone(),
            static_dir: self.static_dir.clone(),
        }
    }

    /// The single language named by `--lang`, if exactly one was given.
    fn single_lang(&self) -> anyhow::Result<Option<String>> {
        match self.lang.as_deref() {
            None => Ok(None),
            Some([one]) => Ok(Some(one.trim().to_owned())),
            Some(_) => bail!("--lang must name exactly one language for this command"),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an entity file and stage it per language.
    IngestEntities {
        #[arg(long)]
        input: PathBuf,
    },
    /// Aggregate daily page views over redirects for one language.
    IngestViews {
        #[arg(long)]
        input: PathBuf,
        /// First day counted (default 2011-01-01).
        #[arg(long)]
        from: Option<NaiveDate>,
        /// Last day counted (default 2014-12-31).
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Validate and stage a link graph for one language.
    IngestLinks {
        #[arg(long)]
        input: PathBuf,
    },
    /// Validate and stage inter-language links.
    IngestInterlang {
        #[arg(long)]
        input: PathBuf,
    },
    /// Re-fetch every query whose newest snapshot is older than the refresh
    /// interval.
    Refresh {
        /// `title <TAB> language` seed file (overrides the configured one).
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
    /// Write every cached snapshot as a results TSV plus manifest.tsv.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Analyze(Analyze),
    /// Run the HTTP service.
    Serve,
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    /// Archived share of the top-k results per popularity bucket.
    Coverage {
        #[arg(long)]
        manifest: PathBuf,
        /// `url <TAB> 0|1` lines.
        #[arg(long)]
        archived: PathBuf,
        /// Entity file used for the popularity order (default: the staged
        /// entity file of the language).
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// `entity_id <TAB> views` totals (default: the staged totals).
        #[arg(long)]
        views: Option<PathBuf>,
        /// 1-based start ranks of the buckets.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        positions: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_BUCKET_SIZE)]
        bucket_size: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        cutoffs: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write exact per-cutoff values here.
        #[arg(long)]
        full: Option<PathBuf>,
    },
    /// Mean top-k overlap between retrieval periods, per entity category.
    Overlap {
        #[arg(long)]
        manifest: PathBuf,
        /// `YYYY-MM` periods; every pair is compared.
        #[arg(long, value_delimiter = ',', required = true)]
        periods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        k: Vec<usize>,
        /// Entity file supplying categories.
        #[arg(long)]
        entities: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long/short-term relevance split from assessor labels.
    Annotations {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::IngestEntities { .. } => "ingest-entities",
            Command::IngestViews { .. } => "ingest-views",
            Command::IngestLinks { .. } => "ingest-links",
            Command::IngestInterlang { .. } => "ingest-interlang",
            Command::Refresh { .. } => "refresh",
            Command::Export { .. } => "export",
            Command::Analyze(Analyze::Coverage { .. }) => "analyze coverage",
            Command::Analyze(Analyze::Overlap { .. }) => "analyze overlap",
            Command::Analyze(Analyze::Annotations { .. }) => "analyze annotations",
            Command::Serve => "serve",
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn with_path<T>(path: &Path, r: Result<T, LineError>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Write through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(
            File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?,
        );
        body(&mut out).with_context(|| format!("cannot write {}", tmp.display()))?;
        out.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Report to `out`, or stdout when no path is given.
fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, body),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn parse_seeds(path: &Path) -> anyhow::Result<Vec<QueryKey>> {
    let mut out = Vec::new();
    for row in records(open(path)?) {
        let (line, f) = with_path(path, row)?;
        if f.len() != 2 || f[0].trim().is_empty() || f[1].trim().is_empty() {
            bail!("{}: line {line}: expected `title <TAB> language`", path.display());
        }
        out.push(QueryKey::new(&f[0], &f[1]));
    }
    Ok(out)
}

fn read_entities(path: &Path) -> anyhow::Result<Vec<EntityRecord>> {
    with_path(path, parse_entities(open(path)?))
}

pub async fn run(cli: Cli) -> anyhow::Result<()> {
    let config = ServiceConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    match cli.command {
        Command::IngestEntities { input } => ingest_entities(&config, &input),
        Command::IngestViews { input, from, to } => {
            let lang = cli.global.single_lang()?.context("--lang is required")?;
            ingest_views(&config, &lang, &input, from, to)
        }
        Command::IngestLinks { input } => {
            let lang = cli.global.single_lang()?.context("--lang is required")?;
            let graph = with_graph_path(&input, load_graph(open(&input)?, &lang))?;
            let dest = config.links_path(&lang);
            let text = fs::read(&input).with_context(|| format!("cannot read {}", input.display()))?;
            write_atomic(&dest, |w| w.write_all(&text))?;
            println!(
                "{} articles, W={} ({lang})",
                graph.article_count(),
                graph.total_articles()
            );
            Ok(())
        }
        Command::IngestInterlang { input } => {
            let map = parse_interlanguage(open(&input)?)
                .map_err(|e| anyhow::anyhow!("{}: {e}", input.display()))?;
            let text = fs::read(&input).with_context(|| format!("cannot read {}", input.display()))?;
            write_atomic(&config.interlang_path(), |w| w.write_all(&text))?;
            println!("{} inter-language links", map.len());
            Ok(())
        }
        Command::Refresh { seeds } => refresh(&config, seeds.as_deref(), Arc::new(SystemClock)).await,
        Command::Export { out } => {
            let store = open_store(&config)?;
            let entries = export_snapshots(store.as_ref(), &out)?;
            println!("{} snapshots exported", entries.len());
            Ok(())
        }
        Command::Analyze(a) => analyze(&config, cli.global.single_lang()?, a),
        Command::Serve => serve(config).await,
    }
}

fn with_graph_path<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn ingest_entities(config: &ServiceConfig, input: &Path) -> anyhow::Result<()> {
    let records = read_entities(input)?;
    let mut by_lang: BTreeMap<String, Vec<EntityRecord>> = BTreeMap::new();
    for r in records {
        by_lang.entry(r.language.clone()).or_default().push(r);
    }
    if by_lang.is_empty() {
        bail!("{}: no entities", input.display());
    }
    for (lang, recs) in &by_lang {
        EntityIndex::build(recs).map_err(|e| anyhow::anyhow!("{}: {e}", input.display()))?;
        write_atomic(&config.entities_path(lang), |w| write_entities(w, recs))?;
        println!("{} entities ({lang})", recs.len());
    }
    Ok(())
}

fn ingest_views(
    config: &ServiceConfig,
    lang: &str,
    input: &Path,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> anyhow::Result<()> {
    let default = DateWindow::four_years();
    let window = DateWindow::new(from.unwrap_or(default.start()), to.unwrap_or(default.end()))?;
    let entities = config.entities_path(lang);
    let records = read_entities(&entities)?;
    let mut ledger = PageViewLedger::new(window);
    ledger.add_redirects_from(&records);
    let lines = with_path(input, parse_page_views(open(input)?, &mut ledger))?;
    let totals = aggregate_page_views(&ledger, &records)?;
    write_atomic(&config.views_path(lang), |w| write_view_totals(w, &totals.views))?;
    println!(
        "{lines} lines, {} entities, {} orphan views ({lang})",
        totals.views.len(),
        totals.orphan_total()
    );
    for (title, n) in &totals.orphans {
        tracing::warn!(title, views = n, "page views matched no entity");
    }
    Ok(())
}

/// Refresh every due key; prints `N refreshed` and fails when any key failed.
pub async fn refresh(config: &ServiceConfig, seeds: Option<&Path>, clock: Arc<dyn Clock>) -> anyhow::Result<()> {
    config.check_languages()?;
    if config.refresh.interval_days <= 0 {
        bail!("refresh.interval_days must be positive");
    }
    let seed_path = seeds.map(Path::to_path_buf).or_else(|| config.refresh.seeds.clone());
    let seeds = match &seed_path {
        Some(p) => parse_seeds(p)?,
        None => Vec::new(),
    };
    let store = open_store(config)?;
    let interval = Duration::days(config.refresh.interval_days);
    let mut policy = RefreshPolicy::new(interval, seeds)?;
    policy.include_cached_queries = config.refresh.include_cached_queries;
    let due = refresh_due(store.as_ref(), &policy, clock.now())?;
    if due.is_empty() {
        println!("0 refreshed");
        return Ok(());
    }
    let provider = build_provider(config)?;
    let search = CachedSearch::new(store, provider, clock, interval);
    let mut done = 0;
    let mut failed = Vec::new();
    for key in &due {
        match search.refresh(key).await {
            Ok(_) => done += 1,
            Err(e) => {
                tracing::warn!(key = %key, error = %e, "refresh failed");
                failed.push(key.to_string());
            }
        }
    }
    println!("{done} refreshed");
    if !failed.is_empty() {
        bail!("{} of {} refreshes failed: {}", failed.len(), due.len(), failed.join(", "));
    }
    Ok(())
}

fn latest_per_key(snapshots: Vec<CachedResultSet>) -> HashMap<QueryKey, CachedResultSet> {
    let mut out: HashMap<QueryKey, CachedResultSet> = HashMap::new();
    for s in snapshots {
        match out.get(&s.query_key) {
            Some(prev) if prev.retrieved_at >= s.retrieved_at => {}
            _ => {
                out.insert(s.query_key.clone(), s);
            }
        }
    }
    out
}

fn analyze(config: &ServiceConfig, lang: Option<String>, command: Analyze) -> anyhow::Result<()> {
    match command {
        Analyze::Coverage {
            manifest,
            archived,
            ranking,
            views,
            positions,
            bucket_size,
            cutoffs,
            out,
            full,
        } => {
            let mut records = match (&ranking, &lang) {
                (Some(path), _) => read_entities(path)?,
                (None, Some(l)) => read_entities(&config.entities_path(l))?,
                (None, None) => bail!("--ranking or --lang is required"),
            };
            if let Some(l) = &lang {
                records.retain(|r| &r.language == l);
            }
            let views_path = views.or_else(|| {
                let p = config.views_path(lang.as_deref()?);
                (ranking.is_none() && p.exists()).then_some(p)
            });
            if let Some(path) = views_path {
                let totals = with_path(&path, parse_view_totals(open(&path)?))?;
                for r in &mut records {
                    r.cumulative_views = totals.get(&r.entity_id).copied().unwrap_or(0);
                }
            }
            let index = EntityIndex::build(&records)?;
            let ranked: Vec<_> = index.ranked_ids().map(|(id, _)| id.clone()).collect();
            let buckets = bucket_entities(&ranked, &positions, bucket_size)?;
            let latest = latest_per_key(load_manifest(&manifest)?);
            let language = index.language().to_owned();
            let mut results = HashMap::new();
            for b in &buckets {
                for id in &b.entity_ids {
                    let title = index.title_of(id).unwrap_or(id.as_str());
                    if let Some(s) = latest.get(&QueryKey::new(title, &language)) {
                        results.insert(id.clone(), s.results.iter().map(|r| r.url.clone()).collect());
                    }
                }
            }
            let flags = with_path(&archived, parse_archived_flags(open(&archived)?))?;
            let report = coverage(&buckets, &results, &|u| flags.get(u), &cutoffs)?;
            if let Some(path) = full {
                write_atomic(&path, |w| write_coverage_full_tsv(w, &report))?;
            }
            emit(out.as_deref(), |w| write_coverage_tsv(w, &report))
        }
        Analyze::Overlap {
            manifest,
            periods,
            k,
            entities,
            out,
        } => {
            let snapshots = load_manifest(&manifest)?;
            let mut categories = BTreeMap::new();
            if let Some(path) = entities {
                for r in read_entities(&path)? {
                    if let Some(c) = r.category {
                        categories.insert(QueryKey::new(&r.canonical_title, &r.language), c);
                    }
                }
            }
            let report = category_overlap(&snapshots, &categories, &periods, &k)?;
            for w in &report.warnings {
                tracing::warn!(category = %w.category, "no entity with snapshots in both periods");
            }
            emit(out.as_deref(), |w| write_overlap_tsv(w, &report))
        }
        Analyze::Annotations { file, out } => {
            let records = with_path(&file, parse_annotations(open(&file)?))?;
            let rows = aggregate_annotations(&records);
            emit(out.as_deref(), |w| write_annotations_tsv(w, &rows))
        }
    }
}

async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let addr = SocketAddr::new(config.listen, config.port);
    let state = Arc::new(AppState::from_config(config)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(%addr, "listening");
    #[cfg(unix)]
    {
        let state = state.clone();
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hup) = signal(SignalKind::hangup()) else {
                return;
            };
            while hup.recv().await.is_some() {
                match state.reload() {
                    Ok(()) => tracing::info!("catalog reloaded"),
                    Err(e) => tracing::error!(error = %format!("{e:#}"), "reload failed; keeping old catalog"),
                }
            }
        });
    }
    axum::serve(listener, crate::api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
