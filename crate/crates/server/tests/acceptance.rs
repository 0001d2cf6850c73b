//! One pass/fail line per headline requirement. Limits are pinned below.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration as StdDuration, Instant};

use axum::body::Body;
use axum::http::Request;
use chrono::{DateTime, Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use tower::ServiceExt;

use archivesearch_core::analytics::{aggregate_annotations, format_half_up, overlap, parse_annotations};
use archivesearch_core::entity_graph::{relatedness_from_counts, LinkGraph, RelatednessScore};
use archivesearch_core::entity_index::{index_variants, EntityId, EntityIndex, EntityRecord};
use archivesearch_core::result_cache::{
    load_manifest, refresh_due, CacheError, CachedResultSet, MemoryStore, QueryKey, RefreshPolicy,
    SnapshotStore, SqliteStore,
};
use archivesearch_core::search_gateway::{
    archive_span, parse_cdx_timestamp, CdxClient, CdxConfig, FixtureArchive, FixtureProvider, SearchResult,
};
use archivesearch_core::FixedClock;
use archivesearch_server::api::router;
use archivesearch_server::config::{Overrides, ServiceConfig};
use archivesearch_server::state::{AppState, Catalog};

const RELATEDNESS_TOL: f64 = 1e-12;
const RELATEDNESS_GRAPHS: usize = 1000;
const RELATEDNESS_LIMIT: StdDuration = StdDuration::from_secs(10);
const SUGGEST_PREFIXES: usize = 500;
const SUGGEST_LIMIT: StdDuration = StdDuration::from_secs(5);
const SPAN_SETS: usize = 100;
const CACHE_OPS: usize = 1000;
const SUITE_LIMIT: StdDuration = StdDuration::from_secs(120);

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn relatedness_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut pairs = 0usize;
    let mut worst = 0f64;
    for i in 0..RELATEDNESS_GRAPHS {
        let g = support::random_graph(&mut rng, 50, 200);
        let graph = LinkGraph::from_edges("en", g.edges.iter().map(|(a, b)| (a, b)), g.total)
            .map_err(|e| format!("graph {i}: {e}"))?;
        for a in g.inlinks.keys() {
            let ida = EntityId::new(a.as_str());
            check(
                graph.relatedness(&ida, &ida).unwrap() == RelatednessScore::Related(0.0),
                format!("graph {i}: self distance of {a} is not 0"),
            )?;
            for b in g.inlinks.keys() {
                let idb = EntityId::new(b.as_str());
                let ab = graph.relatedness(&ida, &idb).unwrap();
                check(ab == graph.relatedness(&idb, &ida).unwrap(), format!("graph {i}: asymmetric {a},{b}"))?;
                let want = support::oracle_relatedness(&g.inlinks[a], &g.inlinks[b], g.total);
                match (ab, want) {
                    (RelatednessScore::Unrelated, None) => {}
                    (RelatednessScore::Related(x), Some(y)) => worst = worst.max((x - y).abs()),
                    other => return Err(format!("graph {i}: {a},{b}: {other:?}")),
                }
                pairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst <= RELATEDNESS_TOL, format!("max error {worst:e}"))?;
    check(elapsed < RELATEDNESS_LIMIT, format!("took {elapsed:?}"))?;
    Ok(format!("{RELATEDNESS_GRAPHS} graphs, {pairs} pairs, max error {worst:e}, {elapsed:.2?}"))
}

fn one_third() -> Outcome {
    let RelatednessScore::Related(v) = relatedness_from_counts(4, 2, 2, 16) else {
        return Err("unrelated".into());
    };
    let err = (v - 1.0 / 3.0).abs();
    check(err <= RELATEDNESS_TOL, format!("{v} differs from 1/3 by {err:e}"))?;
    Ok(format!("{v:.15}"))
}

fn suggest_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let records = support::random_corpus(&mut rng, 200, "en");
    let accented = records.iter().filter(|r| !r.canonical_title.is_ascii()).count();
    let start = Instant::now();
    let index = EntityIndex::build(&records).map_err(|e| e.to_string())?;
    let prefixes = support::random_prefixes(&mut rng, &records, SUGGEST_PREFIXES);
    for p in &prefixes {
        let got: Vec<(String, String)> = index
            .suggest(p, 10)
            .into_iter()
            .map(|s| (s.entity_id.0, s.matched_surface))
            .collect();
        check(got == support::oracle_suggest(&records, p, 10), format!("prefix {p:?}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < SUGGEST_LIMIT, format!("took {elapsed:?}"))?;
    Ok(format!("{} prefixes, {accented} accented titles, {elapsed:.2?}", prefixes.len()))
}

fn demo_state() -> (Arc<AppState>, Arc<FixtureProvider>, Arc<FixedClock>) {
    let config =
        ServiceConfig::load(Some(&fixtures().join("demo/config.toml")), &Overrides::default()).unwrap();
    let catalog = Catalog::load(&config).unwrap();
    let provider = Arc::new(FixtureProvider::from_dir(&config.provider.fixture_dir).unwrap());
    let archive =
        FixtureArchive::from_tsv(BufReader::new(File::open(config.archive_file().unwrap()).unwrap())).unwrap();
    let clock = Arc::new(FixedClock::new(Utc.with_ymd_and_hms(2016, 1, 19, 0, 0, 0).unwrap()));
    let state = AppState::new(
        config,
        catalog,
        Arc::new(MemoryStore::new()),
        provider.clone(),
        Arc::new(archive),
        clock.clone(),
    );
    (Arc::new(state), provider, clock)
}

async fn get_json(state: &Arc<AppState>, uri: &str) -> Result<serde_json::Value, String> {
    let response = router(state.clone())
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .map_err(|e| e.to_string())?;
    let status = response.status();
    let bytes = response.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
    check(status.is_success(), format!("{uri}: {status}"))?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

async fn variants_end_to_end() -> Outcome {
    let record = EntityRecord::new("Gerhard_Schröder", "de", "Gerhard Schröder");
    let surfaces: BTreeSet<String> = index_variants(&record).into_iter().map(|v| v.surface).collect();
    let want: BTreeSet<String> = ["gerhard schröder", "schröder", "gerhard schroder", "schroder"]
        .into_iter()
        .map(String::from)
        .collect();
    check(surfaces == want, format!("surfaces {surfaces:?}"))?;
    let (state, _, _) = demo_state();
    let v = get_json(&state, "/api/suggest?q=schroder&lang=en&limit=10").await?;
    let found = v["suggestions"]
        .as_array()
        .ok_or("no suggestions array")?
        .iter()
        .any(|s| s["display_title"] == "Gerhard Schröder");
    check(found, format!("/api/suggest returned {v}"))?;
    Ok("4 surfaces; /api/suggest?q=schroder -> Gerhard Schröder".into())
}

async fn two_request_spans() -> Outcome {
    let mock = support::CdxMock::default();
    let endpoint = mock.serve().await;
    let mut config = CdxConfig::new(&endpoint);
    config.retries = 0;
    let client = CdxClient::new(config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..SPAN_SETS {
        let url = format!("http://example.org/{i}/page");
        let n = rng.random_range(0..30);
        let stamps = support::random_timestamps(&mut rng, n);
        mock.set(&url, stamps.clone());
        mock.reset_count();
        let span = archive_span(&url, &client).await.map_err(|e| e.to_string())?;
        check(mock.requests() == 2, format!("{url}: {} requests", mock.requests()))?;
        let min = stamps.iter().min().and_then(|s| parse_cdx_timestamp(s));
        let max = stamps.iter().max().and_then(|s| parse_cdx_timestamp(s));
        check(span.first_capture == min && span.last_capture == max, format!("{url}: wrong span"))?;
    }
    Ok(format!("{SPAN_SETS} capture sets, 2 requests each"))
}

fn coverage_golden() -> Outcome {
    let d = fixtures().join("analytics/coverage");
    let s = |n: &str| d.join(n).display().to_string();
    let out = Command::new(env!("CARGO_BIN_EXE_archivesearch"))
        .args(["analyze", "coverage", "--manifest", &s("manifest.tsv"), "--archived", &s("archived.tsv")])
        .args(["--ranking", &s("entities.tsv"), "--views", &s("views.tsv")])
        .args(["--positions", "1,41", "--bucket-size", "20"])
        .env_remove("ARCHIVESEARCH_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let golden = std::fs::read(d.join("coverage.golden.tsv")).map_err(|e| e.to_string())?;
    check(out.stdout == golden, "output differs from coverage.golden.tsv")?;
    let text = String::from_utf8(golden).unwrap();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cells: Vec<u32> = line.split('\t').skip(1).map(|c| c.parse().unwrap()).collect();
        check(cells.windows(2).all(|w| w[0] >= w[1]), format!("not monotone: {line}"))?;
        rows += 1;
    }
    check(rows == 2, format!("{rows} bucket rows"))?;
    Ok("byte-identical, 2 buckets, monotone".into())
}

fn overlap_props() -> Outcome {
    let a: Vec<String> = (0..100).map(|i| format!("http://a.example/{i}")).collect();
    let b: Vec<String> = (0..100).map(|i| format!("http://b.example/{i}")).collect();
    check(format_half_up(&overlap(&a, &a, 100), 2) == "100.00", "overlap(A,A)")?;
    check(format_half_up(&overlap(&a, &b, 100), 2) == "0.00", "overlap(disjoint)")?;
    let sets = load_manifest(&fixtures().join("analytics/overlap/manifest.tsv")).map_err(|e| e.to_string())?;
    let key = QueryKey::new("Barack Obama", "en");
    let mut obama: Vec<&CachedResultSet> = sets.iter().filter(|s| s.query_key == key).collect();
    obama.sort_by_key(|s| s.retrieved_at);
    check(obama.len() == 2, "two Obama snapshots")?;
    let urls = |s: &CachedResultSet| s.results.iter().map(|r| r.url.clone()).collect::<Vec<_>>();
    let v = format_half_up(&overlap(&urls(obama[0]), &urls(obama[1]), 100), 2);
    check(v == "47.00", format!("Obama overlap {v}"))?;
    Ok(format!("self 100, disjoint 0, Obama fixture {v}%"))
}

fn annotation_rows() -> Outcome {
    let path = fixtures().join("analytics/annotations/annotations.tsv");
    let records = parse_annotations(BufReader::new(File::open(&path).unwrap())).map_err(|e| e.to_string())?;
    let rows = aggregate_annotations(&records);
    let got: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r.query.clone(), format_half_up(&r.long_term, 2), format_half_up(&r.short_term, 2)))
        .collect();
    let want = [
        ("Pablo_Picasso", "97.60", "2.40"),
        ("Vietnam", "100.00", "0.00"),
        ("Ku_Klux_Klan", "12.50", "87.50"),
    ];
    let want: Vec<(String, String, String)> =
        want.iter().map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string())).collect();
    check(got == want, format!("{got:?}"))?;
    Ok("Picasso 97.60/2.40, Vietnam 100.00/0.00, KKK 12.50/87.50".into())
}

async fn cache_first() -> Outcome {
    let (state, provider, clock) = demo_state();
    let a = get_json(&state, "/api/search?entity=Angela%20Merkel&lang=de").await?;
    clock.advance(Duration::hours(1));
    let b = get_json(&state, "/api/search?entity=Angela%20Merkel&lang=de").await?;
    check(provider.calls() == 1, format!("{} provider calls", provider.calls()))?;
    check(a["from_cache"] == false && b["from_cache"] == true, "from_cache flags")?;

    let store = MemoryStore::new();
    let t0 = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    let key = QueryKey::new("Angela Merkel", "de");
    store
        .put_snapshot(&CachedResultSet {
            query_key: key.clone(),
            retrieved_at: t0,
            results: vec![],
            provider_id: "fixture".into(),
        })
        .map_err(|e| e.to_string())?;
    let policy = RefreshPolicy::default();
    let due = |days| refresh_due(&store, &policy, t0 + Duration::days(days)).unwrap();
    check(due(31) == vec![key.clone()], "31-day-old snapshot not due")?;
    check(due(29).is_empty(), "29-day-old snapshot due")?;
    Ok("1 provider call for 2 searches; due at 31 days, not at 29".into())
}

fn append_only_audit() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("audit.sqlite");
    let store = SqliteStore::open(&path).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let keys: Vec<QueryKey> = ["Vietnam", "Barack Obama", "Pablo Picasso"]
        .iter()
        .flat_map(|t| [QueryKey::new(t, "en"), QueryKey::new(t, "de")])
        .collect();
    let hash = |s: &CachedResultSet| -> [u8; 32] { Sha256::digest(serde_json::to_vec(s).unwrap()).into() };
    let mut model: BTreeMap<QueryKey, BTreeMap<DateTime<Utc>, [u8; 32]>> = BTreeMap::new();
    let base = Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap();
    let audit = |store: &dyn SnapshotStore, model: &BTreeMap<QueryKey, BTreeMap<DateTime<Utc>, [u8; 32]>>| {
        for (k, snaps) in model {
            let listed: Vec<_> = store.list_snapshots(k).unwrap().iter().map(|s| (s.retrieved_at, hash(s))).collect();
            let want: Vec<_> = snaps.iter().map(|(t, h)| (*t, *h)).collect();
            if listed != want {
                return Err(format!("{k}: stored snapshots changed"));
            }
        }
        Ok(())
    };
    for op in 0..CACHE_OPS {
        let key = &keys[rng.random_range(0..keys.len())];
        match rng.random_range(0..3) {
            0 => {
                let at = base + Duration::seconds(rng.random_range(0..2_000_000));
                let n = rng.random_range(0..=10u32);
                let set = CachedResultSet {
                    query_key: key.clone(),
                    retrieved_at: at,
                    results: (1..=n)
                        .map(|rank| SearchResult {
                            rank,
                            url: format!("http://r{}.example/", rng.random::<u32>()),
                            title: format!("r{rank}"),
                            snippet: String::new(),
                        })
                        .collect(),
                    provider_id: "fixture".into(),
                };
                let slot = model.entry(key.clone()).or_default();
                match (store.put_snapshot(&set), slot.contains_key(&at)) {
                    (Ok(_), false) => {
                        slot.insert(at, hash(&set));
                    }
                    (Err(CacheError::Conflict { .. }), true) => {}
                    (r, dup) => return Err(format!("op {op}: put returned {r:?} (duplicate: {dup})")),
                }
                if slot.is_empty() {
                    model.remove(key);
                }
            }
            1 => {
                let latest = store.get_latest(key).map_err(|e| e.to_string())?;
                let want = model.get(key).and_then(|m| m.iter().next_back()).map(|(t, h)| (*t, *h));
                check(latest.as_ref().map(|s| (s.retrieved_at, hash(s))) == want, format!("op {op}: latest"))?;
            }
            _ => audit(&store, &model).map_err(|e| format!("op {op}: {e}"))?,
        }
    }
    audit(&store, &model)?;
    drop(store);
    let reopened = SqliteStore::open(&path).map_err(|e| e.to_string())?;
    audit(&reopened, &model)?;
    let total: usize = model.values().map(BTreeMap::len).sum();
    Ok(format!("{CACHE_OPS} ops, {total} snapshots intact after reopen"))
}

#[tokio::test(flavor = "multi_thread")]
async fn acceptance() {
    let suite = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("relatedness matches brute force on random graphs", relatedness_oracle()));
    results.push(("synthetic relatedness instance equals 1/3", one_third()));
    results.push(("suggestions match the linear-scan oracle", suggest_oracle()));
    results.push(("variants and end-to-end 'schroder' suggestion", variants_end_to_end().await));
    results.push(("archive span uses exactly two requests", two_request_spans().await));
    results.push(("coverage report equals the golden file", coverage_golden()));
    results.push(("overlap properties and 47% fixture", overlap_props()));
    results.push(("annotation rows", annotation_rows()));
    results.push(("cache-first search and refresh boundaries", cache_first().await));
    results.push(("append-only cache hash audit", append_only_audit()));
    let elapsed = suite.elapsed();
    let suite_ok = if elapsed < SUITE_LIMIT {
        Ok(format!("offline, fixture provider, {elapsed:.2?}"))
    } else {
        Err(format!("took {elapsed:?}"))
    };
    results.push(("primary suite runs offline within the time limit", suite_ok));

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
