//! Independent oracles and mock upstreams shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::Router;
use rand::seq::IndexedRandom;
use rand::Rng;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use archivesearch_core::entity_index::EntityRecord;

// ---------------------------------------------------------------- suggest

fn lower(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.to_lowercase().nfc().collect()
}

fn strip_marks(s: &str) -> String {
    s.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

/// Suffixes of `s` that begin where a word begins, `s` itself included.
fn word_suffixes(s: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let word = |c: char| c.is_alphanumeric() || is_combining_mark(c);
    let mut out = vec![s.to_owned()];
    for w in chars.windows(2) {
        if !word(w[0].1) && word(w[1].1) {
            out.push(s[w[1].0..].to_owned());
        }
    }
    out
}

/// Every string under which the oracle lets a record be found.
pub fn oracle_surfaces(record: &EntityRecord) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in std::iter::once(&record.canonical_title).chain(&record.redirect_titles) {
        let l = lower(t.trim());
        for s in word_suffixes(&l) {
            out.insert(s);
        }
        for s in word_suffixes(&strip_marks(&l)) {
            out.insert(s);
        }
    }
    out.remove("");
    out
}

/// Linear scan: every record with a surface starting with the folded
/// prefix (untrimmed, so a trailing space asks for another word), by views
/// desc then title asc, with the smallest matching surface.
pub fn oracle_suggest(records: &[EntityRecord], prefix: &str, limit: usize) -> Vec<(String, String)> {
    let p = lower(prefix);
    if p.is_empty() {
        return Vec::new();
    }
    let mut hits: Vec<(&EntityRecord, String)> = records
        .iter()
        .filter_map(|r| {
            oracle_surfaces(r)
                .into_iter()
                .find(|s| s.starts_with(&p))
                .map(|s| (r, s))
        })
        .collect();
    hits.sort_by(|(a, _), (b, _)| {
        b.cumulative_views
            .cmp(&a.cumulative_views)
            .then_with(|| a.canonical_title.cmp(&b.canonical_title))
    });
    hits.into_iter()
        .take(limit)
        .map(|(r, s)| (r.entity_id.as_str().to_owned(), s))
        .collect()
}

const SYLLABLES: &[&str] = &[
    "an", "ber", "ka", "lo", "mü", "schrö", "zé", "der", "ia", "ñe", "to", "ra", "vi", "ët", "gu", "ov",
    "ç", "li", "ma", "st", "å",
];

fn word<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=3);
    let mut w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    if rng.random_bool(0.6) {
        let mut cs = w.chars();
        let first = cs.next().unwrap().to_uppercase().collect::<String>();
        w = first + cs.as_str();
    }
    w
}

fn title<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=3);
    let seps = [" ", " ", " ", "-", ", "];
    let mut t = word(rng);
    for _ in 1..n {
        t.push_str(seps.choose(rng).unwrap());
        t.push_str(&word(rng));
    }
    t
}

/// `n` records with unique titles, accented words, redirects and view ties.
pub fn random_corpus<R: Rng>(rng: &mut R, n: usize, language: &str) -> Vec<EntityRecord> {
    let mut titles = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t = title(rng);
        if !titles.insert(t.clone()) {
            continue;
        }
        let redirects: Vec<String> = (0..rng.random_range(0..=2))
            .map(|_| title(rng))
            .filter(|r| r != &t)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let views = rng.random_range(0..40u64) * 1000;
        out.push(
            EntityRecord::new(format!("E{}", out.len()), language, &t)
                .with_redirects(redirects)
                .with_views(views),
        );
    }
    out
}

/// Prefixes of real surfaces (some with the original casing and accents)
/// mixed with random strings.
pub fn random_prefixes<R: Rng>(rng: &mut R, records: &[EntityRecord], n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.8) {
                let r = records.choose(rng).unwrap();
                let source = if rng.random_bool(0.5) || r.redirect_titles.is_empty() {
                    r.canonical_title.clone()
                } else {
                    r.redirect_titles.choose(rng).unwrap().clone()
                };
                let surfaces = word_suffixes(&source);
                let s = surfaces.choose(rng).unwrap();
                let s = if rng.random_bool(0.3) { strip_marks(s) } else { s.clone() };
                let chars: Vec<char> = s.chars().collect();
                chars[..rng.random_range(1..=chars.len())].iter().collect()
            } else {
                word(rng)
            }
        })
        .collect()
}

// ------------------------------------------------------------ relatedness

/// Direct evaluation from two inlink sets.
pub fn oracle_relatedness(a: &HashSet<String>, b: &HashSet<String>, total: u64) -> Option<f64> {
    let shared = a.intersection(b).count() as f64;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if shared == 0.0 || (total as f64) <= na.min(nb) {
        return None;
    }
    Some((na.max(nb).ln() - shared.ln()) / ((total as f64).ln() - na.min(nb).ln()))
}

/// A random graph over at most `max_entities` targets and `max_edges` edges,
/// plus each target's inlink set.
pub struct RandomGraph {
    pub edges: Vec<(String, String)>,
    pub inlinks: HashMap<String, HashSet<String>>,
    pub total: u64,
}

pub fn random_graph<R: Rng>(rng: &mut R, max_entities: usize, max_edges: usize) -> RandomGraph {
    let entities = rng.random_range(2..=max_entities);
    let articles = rng.random_range(1..=60);
    let edge_count = rng.random_range(1..=max_edges);
    let mut edges = Vec::with_capacity(edge_count);
    let mut inlinks: HashMap<String, HashSet<String>> = HashMap::new();
    for _ in 0..edge_count {
        // sources are articles or entities
        let src = if rng.random_bool(0.8) {
            format!("a{}", rng.random_range(0..articles))
        } else {
            format!("e{}", rng.random_range(0..entities))
        };
        let dst = format!("e{}", rng.random_range(0..entities));
        inlinks.entry(dst.clone()).or_default().insert(src.clone());
        edges.push((src, dst));
    }
    let total = (articles + entities) as u64 + rng.random_range(0..1000);
    RandomGraph { edges, inlinks, total }
}

// ---------------------------------------------------------------- CDX mock

/// A local CDX endpoint answering from a fixed capture table. Counts every
/// request; can fail the first few requests or stall every one.
#[derive(Clone, Default)]
pub struct CdxMock {
    pub captures: Arc<Mutex<HashMap<String, Vec<String>>>>,
    pub requests: Arc<AtomicUsize>,
    pub fail_first: Arc<AtomicUsize>,
    pub delay: Arc<Mutex<Option<Duration>>>,
}

impl CdxMock {
    pub fn set(&self, url: &str, timestamps: Vec<String>) {
        self.captures.lock().unwrap().insert(url.to_owned(), timestamps);
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn reset_count(&self) {
        self.requests.store(0, Ordering::SeqCst);
    }

    /// Serve on an ephemeral port; returns the endpoint URL.
    pub async fn serve(&self) -> String {
        let app = Router::new().route("/cdx", get(cdx)).with_state(self.clone());
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
            .await
            .unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        format!("http://{addr}/cdx")
    }
}

async fn cdx(State(mock): State<CdxMock>, Query(q): Query<HashMap<String, String>>) -> (StatusCode, String) {
    mock.requests.fetch_add(1, Ordering::SeqCst);
    let delay = *mock.delay.lock().unwrap();
    if let Some(d) = delay {
        tokio::time::sleep(d).await;
    }
    if mock
        .fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return (StatusCode::SERVICE_UNAVAILABLE, String::new());
    }
    let url = q.get("url").cloned().unwrap_or_default();
    let mut list = mock.captures.lock().unwrap().get(&url).cloned().unwrap_or_default();
    list.sort();
    if let (Some(from), Some(to)) = (q.get("from"), q.get("to")) {
        list.retain(|t| from <= t && t <= to);
    }
    if q.get("order").map(String::as_str) == Some("desc") {
        list.reverse();
    }
    if let Some(limit) = q.get("limit").and_then(|l| l.parse::<usize>().ok()) {
        list.truncate(limit);
    }
    (StatusCode::OK, list.iter().map(|t| format!("{t}\n")).collect())
}

/// `n` distinct random 14-digit timestamps between 1996 and 2016.
pub fn random_timestamps<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut set = BTreeSet::new();
    while set.len() < n {
        set.insert(format!(
            "{:04}{:02}{:02}{:02}{:02}{:02}",
            rng.random_range(1996..=2016),
            rng.random_range(1..=12),
            rng.random_range(1..=28),
            rng.random_range(0..24),
            rng.random_range(0..60),
            rng.random_range(0..60)
        ));
    }
    let mut v: Vec<String> = set.into_iter().collect();
    // the mock must not rely on input order
    v.reverse();
    v
}
