//! Wikipedia link graph and link-based entity relatedness.
//!
//! The relatedness of two entities is computed from their inlink sets `S1`,
//! `S2` and the article count `W`:
//!
//! ```text
//!        ln max(|S1|,|S2|) - ln |S1 ∩ S2|
//!   d = ----------------------------------
//!          ln |W| - ln min(|S1|,|S2|)
//! ```
//!
//! It is a distance: 0 for identical link neighbourhoods, growing as the
//! shared inlinks shrink. Pairs without shared inlinks, and pairs where the
//! denominator vanishes, are [`RelatednessScore::Unrelated`].

mod interlang;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::entity_index::EntityId;
use crate::tsv::{records, LineError};

pub use interlang::{parse_interlanguage, InterLanguageError, InterLanguageMap};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("entity {0} is not in the link graph")]
    UnknownEntity(EntityId),
    #[error("total article count must be positive")]
    ZeroArticles,
    #[error("total article count {total} is below the {distinct} distinct articles in the edge list")]
    TooFewArticles { total: u64, distinct: u64 },
    #[error("edge list has no `W <TAB> count` header")]
    MissingHeader,
    #[error(transparent)]
    Malformed(#[from] LineError),
}

/// Result of the relatedness distance. Serialized as a number, or as the
/// string `"UNRELATED"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelatednessScore {
    Related(f64),
    Unrelated,
}

impl RelatednessScore {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Related(v) => Some(*v),
            Self::Unrelated => None,
        }
    }

    pub fn is_related(&self) -> bool {
        matches!(self, Self::Related(_))
    }
}

impl Serialize for RelatednessScore {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Related(v) => s.serialize_f64(*v),
            Self::Unrelated => s.serialize_str("UNRELATED"),
        }
    }
}

impl<'de> Deserialize<'de> for RelatednessScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Related(v)),
            Raw::Tag(t) if t == "UNRELATED" => Ok(Self::Unrelated),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown score {t:?}"))),
        }
    }
}

/// The distance from set sizes alone.
pub fn relatedness_from_counts(
    size_a: u64,
    size_b: u64,
    shared: u64,
    total_articles: u64,
) -> RelatednessScore {
    if size_a == 0 || size_b == 0 || shared == 0 {
        return RelatednessScore::Unrelated;
    }
    let (small, large) = if size_a <= size_b {
        (size_a, size_b)
    } else {
        (size_b, size_a)
    };
    if total_articles <= small {
        return RelatednessScore::Unrelated;
    }
    let numerator = (large as f64).ln() - (shared as f64).ln();
    let denominator = (total_articles as f64).ln() - (small as f64).ln();
    RelatednessScore::Related(numerator / denominator)
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Immutable inlink/outlink adjacency over interned article ids.
#[derive(Debug, Clone)]
pub struct LinkGraph {
    language: String,
    total_articles: u64,
    ids: Vec<EntityId>,
    lookup: HashMap<EntityId, u32>,
    inlinks: Vec<Vec<u32>>,
    outlinks: Vec<Vec<u32>>,
}

impl LinkGraph {
    /// Build from `(source, target)` edges. Duplicate edges count once.
    pub fn from_edges<I, S>(language: &str, edges: I, total_articles: u64) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        if total_articles == 0 {
            return Err(GraphError::ZeroArticles);
        }
        let mut graph = LinkGraph {
            language: language.to_owned(),
            total_articles,
            ids: Vec::new(),
            lookup: HashMap::new(),
            inlinks: Vec::new(),
            outlinks: Vec::new(),
        };
        for (source, target) in edges {
            let s = graph.intern(source.as_ref());
            let t = graph.intern(target.as_ref());
            graph.inlinks[t as usize].push(s);
            graph.outlinks[s as usize].push(t);
        }
        for list in graph.inlinks.iter_mut().chain(graph.outlinks.iter_mut()) {
            list.sort_unstable();
            list.dedup();
            list.shrink_to_fit();
        }
        let distinct = graph.ids.len() as u64;
        if total_articles < distinct {
            return Err(GraphError::TooFewArticles {
                total: total_articles,
                distinct,
            });
        }
        Ok(graph)
    }

    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&n) = self.lookup.get(id) {
            return n;
        }
        let n = self.ids.len() as u32;
        let id = EntityId::new(id);
        self.ids.push(id.clone());
        self.lookup.insert(id, n);
        self.inlinks.push(Vec::new());
        self.outlinks.push(Vec::new());
        n
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn total_articles(&self) -> u64 {
        self.total_articles
    }

    /// Number of distinct articles mentioned by the edge list.
    pub fn article_count(&self) -> usize {
        self.ids.len()
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.lookup.contains_key(id)
    }

    /// Articles linking to `id`; empty for entities absent from the edges.
    pub fn inlinks(&self, id: &EntityId) -> impl Iterator<Item = &EntityId> {
        self.lookup
            .get(id)
            .map(|&n| self.inlinks[n as usize].as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&n| &self.ids[n as usize])
    }

    fn node(&self, id: &EntityId) -> Result<u32, GraphError> {
        self.lookup
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownEntity(id.clone()))
    }

    fn score_nodes(&self, a: u32, b: u32) -> RelatednessScore {
        let sa = &self.inlinks[a as usize];
        let sb = &self.inlinks[b as usize];
        relatedness_from_counts(
            sa.len() as u64,
            sb.len() as u64,
            sorted_intersection_len(sa, sb),
            self.total_articles,
        )
    }

    pub fn relatedness(&self, a: &EntityId, b: &EntityId) -> Result<RelatednessScore, GraphError> {
        Ok(self.score_nodes(self.node(a)?, self.node(b)?))
    }

    /// The `k` closest entities sharing at least one inlinking article with
    /// `entity`, by ascending distance, then descending popularity, then id.
    pub fn related_entities(
        &self,
        entity: &EntityId,
        k: usize,
        popularity: &HashMap<EntityId, u64>,
    ) -> Result<Vec<(EntityId, RelatednessScore)>, GraphError> {
        let origin = self.node(entity)?;
        let mut candidates: Vec<u32> = self.inlinks[origin as usize]
            .iter()
            .flat_map(|&article| self.outlinks[article as usize].iter().copied())
            .filter(|&c| c != origin)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();

        let mut scored: Vec<(u32, f64)> = candidates
            .into_iter()
            .filter_map(|c| self.score_nodes(origin, c).value().map(|v| (c, v)))
            .collect();
        let pop = |n: u32| popularity.get(&self.ids[n as usize]).copied().unwrap_or(0);
        scored.sort_by(|&(a, da), &(b, db)| {
            da.total_cmp(&db)
                .then_with(|| pop(b).cmp(&pop(a)))
                .then_with(|| self.ids[a as usize].cmp(&self.ids[b as usize]))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(n, d)| (self.ids[n as usize].clone(), RelatednessScore::Related(d)))
            .collect())
    }
}

/// Read an edge list: a `W <TAB> count` header, then `source <TAB> target`
/// lines.
pub fn load_graph<R: BufRead>(reader: R, language: &str) -> Result<LinkGraph, GraphError> {
    let mut rows = records(reader);
    let (line, header) = rows.next().ok_or(GraphError::MissingHeader)??;
    if header.len() != 2 || header[0].trim() != "W" {
        return Err(GraphError::MissingHeader);
    }
    let total: u64 = header[1]
        .trim()
        .parse()
        .map_err(|e| LineError::new(line, format!("bad article count: {e}")))?;

    let mut edges = Vec::new();
    for row in rows {
        let (line, fields) = row?;
        if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(LineError::new(line, "expected `source <TAB> target`").into());
        }
        edges.push((fields[0].trim().to_owned(), fields[1].trim().to_owned()));
    }
    LinkGraph::from_edges(language, edges, total)
}
