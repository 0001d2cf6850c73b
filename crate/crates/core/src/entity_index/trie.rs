use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use super::normalize::case_fold;
use super::variants::index_variants;
use super::{EntityId, EntityRecord, IndexError, IndexedVariant, Suggestion};

type NodeId = u32;

/// An entity reference stored at a trie node: its popularity rank and the
/// variant through which it was reached.
#[derive(Debug, Clone, Copy)]
struct Hit {
    rank: u32,
    variant: u32,
}

#[derive(Debug, Default)]
struct Node {
    children: Vec<(char, NodeId)>,
    /// Entities reachable below this node, one per entity, in rank order.
    hits: Vec<Hit>,
}

impl Node {
    fn child(&self, c: char) -> Option<NodeId> {
        self.children
            .binary_search_by_key(&c, |(k, _)| *k)
            .ok()
            .map(|i| self.children[i].1)
    }
}

#[derive(Debug)]
struct Ranked {
    id: EntityId,
    title: String,
    views: u64,
}

/// Immutable prefix index for one language.
///
/// Each node keeps the deduplicated, rank-ordered list of entities below it,
/// so a lookup walks the prefix and then reads at most `limit` entries.
#[derive(Debug)]
pub struct EntityIndex {
    language: String,
    entities: Vec<Ranked>,
    by_id: HashMap<EntityId, u32>,
    by_title: HashMap<String, u32>,
    variants: Vec<IndexedVariant>,
    nodes: Vec<Node>,
}

/// Popularity descending, then title ascending.
pub(crate) fn rank_order(a_views: u64, a_title: &str, b_views: u64, b_title: &str) -> Ordering {
    b_views.cmp(&a_views).then_with(|| a_title.cmp(b_title))
}

impl EntityIndex {
    pub fn build(records: &[EntityRecord]) -> Result<Self, IndexError> {
        let first = records.first().ok_or(IndexError::EmptyCorpus)?;
        let language = first.language.clone();

        let mut titles = HashSet::new();
        let mut ids = HashSet::new();
        for r in records {
            r.validate()?;
            if r.language != language {
                return Err(IndexError::MixedLanguage {
                    expected: language,
                    found: r.language.clone(),
                    entity_id: r.entity_id.clone(),
                });
            }
            if !titles.insert(r.canonical_title.as_str()) {
                return Err(IndexError::DuplicateTitle {
                    language,
                    title: r.canonical_title.clone(),
                });
            }
            if !ids.insert(&r.entity_id) {
                return Err(IndexError::DuplicateEntityId(r.entity_id.clone()));
            }
        }

        let mut sorted: Vec<&EntityRecord> = records.iter().collect();
        sorted.sort_by(|a, b| {
            rank_order(
                a.cumulative_views,
                &a.canonical_title,
                b.cumulative_views,
                &b.canonical_title,
            )
        });

        let mut index = EntityIndex {
            language,
            entities: Vec::with_capacity(sorted.len()),
            by_id: HashMap::with_capacity(sorted.len()),
            by_title: HashMap::with_capacity(sorted.len()),
            variants: Vec::new(),
            nodes: vec![Node::default()],
        };

        for (rank, record) in sorted.into_iter().enumerate() {
            let rank = rank as u32;
            index.entities.push(Ranked {
                id: record.entity_id.clone(),
                title: record.canonical_title.clone(),
                views: record.cumulative_views,
            });
            index.by_id.insert(record.entity_id.clone(), rank);
            index
                .by_title
                .entry(case_fold(record.canonical_title.trim()))
                .or_insert(rank);
            for variant in index_variants(record) {
                let variant_no = index.variants.len() as u32;
                index.insert(&variant.surface, Hit {
                    rank,
                    variant: variant_no,
                });
                index.variants.push(variant);
            }
        }

        let variants = &index.variants;
        for node in &mut index.nodes {
            node.hits.sort_by(|a, b| {
                a.rank.cmp(&b.rank).then_with(|| {
                    variants[a.variant as usize]
                        .surface
                        .cmp(&variants[b.variant as usize].surface)
                })
            });
            node.hits.dedup_by_key(|h| h.rank);
            node.hits.shrink_to_fit();
        }
        Ok(index)
    }

    fn insert(&mut self, surface: &str, hit: Hit) {
        let mut current: NodeId = 0;
        for c in surface.chars() {
            let node = &self.nodes[current as usize];
            current = match node.children.binary_search_by_key(&c, |(k, _)| *k) {
                Ok(i) => node.children[i].1,
                Err(i) => {
                    let next = self.nodes.len() as NodeId;
                    self.nodes.push(Node::default());
                    self.nodes[current as usize].children.insert(i, (c, next));
                    next
                }
            };
            self.nodes[current as usize].hits.push(hit);
        }
    }

    /// Up to `limit` entities with a variant starting with the case-folded
    /// `prefix`, most viewed first. An empty prefix matches nothing.
    pub fn suggest(&self, prefix: &str, limit: usize) -> Vec<Suggestion> {
        let prefix = case_fold(prefix);
        if prefix.is_empty() || limit == 0 {
            return Vec::new();
        }
        let mut current: NodeId = 0;
        for c in prefix.chars() {
            match self.nodes[current as usize].child(c) {
                Some(next) => current = next,
                None => return Vec::new(),
            }
        }
        self.nodes[current as usize]
            .hits
            .iter()
            .take(limit)
            .map(|hit| {
                let entity = &self.entities[hit.rank as usize];
                Suggestion {
                    entity_id: entity.id.clone(),
                    display_title: entity.title.clone(),
                    cumulative_views: entity.views,
                    matched_surface: self.variants[hit.variant as usize].surface.clone(),
                }
            })
            .collect()
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn variants(&self) -> &[IndexedVariant] {
        &self.variants
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn title_of(&self, id: &EntityId) -> Option<&str> {
        self.by_id
            .get(id)
            .map(|&r| self.entities[r as usize].title.as_str())
    }

    pub fn views_of(&self, id: &EntityId) -> Option<u64> {
        self.by_id.get(id).map(|&r| self.entities[r as usize].views)
    }

    /// Resolve a canonical title (case-insensitively) to its entity.
    pub fn find_title(&self, title: &str) -> Option<&EntityId> {
        self.by_title
            .get(&case_fold(title.trim()))
            .map(|&r| &self.entities[r as usize].id)
    }

    /// Entity ids ordered by popularity (most viewed first).
    pub fn ranked_ids(&self) -> impl Iterator<Item = (&EntityId, u64)> {
        self.entities.iter().map(|e| (&e.id, e.views))
    }
}
