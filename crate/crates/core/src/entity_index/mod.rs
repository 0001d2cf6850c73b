//! Typeahead over Wikipedia entities.
//!
//! Every canonical title and redirect is split into tokens; the full string,
//! every suffix starting at a later token and the accent-folded copies of
//! both go into a prefix tree. Completions are ranked by page views summed
//! across the entity's redirects.

mod ingest;
mod normalize;
mod pageviews;
mod trie;
mod variants;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ingest::{
    parse_entities, parse_page_views, parse_view_totals, write_entities, write_view_totals,
};
pub use normalize::{case_fold, fold_accents, normalize_token, token_starts, NormalizedToken};
pub use pageviews::{aggregate_page_views, DateWindow, PageViewError, PageViewLedger, PageViewTotals};
pub use trie::EntityIndex;
pub use variants::index_variants;

/// Opaque, stable entity identifier (in the bundled data, the Wikipedia page
/// title with underscores).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl std::borrow::Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub entity_id: EntityId,
    pub canonical_title: String,
    pub language: String,
    pub redirect_titles: Vec<String>,
    pub cumulative_views: u64,
    pub category: Option<String>,
}

impl EntityRecord {
    pub fn new(id: impl Into<String>, language: &str, title: &str) -> Self {
        Self {
            entity_id: EntityId::new(id),
            canonical_title: title.to_owned(),
            language: language.to_owned(),
            redirect_titles: Vec::new(),
            cumulative_views: 0,
            category: None,
        }
    }

    pub fn with_redirects<I, S>(mut self, redirects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.redirect_titles = redirects.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_views(mut self, views: u64) -> Self {
        self.cumulative_views = views;
        self
    }

    pub fn with_category(mut self, category: &str) -> Self {
        self.category = Some(category.to_owned());
        self
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        let invalid = |reason: &str| IndexError::InvalidRecord {
            entity_id: self.entity_id.clone(),
            reason: reason.to_owned(),
        };
        if self.entity_id.0.is_empty() {
            return Err(invalid("empty entity id"));
        }
        if self.canonical_title.trim().is_empty() {
            return Err(invalid("empty canonical title"));
        }
        if self.language.is_empty() {
            return Err(invalid("empty language"));
        }
        if self
            .redirect_titles
            .iter()
            .any(|r| r == &self.canonical_title)
        {
            return Err(invalid("redirect equals canonical title"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VariantKind {
    FullTitle,
    TokenSuffix,
    AccentFolded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedVariant {
    pub surface: String,
    pub kind: VariantKind,
    pub entity_id: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub entity_id: EntityId,
    pub display_title: String,
    pub cumulative_views: u64,
    pub matched_surface: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("cannot build an index from an empty record list")]
    EmptyCorpus,
    #[error("duplicate canonical title {title:?} in language {language}")]
    DuplicateTitle { language: String, title: String },
    #[error("duplicate entity id {0}")]
    DuplicateEntityId(EntityId),
    #[error("entity {entity_id} has language {found}, index language is {expected}")]
    MixedLanguage {
        expected: String,
        found: String,
        entity_id: EntityId,
    },
    #[error("invalid entity {entity_id}: {reason}")]
    InvalidRecord { entity_id: EntityId, reason: String },
}
