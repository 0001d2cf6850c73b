use std::collections::HashMap;
use std::io::BufRead;

use crate::entity_index::case_fold;
use crate::tsv::{records, LineError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InterLanguageError {
    #[error("({lang}, {title}) is already mapped to {existing:?} in {to_lang}")]
    Conflict {
        lang: String,
        title: String,
        to_lang: String,
        existing: String,
    },
    #[error("a title cannot be linked to its own language ({0})")]
    SameLanguage(String),
    #[error(transparent)]
    Malformed(#[from] LineError),
}

fn key(title: &str) -> String {
    case_fold(&title.trim().replace('_', " "))
}

/// Symmetric title mapping between Wikipedia language editions.
#[derive(Debug, Clone, Default)]
pub struct InterLanguageMap {
    // (from_lang, folded title, to_lang) -> title in to_lang
    pairs: HashMap<(String, String, String), String>,
}

impl InterLanguageMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Link `(lang_a, title_a)` and `(lang_b, title_b)` in both directions.
    pub fn insert(
        &mut self,
        lang_a: &str,
        title_a: &str,
        lang_b: &str,
        title_b: &str,
    ) -> Result<(), InterLanguageError> {
        if lang_a == lang_b {
            return Err(InterLanguageError::SameLanguage(lang_a.to_owned()));
        }
        let forward = (lang_a.to_owned(), key(title_a), lang_b.to_owned());
        let backward = (lang_b.to_owned(), key(title_b), lang_a.to_owned());
        for (k, target) in [(&forward, title_b), (&backward, title_a)] {
            if let Some(existing) = self.pairs.get(k) {
                if key(existing) != key(target) {
                    return Err(InterLanguageError::Conflict {
                        lang: k.0.clone(),
                        title: k.1.clone(),
                        to_lang: k.2.clone(),
                        existing: existing.clone(),
                    });
                }
            }
        }
        self.pairs.insert(forward, title_b.trim().to_owned());
        self.pairs.insert(backward, title_a.trim().to_owned());
        Ok(())
    }

    /// The title of the same entity in `to_lang`, matched case-insensitively.
    pub fn lookup(&self, title: &str, from_lang: &str, to_lang: &str) -> Option<&str> {
        if from_lang == to_lang {
            return None;
        }
        self.pairs
            .get(&(from_lang.to_owned(), key(title), to_lang.to_owned()))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pairs.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Read `lang1 <TAB> title1 <TAB> lang2 <TAB> title2` lines.
pub fn parse_interlanguage<R: BufRead>(reader: R) -> Result<InterLanguageMap, InterLanguageError> {
    let mut map = InterLanguageMap::new();
    for row in records(reader) {
        let (line, f) = row?;
        if f.len() != 4 || f.iter().any(|x| x.trim().is_empty()) {
            return Err(LineError::new(line, "expected lang1, title1, lang2, title2").into());
        }
        map.insert(f[0].trim(), &f[1], f[2].trim(), &f[3])
            .map_err(|e| match e {
                InterLanguageError::Malformed(e) => InterLanguageError::Malformed(e),
                other => InterLanguageError::Malformed(LineError::new(line, other.to_string())),
            })?;
    }
    Ok(map)
}
