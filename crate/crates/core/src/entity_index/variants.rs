use std::collections::HashSet;

use super::normalize::{case_fold, fold_accents, token_starts};
use super::{EntityRecord, IndexedVariant, VariantKind};

/// Every surface under which `record` can be found by prefix.
///
/// For the canonical title and each redirect: the case-folded string, its
/// suffixes starting at each later token, and the accent-folded copies of
/// both when folding changes anything. Surfaces are unique per entity; the
/// first kind assigned to a surface wins.
pub fn index_variants(record: &EntityRecord) -> Vec<IndexedVariant> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut emit = |surface: &str, kind: VariantKind| {
        if !surface.is_empty() && seen.insert(surface.to_owned()) {
            out.push(IndexedVariant {
                surface: surface.to_owned(),
                kind,
                entity_id: record.entity_id.clone(),
            });
        }
    };

    let titles = std::iter::once(&record.canonical_title).chain(record.redirect_titles.iter());
    for title in titles {
        let cased = case_fold(title.trim());
        emit(&cased, VariantKind::FullTitle);
        for start in suffix_starts(&cased) {
            emit(&cased[start..], VariantKind::TokenSuffix);
        }

        let folded = fold_accents(&cased);
        if folded != cased {
            emit(&folded, VariantKind::AccentFolded);
            for start in suffix_starts(&folded) {
                emit(&folded[start..], VariantKind::TokenSuffix);
            }
        }
    }
    out
}

fn suffix_starts(surface: &str) -> impl Iterator<Item = usize> {
    token_starts(surface).into_iter().filter(|&s| s > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn surfaces(record: &EntityRecord) -> BTreeSet<String> {
        index_variants(record).into_iter().map(|v| v.surface).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn gerhard_schroder_has_four_surfaces() {
        let r = EntityRecord::new("Gerhard_Schröder", "en", "Gerhard Schröder");
        assert_eq!(
            surfaces(&r),
            set(&["gerhard schröder", "schröder", "gerhard schroder", "schroder"])
        );
        let kinds: Vec<_> = index_variants(&r).into_iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![
                VariantKind::FullTitle,
                VariantKind::TokenSuffix,
                VariantKind::AccentFolded,
                VariantKind::TokenSuffix
            ]
        );
    }

    #[test]
    fn single_token() {
        let r = EntityRecord::new("Vietnam", "en", "Vietnam");
        assert_eq!(surfaces(&r), set(&["vietnam"]));
    }

    #[test]
    fn ku_klux_klan_suffixes() {
        let r = EntityRecord::new("Ku_Klux_Klan", "en", "Ku Klux Klan");
        assert_eq!(surfaces(&r), set(&["ku klux klan", "klux klan", "klan"]));
    }

    #[test]
    fn redirects_contribute_and_dedupe() {
        let r = EntityRecord::new("Klan", "en", "Ku Klux Klan").with_redirects(["KKK", "The Klan"]);
        assert_eq!(
            surfaces(&r),
            set(&["ku klux klan", "klux klan", "klan", "kkk", "the klan"])
        );
    }

    #[test]
    fn suffix_kinds_are_suffixes_of_a_full_surface() {
        let r = EntityRecord::new("x", "de", "Zürich (Stadt) Öl-Straße")
            .with_redirects(["Zuerich"]);
        let vars = index_variants(&r);
        let fulls: Vec<_> = vars
            .iter()
            .filter(|v| v.kind != VariantKind::TokenSuffix)
            .map(|v| v.surface.clone())
            .collect();
        for v in vars.iter().filter(|v| v.kind == VariantKind::TokenSuffix) {
            assert!(
                fulls.iter().any(|f| f.ends_with(&v.surface)
                    && token_starts(f).contains(&(f.len() - v.surface.len()))),
                "{} is not a token suffix",
                v.surface
            );
        }
    }
}
