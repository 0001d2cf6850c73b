use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// The two normalized forms of a piece of text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedToken {
    /// Lowercased, NFC-composed.
    pub case_folded: String,
    /// `case_folded` with all combining marks removed after canonical
    /// decomposition.
    pub accent_folded: String,
}

pub fn normalize_token(text: &str) -> NormalizedToken {
    let case_folded = case_fold(text);
    let accent_folded = fold_accents(&case_folded);
    NormalizedToken {
        case_folded,
        accent_folded,
    }
}

pub fn case_fold(text: &str) -> String {
    let composed: String = text.nfc().collect();
    composed.to_lowercase().nfc().collect()
}

pub fn fold_accents(text: &str) -> String {
    text.nfd()
        .filter(|c| !is_combining_mark(*c))
        .nfc()
        .collect()
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Byte offsets at which a token begins. Tokens are maximal runs of
/// alphanumeric characters (and their combining marks); everything else
/// separates.
pub fn token_starts(text: &str) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut prev_is_token = false;
    for (offset, c) in text.char_indices() {
        let is_token = is_token_char(c);
        if is_token && !prev_is_token {
            starts.push(offset);
        }
        prev_is_token = is_token;
    }
    starts
}
