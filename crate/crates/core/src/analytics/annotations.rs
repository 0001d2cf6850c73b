use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{hundred, ratio};

pub const MIN_LABELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    LongTerm,
    ShortTerm,
    Unknown,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LONG_TERM" => Ok(Label::LongTerm),
            "SHORT_TERM" => Ok(Label::ShortTerm),
            "UNKNOWN" => Ok(Label::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::LongTerm => "LONG_TERM",
            Label::ShortTerm => "SHORT_TERM",
            Label::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub query: String,
    pub url: String,
    pub labels: Vec<Label>,
}

/// Strict majority among the non-UNKNOWN votes; ties and all-UNKNOWN give
/// UNKNOWN.
pub fn final_label(labels: &[Label]) -> Label {
    let long = labels.iter().filter(|&&l| l == Label::LongTerm).count();
    let short = labels.iter().filter(|&&l| l == Label::ShortTerm).count();
    let decided = long + short;
    if 2 * long > decided {
        Label::LongTerm
    } else if 2 * short > decided {
        Label::ShortTerm
    } else {
        Label::Unknown
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceDistribution {
    pub query: String,
    pub long_term: BigRational,
    pub short_term: BigRational,
    /// URLs with a LONG_TERM or SHORT_TERM final label.
    pub decided: usize,
    pub undecided: usize,
}

/// Per query, in order of first appearance: the share of long- and
/// short-term URLs among those with a decided final label. Queries with no
/// decided URL are left out.
pub fn aggregate_annotations(records: &[AnnotationRecord]) -> Vec<RelevanceDistribution> {
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, [usize; 3]> = HashMap::new();
    for r in records {
        let slot = counts.entry(&r.query).or_insert_with(|| {
            order.push(&r.query);
            [0; 3]
        });
        match final_label(&r.labels) {
            Label::LongTerm => slot[0] += 1,
            Label::ShortTerm => slot[1] += 1,
            Label::Unknown => slot[2] += 1,
        }
    }
    order
        .into_iter()
        .filter_map(|q| {
            let [long, short, unknown] = counts[q];
            let decided = long + short;
            (decided > 0).then(|| RelevanceDistribution {
                query: q.to_owned(),
                long_term: ratio(long, decided) * hundred(),
                short_term: ratio(short, decided) * hundred(),
                decided,
                undecided: unknown,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::format_half_up;
    use proptest::prelude::*;
    use Label::*;

    fn rec(q: &str, i: usize, labels: &[Label]) -> AnnotationRecord {
        AnnotationRecord {
            query: q.into(),
            url: format!("http://{q}.example/{i}"),
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn majority_rules() {
        assert_eq!(final_label(&[LongTerm, LongTerm, ShortTerm, Unknown]), LongTerm);
        assert_eq!(final_label(&[LongTerm, ShortTerm, Unknown, Unknown]), Unknown);
        assert_eq!(final_label(&[Unknown; 4]), Unknown);
        assert_eq!(final_label(&[ShortTerm, Unknown, Unknown, Unknown]), ShortTerm);
        assert_eq!(final_label(&[ShortTerm, ShortTerm, LongTerm, LongTerm, LongTerm]), LongTerm);
    }

    #[test]
    fn unanimous_and_all_unknown() {
        let records: Vec<_> = (0..10).map(|i| rec("Vietnam", i, &[LongTerm; 4])).collect();
        let mut all = records.clone();
        all.push(rec("Nobody", 0, &[Unknown; 4]));
        let out = aggregate_annotations(&all);
        assert_eq!(out.len(), 1);
        assert_eq!(format_half_up(&out[0].long_term, 2), "100.00");
        assert_eq!(format_half_up(&out[0].short_term, 2), "0.00");
    }

    #[test]
    fn picasso_split() {
        let mut records: Vec<_> = (0..122).map(|i| rec("Pablo_Picasso", i, &[LongTerm, LongTerm, LongTerm, ShortTerm])).collect();
        records.extend((122..125).map(|i| rec("Pablo_Picasso", i, &[ShortTerm, ShortTerm, ShortTerm, Unknown])));
        records.push(rec("Pablo_Picasso", 999, &[LongTerm, ShortTerm, Unknown, Unknown]));
        let out = aggregate_annotations(&records);
        assert_eq!(format_half_up(&out[0].long_term, 2), "97.60");
        assert_eq!(format_half_up(&out[0].short_term, 2), "2.40");
        assert_eq!((out[0].decided, out[0].undecided), (125, 1));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("long_term".parse::<Label>().unwrap(), LongTerm);
        assert_eq!(" SHORT_TERM ".parse::<Label>().unwrap(), ShortTerm);
        assert!("maybe".parse::<Label>().is_err());
        assert_eq!(Unknown.to_string(), "UNKNOWN");
    }

    proptest! {
        #[test]
        fn shares_sum_to_hundred(
            votes in prop::collection::vec(prop::collection::vec(0u8..3, 4..8), 1..40),
        ) {
            let records: Vec<_> = votes
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let labels: Vec<Label> = v.iter().map(|&x| [LongTerm, ShortTerm, Unknown][x as usize]).collect();
                    rec("q", i, &labels)
                })
                .collect();
            for d in aggregate_annotations(&records) {
                prop_assert_eq!(&d.long_term + &d.short_term, hundred());
            }
        }
    }
}
