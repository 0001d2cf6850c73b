//! Batch measurements over cached result sets: archive coverage by
//! popularity bucket, result overlap between retrieval periods, and the
//! long/short-term relevance split from assessor labels.
//!
//! Percentages are kept as exact rationals; only the report writers round.

mod annotations;
mod buckets;
mod coverage;
mod io;
mod overlap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::entity_index::EntityId;
use crate::tsv::LineError;

pub use annotations::{
    aggregate_annotations, final_label, AnnotationRecord, Label, RelevanceDistribution,
    MIN_LABELS,
};
pub use buckets::{bucket_entities, PopularityBucket, DEFAULT_BUCKET_SIZE};
pub use coverage::{coverage, CoverageReport, CoverageRow, CutoffStat, DEFAULT_CUTOFFS};
pub use io::{
    parse_annotations, parse_archived_flags, write_annotations_tsv, write_coverage_full_tsv,
    write_coverage_tsv, write_overlap_tsv, ArchivedFlags, ROUNDING_NOTE,
};
pub use overlap::{
    category_overlap, overlap, period_of, OverlapReport, OverlapRow, OverlapWarning, PeriodPair,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("bucket position {position} is outside a corpus of {corpus} entities")]
    PositionOutOfRange { position: usize, corpus: usize },
    #[error("bucket at position {position} needs {size} entities but the corpus has {corpus}")]
    IncompleteBucket {
        position: usize,
        size: usize,
        corpus: usize,
    },
    #[error("buckets at positions {first} and {second} overlap")]
    OverlappingBuckets { first: usize, second: usize },
    #[error("invalid cutoffs: {0}")]
    InvalidCutoffs(String),
    #[error("no archived flag for {url} (entity {entity})")]
    MissingFlag { entity: EntityId, url: String },
    #[error("invalid period {0:?}, expected YYYY-MM")]
    InvalidPeriod(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Malformed(#[from] LineError),
}

pub fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn hundred() -> BigRational {
    BigRational::from_integer(BigInt::from(100))
}

/// Decimal rendering with `decimals` places, rounding half away from zero.
pub fn format_half_up(value: &BigRational, decimals: u32) -> String {
    let scale = BigInt::from(10u32).pow(decimals);
    let scaled = value.abs() * BigRational::from_integer(scale.clone());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let units = (scaled + half).floor().to_integer();
    let negative = value.is_negative() && !units.is_zero();
    let int_part = &units / &scale;
    let frac_part = &units % &scale;
    let sign = if negative { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{:0>width$}",
            frac_part.to_string(),
            width = decimals as usize
        )
    }
}

pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
