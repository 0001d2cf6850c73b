use serde::Serialize;

use super::AnalyticsError;
use crate::entity_index::EntityId;

pub const DEFAULT_BUCKET_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PopularityBucket {
    pub label: String,
    /// 1-based, inclusive.
    pub start_rank: usize,
    pub end_rank: usize,
    pub entity_ids: Vec<EntityId>,
}

/// Cuts `ranked` (most viewed first) into one bucket per 1-based start
/// position.
pub fn bucket_entities(
    ranked: &[EntityId],
    positions: &[usize],
    bucket_size: usize,
) -> Result<Vec<PopularityBucket>, AnalyticsError> {
    if bucket_size == 0 {
        return Err(AnalyticsError::InvalidArgument("bucket size must be positive".into()));
    }
    let corpus = ranked.len();
    let mut buckets: Vec<PopularityBucket> = Vec::with_capacity(positions.len());
    for &position in positions {
        if position == 0 || position > corpus {
            return Err(AnalyticsError::PositionOutOfRange { position, corpus });
        }
        let end = position - 1 + bucket_size;
        if end > corpus {
            return Err(AnalyticsError::IncompleteBucket {
                position,
                size: bucket_size,
                corpus,
            });
        }
        if let Some(prev) = buckets
            .iter()
            .find(|b| position <= b.end_rank && b.start_rank <= end)
        {
            return Err(AnalyticsError::OverlappingBuckets {
                first: prev.start_rank,
                second: position,
            });
        }
        buckets.push(PopularityBucket {
            label: format!("{position}-{end}"),
            start_rank: position,
            end_rank: end,
            entity_ids: ranked[position - 1..end].to_vec(),
        });
    }
    Ok(buckets)
}
